#include <doctest.h>

#include <random>

#include "setrlusi/predicates.hpp"

using namespace setrlusi;

namespace {

DomainDataset blobs(std::mt19937_64& gen, Eigen::Index n, Eigen::Index d, Eigen::Index informative,
                    const std::string& name) {
  std::normal_distribution<double> noise(0.0, 0.3);
  DomainDataset ds;
  ds.name = name;
  ds.features.resize(n, d);
  Labels y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = i % 2;
    for (Eigen::Index c = 0; c < d; ++c) ds.features(i, c) = noise(gen);
    ds.features(i, informative) += y(i) == 1.0 ? 1.0 : -1.0;
  }
  ds.labels = y;
  return ds;
}

TransferTask make_task(std::size_t n_sources, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  TransferTask task;
  for (std::size_t i = 0; i < n_sources; ++i) {
    task.sources.push_back(blobs(gen, 40, d, static_cast<Eigen::Index>(i) % d, "s" + std::to_string(i)));
  }
  task.target_train = blobs(gen, 10, d, 0, "train");
  task.target_test = blobs(gen, 20, d, 0, "test");
  return task;
}

}  // namespace

TEST_SUITE("predicates") {

TEST_CASE("kind names round-trip") {
  for (int k = 0; k < 10; ++k) {
    const auto kind = static_cast<PredicateKind>(k);
    CHECK(parse_predicate_kind(to_string(kind)) == kind);
    CHECK(is_source_kind(kind) == (k < 5));
  }
  CHECK_FALSE(parse_predicate_kind("nope").has_value());
  CHECK(uses_margin_classifier(PredicateKind::SourceFeaturePair));
  CHECK_FALSE(uses_margin_classifier(PredicateKind::SourceKernelSum));
}

TEST_CASE("margin classifier separates 1-D data") {
  Eigen::MatrixXd x(8, 1);
  x << -2, -1.5, -1, -0.5, 0.5, 1, 1.5, 2;
  Labels y(8);
  y << 0, 0, 0, 0, 1, 1, 1, 1;
  const MarginClassifier clf = train_linear_margin_classifier(x, y, 0.01, 500);
  const Eigen::VectorXd f = clf.decision(x);
  for (Eigen::Index i = 0; i < 8; ++i) CHECK((f(i) > 0.0) == (y(i) == 1.0));
  // The objective trace never rises.
  for (std::size_t e = 1; e < clf.objective_history.size(); ++e) {
    CHECK(clf.objective_history[e] <= clf.objective_history[e - 1]);
  }
  CHECK(clf.objective_history.back() ==
        doctest::Approx(margin_objective(clf.w, clf.b, x, y, 0.01)));
}

TEST_CASE("margin classifier maps 0/1 labels to -1/+1") {
  // Flipping which class is labeled 1 flips the decision function sign.
  Eigen::MatrixXd x(4, 1);
  x << -1, -2, 1, 2;
  Labels y(4), flipped(4);
  y << 0, 0, 1, 1;
  flipped << 1, 1, 0, 0;
  const auto a = train_linear_margin_classifier(x, y, 0.1);
  const auto b = train_linear_margin_classifier(x, flipped, 0.1);
  CHECK(a.w(0) > 0.0);
  CHECK(b.w(0) < 0.0);
  CHECK(a.w(0) == doctest::Approx(-b.w(0)));
  // Hinge loss with all margins 1 is 0; at w = b = 0 it is 1.
  CHECK(margin_objective(Eigen::VectorXd::Zero(1), 0.0, x, y, 0.1) == doctest::Approx(1.0));
}

TEST_CASE("top feature is the informative one") {
  std::mt19937_64 gen(3);
  const DomainDataset ds = blobs(gen, 200, 4, 1, "inf");
  const MarginClassifier clf = train_linear_margin_classifier(ds.features, ds.y(), 1.0 / 16.0);
  CHECK(rank_features(clf.w).front() == 1);
  CHECK(rank_features(Eigen::Vector3d(0.5, -2.0, 2.0)) == std::vector<Eigen::Index>{1, 2, 0});
}

TEST_CASE("margin classifier input checks") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
  Labels one_class = Labels::Ones(3);
  CHECK_THROWS_AS(train_linear_margin_classifier(x, one_class, 0.1), DataError);
  Labels y(3);
  y << 0, 1, 1;
  CHECK_THROWS(train_linear_margin_classifier(x, y, 0.0));
  const auto clf = train_linear_margin_classifier(x, y, 0.1, 3);
  CHECK(clf.epochs == 3);
  CHECK_FALSE(clf.converged);
}

TEST_CASE("svm regularization grid") {
  const auto grid = default_svm_reg_grid();
  REQUIRE(grid.size() == 9);
  CHECK(grid.front() == 1.0 / 256.0);
  CHECK(grid.back() == 256.0);
  CHECK(grid[4] == 1.0);
}

TEST_CASE("pool size matches the counting formula") {
  CHECK(pool_size_formula(3, 1, 1, 1, 1) == 24);
  RngStream rng(1, 2);
  PoolConfig cfg;
  cfg.n_fs = cfg.n_gs = cfg.n_kernel = 1;
  cfg.svm_max_epochs = 20;
  const PredicatePool one = build_predicate_pool(make_task(1, 3, 1), cfg, rng);
  CHECK(one.specs.size() == 24);
  const auto ones = std::count_if(one.specs.begin(), one.specs.end(),
                                  [](const PredicateSpec& s) { return s.kind == PredicateKind::Ones; });
  CHECK(ones == 1);

  const PredicatePool two = build_predicate_pool(make_task(2, 3, 1), cfg, rng);
  const auto count_source = [](const PredicatePool& p) {
    return std::count_if(p.specs.begin(), p.specs.end(),
                         [](const PredicateSpec& s) { return is_source_kind(s.kind); });
  };
  CHECK(count_source(two) == 2 * count_source(one));
  CHECK(two.specs.size() - count_source(two) == one.specs.size() - count_source(one));

  std::mt19937_64 gen(9);
  for (int t = 0; t < 15; ++t) {
    PoolConfig c;
    c.n_fs = gen() % 4;
    c.n_gs = gen() % 4;
    c.n_kernel = gen() % 4;
    c.svm_max_epochs = 5;
    const std::size_t n = 1 + gen() % 3;
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(gen() % 4);
    const PredicatePool p = build_predicate_pool(make_task(n, d, 100 + t), c, rng);
    CHECK(p.specs.size() == pool_size_formula(static_cast<std::size_t>(d), n, c.n_fs, c.n_gs, c.n_kernel));
  }
}

TEST_CASE("pool entries evaluate to finite vectors and respect structure") {
  RngStream rng(5, 6);
  const TransferTask task = make_task(2, 3, 4);
  const PredicatePool pool = build_predicate_pool(task, PoolConfig{}, rng);
  for (const auto& spec : pool.specs) {
    const Eigen::VectorXd v = evaluate_predicate(spec, task.target_train.features);
    CHECK(v.size() == task.target_train.size());
    CHECK(v.allFinite());
    if (spec.kind == PredicateKind::SourceSign) {
      CHECK((v.array() * (1.0 - v.array())).abs().maxCoeff() == 0.0);
    }
    if (spec.kind == PredicateKind::SourceTopFeature) {
      CHECK(spec.feature_indices[0] == rank_features(spec.classifier->w)[0]);
    }
    if (spec.kind == PredicateKind::SourceFeaturePair) {
      const auto order = rank_features(spec.classifier->w);
      CHECK(spec.feature_indices == std::vector<Eigen::Index>{order[0], order[1]});
    }
  }
  const auto pick = [&](PredicateKind k) {
    return *std::find_if(pool.specs.begin(), pool.specs.end(),
                         [&](const PredicateSpec& s) { return s.kind == k; });
  };
  const Eigen::VectorXd mean = evaluate_predicate(pick(PredicateKind::TargetMean), task.target_train.features);
  const Eigen::VectorXd mean_sq =
      evaluate_predicate(pick(PredicateKind::TargetMeanSquare), task.target_train.features);
  CHECK((mean.array().square() - mean_sq.array()).abs().maxCoeff() == 0.0);

  const auto for_zero = pool.entries_for_source(0);
  for (const auto idx : for_zero) {
    const auto& s = pool.specs[idx];
    CHECK((!is_source_kind(s.kind) || *s.source_index == 0));
  }
}

TEST_CASE("evaluate predicate examples") {
  PredicateSpec ones;
  CHECK(evaluate_predicate(ones, Eigen::MatrixXd::Random(4, 2)) == Eigen::VectorXd::Ones(4));

  Eigen::MatrixXd x(1, 3);
  x << 1, 2, 3;
  PredicateSpec mean;
  mean.kind = PredicateKind::TargetMean;
  CHECK(evaluate_predicate(mean, x)(0) == 2.0);
  mean.kind = PredicateKind::TargetMeanSquare;
  CHECK(evaluate_predicate(mean, x)(0) == 4.0);

  PredicateSpec pair;
  pair.kind = PredicateKind::TargetFeaturePair;
  pair.feature_indices = {1, 2};
  CHECK(evaluate_predicate(pair, x)(0) == 6.0);
  pair.feature_indices = {1, 3};
  CHECK_THROWS_AS(evaluate_predicate(pair, x), DataError);

  PredicateSpec sign;
  sign.kind = PredicateKind::SourceSign;
  sign.source_index = 0;
  MarginClassifier clf;
  clf.w = Eigen::Vector3d::Zero();
  clf.b = -0.3;
  sign.classifier = clf;
  CHECK(evaluate_predicate(sign, x)(0) == 0.0);
  sign.kind = PredicateKind::SourceDecision;
  CHECK(evaluate_predicate(sign, x)(0) == doctest::Approx(-0.3));
  sign.source_index.reset();
  CHECK_THROWS_AS(evaluate_predicate(sign, x), DataError);

  PredicateSpec ks;
  ks.kind = PredicateKind::SourceKernelSum;
  ks.source_index = 0;
  ks.kernel_sum = KernelSum{Eigen::MatrixXd::Zero(2, 3), 1.0};
  Eigen::MatrixXd origin = Eigen::MatrixXd::Zero(1, 3);
  CHECK(evaluate_predicate(ks, origin)(0) == doctest::Approx(2.0));
  ks.kernel_sum.reset();
  CHECK_THROWS_AS(evaluate_predicate(ks, origin), DataError);
}

TEST_CASE("single-class source keeps only kernel predicates") {
  TransferTask task = make_task(2, 2, 8);
  task.sources[1].labels->setZero();
  RngStream rng(1, 1);
  PoolConfig cfg;
  cfg.svm_max_epochs = 10;
  const PredicatePool pool = build_predicate_pool(task, cfg, rng);
  REQUIRE(pool.warnings.size() == 1);
  for (const auto& s : pool.specs) {
    if (s.source_index == 1u) CHECK(s.kind == PredicateKind::SourceKernelSum);
  }
}

TEST_CASE("instantiation refits source entries on the sample") {
  const TransferTask task = make_task(1, 2, 12);
  RngStream rng(3, 4);
  PoolConfig cfg;
  cfg.kernel_sigma_grid = {0.25};
  const PredicatePool pool = build_predicate_pool(task, cfg, rng);
  DomainDataset half = task.sources[0];
  std::vector<Eigen::Index> rows{0, 1, 2, 3, 4, 5};
  half = half.subset(rows);
  for (const auto& entry : pool.specs) {
    const PredicateSpec inst = instantiate_predicate(entry, half, cfg, rng);
    CHECK(inst.kind == entry.kind);
    if (entry.kind == PredicateKind::SourceKernelSum) {
      CHECK(inst.kernel_sum->centers == half.features);
      CHECK(inst.kernel_sum->sigma == 0.25);
    } else if (!is_source_kind(entry.kind)) {
      CHECK(inst.feature_indices == entry.feature_indices);
    } else {
      CHECK(inst.classifier.has_value());
    }
  }
}

}  // TEST_SUITE
