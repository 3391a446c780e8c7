#include <doctest.h>

#include <random>

#include "setrlusi/datasets.hpp"
#include "setrlusi/ensemble.hpp"
#include "setrlusi/serialize.hpp"

using namespace setrlusi;

namespace {

// A learner whose clamped output is the constant c everywhere.
WeakLearner constant_learner(double c, double epsilon, Eigen::Index d = 1) {
  WeakLearner l;
  l.centers = Eigen::MatrixXd::Zero(1, d);
  l.coefficients = Eigen::VectorXd::Zero(1);
  l.intercept = c;
  l.kernel.sigma = 1.0;
  l.kernel.sigma_rule = SigmaRule::fixed;
  l.epsilon = epsilon;
  l.beta = learner_weight(epsilon);
  return l;
}

TransferTask small_task(std::uint64_t seed, std::size_t n_sources = 2) {
  SyntheticSpec spec = twelve_domain_spec(60, seed);
  const auto domains = gen_synthetic_domains(spec);
  TransferTask task;
  task.name = "small";
  for (std::size_t i = 0; i < n_sources; ++i) task.sources.push_back(domains[1 + i]);
  auto [train, test] = split_labeled_target(domains[0], 0.2, seed);
  task.target_train = std::move(train);
  task.target_test = std::move(test);
  return scale_task(task, ScalingMode::minmax);
}

TrainConfig quick_config(int rounds) {
  TrainConfig tc;
  tc.rounds = rounds;
  tc.pool.svm_max_epochs = 30;
  tc.master_seed = 99;
  return tc;
}

}  // namespace

TEST_SUITE("ensemble") {

TEST_CASE("error clamping and weights") {
  CHECK(clamp_error(0.0) == 0.001);
  CHECK(clamp_error(0.6) == 0.499);
  CHECK(clamp_error(0.25) == 0.25);
  CHECK(learner_weight(0.25) == 2.0 / 3.0);
  for (const double e : {0.001, 0.1, 0.3, 0.499}) {
    CHECK(std::abs(learner_weight(e) - (1.0 - e / (1.0 - e))) <= 1e-12);
    CHECK(learner_weight(e) > 0.0);
    CHECK(learner_weight(e) <= 1.0);
  }
}

TEST_CASE("weak error on a labeled set") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 1);
  Labels y(4);
  y << 1, 1, 1, 0;
  CHECK(raw_weak_error(constant_learner(0.7, 0.1), x, y) == 0.25);
  CHECK(weak_error(constant_learner(0.7, 0.1), x, y) == 0.25);
  y << 1, 1, 1, 1;
  CHECK(weak_error(constant_learner(0.7, 0.1), x, y) == 0.001);
  // f = 0.5 is class 1.
  CHECK(raw_weak_error(constant_learner(0.5, 0.1), x, y) == 0.0);
  y << 0, 0, 0, 1;
  CHECK(raw_weak_error(constant_learner(0.9, 0.1), x, y) == 0.75);
  CHECK(weak_error(constant_learner(0.9, 0.1), x, y) == 0.499);
}

TEST_CASE("candidate selection takes the minimum error") {
  const std::vector<double> errors{0.3, 0.1, 0.4};
  CHECK(select_min_error(errors) == 1u);
  const std::vector<double> ties{0.2, 0.2, 0.3};
  CHECK(select_min_error(ties) == 0u);
  const double nan = std::nan("");
  const std::vector<double> failed{nan, 0.4, nan};
  CHECK(select_min_error(failed) == 1u);
  const std::vector<double> none{nan, nan};
  CHECK_FALSE(select_min_error(none).has_value());
}

TEST_CASE("ensemble prediction is the weighted mean") {
  Ensemble e;
  e.add(constant_learner(0.8, 0.2));
  e.add(constant_learner(0.4, 0.2));
  CHECK(e.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
  const EnsemblePrediction p = ensemble_predict(e, Eigen::MatrixXd::Zero(3, 1));
  CHECK(p.probability(0) == doctest::Approx(0.6));
  CHECK(p.classes(0) == 1);

  Ensemble single;
  single.add(constant_learner(0.3, 0.1));
  CHECK(ensemble_predict(single, Eigen::MatrixXd::Zero(1, 1)).classes(0) == 0);

  CHECK_THROWS_AS(ensemble_predict(Ensemble{}, Eigen::MatrixXd::Zero(1, 1)), DataError);
  WeakLearner bad = constant_learner(0.5, 0.6);
  CHECK_THROWS_AS(e.add(bad), DataError);
  CHECK_THROWS_AS(e.add(constant_learner(0.5, 0.2, 2)), DimensionError);
}

TEST_CASE("weighted ensemble error never exceeds the weighted individual errors") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const int h = 1 + t % 12;
    Ensemble e;
    std::vector<double> f;
    for (int k = 0; k < h; ++k) {
      const double out = u(gen);
      f.push_back(out);
      e.add(constant_learner(out, 0.001 + 0.497 * u(gen)));
    }
    const Eigen::VectorXd w = e.weights();
    const double target = u(gen);
    const double s = ensemble_predict(e, Eigen::MatrixXd::Zero(1, 1)).probability(0);
    double individual = 0.0;
    for (int k = 0; k < h; ++k) individual += w(k) * (f[static_cast<std::size_t>(k)] - target) * (f[static_cast<std::size_t>(k)] - target);
    CHECK((s - target) * (s - target) <= individual + 1e-12);
  }
}

TEST_CASE("training produces a consistent ensemble and trace") {
  const TransferTask task = small_task(3);
  RngStream rng(1, 1);
  TrainConfig tc = quick_config(15);
  const PredicatePool pool = build_predicate_pool(task, tc.pool, rng);
  const TrainResult r = train_setrlusi(task, pool, tc);
  CHECK(r.trace.size() + r.skipped.size() == 15);
  CHECK(r.trace.size() == r.ensemble.size());
  CHECK(r.ensemble.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
  const double ssq = r.ensemble.sum_squared_weights();
  CHECK(ssq >= 1.0 / static_cast<double>(r.ensemble.size()) - 1e-15);
  CHECK(ssq < 1.0);
  for (std::size_t h = 0; h < r.trace.size(); ++h) {
    const auto& rec = r.trace[h];
    CHECK(rec.epsilon >= kMinError);
    CHECK(rec.epsilon <= kMaxError);
    CHECK(rec.selected_source < task.sources.size());
    CHECK(rec.test_error >= 0.0);
    CHECK(rec.test_error <= 1.0);
    CHECK(rec.epsilon == r.ensemble.learners()[h].epsilon);
  }
  // The last trace entry is the full ensemble's test error.
  const EnsemblePrediction p = ensemble_predict(r.ensemble, task.target_test.features);
  double wrong = 0;
  for (Eigen::Index k = 0; k < p.classes.size(); ++k) wrong += p.classes(k) != task.target_test.y()(k);
  CHECK(r.trace.back().test_error == doctest::Approx(wrong / p.classes.size()));
}

TEST_CASE("training is reproducible for a fixed seed") {
  const TransferTask task = small_task(4);
  TrainConfig tc = quick_config(8);
  RngStream r1(7, 7), r2(7, 7);
  const PredicatePool p1 = build_predicate_pool(task, tc.pool, r1);
  const PredicatePool p2 = build_predicate_pool(task, tc.pool, r2);
  const TrainResult a = train_setrlusi(task, p1, tc);
  const TrainResult b = train_setrlusi(task, p2, tc);
  CHECK(serialize_ensemble(a.ensemble) == serialize_ensemble(b.ensemble));
  tc.master_seed += 1;
  const TrainResult c = train_setrlusi(task, p1, tc);
  CHECK(serialize_ensemble(a.ensemble) != serialize_ensemble(c.ensemble));
  tc.master_seed -= 1;
  tc.trial = 1;
  const TrainResult d = train_setrlusi(task, p1, tc);
  CHECK(serialize_ensemble(a.ensemble) != serialize_ensemble(d.ensemble));
}

TEST_CASE("zero-tau training runs without invariants") {
  const TransferTask task = small_task(5);
  TrainConfig tc = quick_config(5);
  tc.params.tau = 0.0;
  RngStream rng(2, 2);
  const TrainResult r = train_setrlusi(task, build_predicate_pool(task, tc.pool, rng), tc);
  CHECK(r.ensemble.size() == 5);
}

TEST_CASE("rounds without viable candidates are skipped, all-failed training throws") {
  TransferTask task = small_task(6, 1);
  TrainConfig tc = quick_config(3);
  // A pool holding only a target feature that is identically zero on the
  // target makes every candidate fail.
  task.target_train.features.col(0).setZero();
  task.target_test.features.col(0).setZero();
  PredicatePool pool;
  PredicateSpec zero;
  zero.kind = PredicateKind::TargetFeature;
  zero.feature_indices = {0};
  pool.specs.push_back(zero);
  CHECK_THROWS_AS(train_setrlusi(task, pool, tc), TrainingError);

  // Mixing in the ones predicate lets some rounds succeed.
  PredicateSpec ones;
  pool.specs.push_back(ones);
  tc.rounds = 30;
  const TrainResult r = train_setrlusi(task, pool, tc);
  CHECK(r.skipped.size() > 0);
  CHECK(r.trace.size() > 0);
  CHECK(r.trace.size() + r.skipped.size() == 30);
  for (const auto& s : r.skipped) CHECK(s.reason.find("no viable candidate") != std::string::npos);
}

TEST_CASE("training validates its inputs") {
  const TransferTask task = small_task(7);
  TrainConfig tc = quick_config(0);
  PredicatePool pool;
  pool.specs.emplace_back();
  CHECK_THROWS_AS(train_setrlusi(task, pool, tc), ConfigError);
  tc.rounds = 2;
  tc.gamma = 0.0;
  CHECK_THROWS_AS(train_setrlusi(task, pool, tc), ConfigError);
  tc.gamma = 0.5;
  CHECK_THROWS_AS(train_setrlusi(task, PredicatePool{}, tc), DataError);
}

TEST_CASE("ensemble serialization round-trips exactly") {
  const TransferTask task = small_task(8);
  TrainConfig tc = quick_config(4);
  RngStream rng(3, 3);
  const TrainResult r = train_setrlusi(task, build_predicate_pool(task, tc.pool, rng), tc);
  const std::string text = serialize_ensemble(r.ensemble);
  const Ensemble back = deserialize_ensemble(text);
  CHECK(serialize_ensemble(back) == text);
  const auto p1 = ensemble_predict(r.ensemble, task.target_test.features);
  const auto p2 = ensemble_predict(back, task.target_test.features);
  CHECK(p1.probability == p2.probability);
  CHECK_THROWS(deserialize_ensemble("{\"format\":\"other\"}"));
  CHECK_THROWS(deserialize_ensemble("not json"));
}

}  // TEST_SUITE
