#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "setrlusi/datasets.hpp"
#include "setrlusi/errors.hpp"

using namespace setrlusi;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("setrlusi_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_text(const fs::path& dir, const std::string& file, const std::string& body) {
  const fs::path p = dir / file;
  std::ofstream(p) << body;
  return p;
}

// Well separated blobs in 3-D with alternating labels inside each blob.
DomainDataset three_blobs(const std::vector<Eigen::Index>& sizes, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 0.5);
  const Eigen::Index n = std::accumulate(sizes.begin(), sizes.end(), Eigen::Index{0});
  DomainDataset ds;
  ds.name = "rice";
  ds.features.resize(n, 4);
  ds.labels = Labels(n);
  Eigen::Index row = 0;
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    for (Eigen::Index i = 0; i < sizes[b]; ++i, ++row) {
      for (Eigen::Index c = 0; c < 3; ++c) ds.features(row, c) = noise(gen) + (c == static_cast<Eigen::Index>(b) ? 20.0 : 0.0);
      ds.features(row, 3) = noise(gen);
      (*ds.labels)(row) = static_cast<double>(i % 2);
    }
  }
  return ds;
}

Eigen::Vector2d class_mean(const DomainDataset& d, double cls) {
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  double n = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d.y()(i) == cls) {
      sum += d.features.row(i).transpose();
      n += 1;
    }
  }
  return sum / n;
}

double class_cov_trace(const DomainDataset& d, double cls) {
  const Eigen::Vector2d m = class_mean(d, cls);
  double acc = 0.0, n = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d.y()(i) == cls) {
      acc += (d.features.row(i).transpose() - m).squaredNorm();
      n += 1;
    }
  }
  return acc / (n - 1.0);
}

}  // namespace

TEST_SUITE("datasets") {

TEST_CASE("csv load basics") {
  const fs::path dir = scratch_dir("csv");
  const fs::path p = write_text(dir, "a.csv", "x1,x2,label\n1,2,0\n3,4,1\n5,6,1\n");
  const DomainDataset ds = load_csv_dataset(p, CsvSchema{});
  CHECK(ds.size() == 3);
  CHECK(ds.dim() == 2);
  CHECK(ds.features(2, 1) == 6.0);
  CHECK(ds.y()(0) == 0.0);
  CHECK(ds.y()(2) == 1.0);

  CsvSchema only_x2;
  only_x2.feature_columns = {"x2"};
  CHECK(load_csv_dataset(p, only_x2).dim() == 1);

  const fs::path named = write_text(dir, "b.csv", "\xEF\xBB\xBF" "f,\"cls\"\n1,yes\n2,no\n3,yes\n");
  CsvSchema s;
  s.label_column = "cls";
  const DomainDataset sorted = load_csv_dataset(named, s);
  CHECK(sorted.y()(0) == 1.0);  // "no" < "yes"
  s.positive_label = "no";
  CHECK(load_csv_dataset(named, s).y()(0) == 0.0);
}

TEST_CASE("csv load errors") {
  const fs::path dir = scratch_dir("csv_err");
  CHECK_THROWS_AS(load_csv_dataset(dir / "missing.csv", CsvSchema{}), IoError);

  const fs::path three = write_text(dir, "three.csv", "x,label\n1,a\n2,b\n3,c\n");
  try {
    load_csv_dataset(three, CsvSchema{});
    FAIL("expected rejection");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("'a'") != std::string::npos);
    CHECK(msg.find("'c'") != std::string::npos);
  }

  const fs::path empty_cell = write_text(dir, "empty.csv", "x,y,label\n1,2,0\n3,,1\n");
  try {
    load_csv_dataset(empty_cell, CsvSchema{});
    FAIL("expected rejection");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("'y'") != std::string::npos);
  }

  const fs::path text = write_text(dir, "text.csv", "x,label\nabc,0\n");
  CHECK_THROWS_AS(load_csv_dataset(text, CsvSchema{}), DataError);
  const fs::path nan = write_text(dir, "nan.csv", "x,label\nnan,0\n");
  CHECK_THROWS_AS(load_csv_dataset(nan, CsvSchema{}), DataError);
  const fs::path short_row = write_text(dir, "short.csv", "x,y,label\n1,0\n");
  CHECK_THROWS_AS(load_csv_dataset(short_row, CsvSchema{}), DataError);
  const fs::path no_label = write_text(dir, "nolabel.csv", "x,y\n1,0\n");
  CHECK_THROWS_AS(load_csv_dataset(no_label, CsvSchema{}), DataError);
}

TEST_CASE("csv write then load round-trips") {
  const fs::path dir = scratch_dir("csv_rt");
  SyntheticSpec spec = twelve_domain_spec(20, 3);
  const DomainDataset d = gen_synthetic_domains(spec)[5];
  write_csv_dataset(d, dir / "d.csv");
  const DomainDataset back = load_csv_dataset(dir / "d.csv", CsvSchema{});
  CHECK(back.features == d.features);
  CHECK(back.y() == d.y());
}

TEST_CASE("k-means") {
  const DomainDataset blobs = three_blobs({50, 40, 30}, 1);
  const std::vector<Eigen::Index> cols{0, 1, 2};
  const Eigen::VectorXi a = kmeans_cluster(blobs, cols, 3, 5);
  CHECK(a == kmeans_cluster(blobs, cols, 3, 5));
  // Every blob maps to a single, distinct cluster.
  std::set<int> seen;
  Eigen::Index start = 0;
  for (const Eigen::Index size : {50, 40, 30}) {
    for (Eigen::Index i = start; i < start + size; ++i) CHECK(a(i) == a(start));
    seen.insert(a(start));
    start += size;
  }
  CHECK(seen.size() == 3);

  const Eigen::VectorXi one = kmeans_cluster(blobs, cols, 1, 0);
  CHECK(one.maxCoeff() == 0);

  CHECK_THROWS_AS(kmeans_cluster(blobs, cols, 121, 0), DataError);
  const std::vector<Eigen::Index> bad{7};
  CHECK_THROWS_AS(kmeans_cluster(blobs, bad, 2, 0), DataError);
}

TEST_CASE("k-means separates two distant blobs on the selected column only") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> n(0.0, 1.0);
  DomainDataset ds;
  ds.features.resize(100, 2);
  for (Eigen::Index i = 0; i < 100; ++i) {
    ds.features(i, 0) = n(gen) + (i < 50 ? 0.0 : 10.0);
    ds.features(i, 1) = 100.0 * n(gen);  // ignored
  }
  const std::vector<Eigen::Index> col{0};
  const Eigen::VectorXi a = kmeans_cluster(ds, col, 2, 3);
  for (Eigen::Index i = 0; i < 100; ++i) CHECK(a(i) == (i < 50 ? a(0) : a(99)));
  CHECK(a(0) != a(99));
}

TEST_CASE("cluster split with a target override gives the Rice domain sizes") {
  const DomainDataset rice = three_blobs({1472, 1134, 1204}, 7);
  const std::vector<Eigen::Index> cols{0, 1, 2};
  const Eigen::VectorXi a = kmeans_cluster(rice, cols, 3, 11);
  // Rows 1472 + 1134 onwards form the third blob.
  const int third = a(1472 + 1134);
  const DomainPartition part = make_transfer_task(rice, a, third);
  REQUIRE(part.sources.size() == 2);
  CHECK(part.sources[0].size() == 1472);
  CHECK(part.sources[1].size() == 1134);
  CHECK(part.target.size() == 1204);

  // Default rule: decreasing size, smallest cluster is the target.
  const DomainPartition by_size = make_transfer_task(rice, a);
  CHECK(by_size.sources[0].size() == 1472);
  CHECK(by_size.sources[1].size() == 1204);
  CHECK(by_size.target.size() == 1134);
}

TEST_CASE("cluster split edge cases") {
  DomainDataset blobs = three_blobs({20, 20, 20, 20}, 3);
  Eigen::VectorXi a(80);
  for (Eigen::Index i = 0; i < 80; ++i) a(i) = static_cast<int>(i / 20);
  CHECK(make_transfer_task(blobs, a).sources.size() == 3);

  // A single-class source cluster is kept with a warning.
  for (Eigen::Index i = 0; i < 20; ++i) (*blobs.labels)(i) = 1.0;
  const DomainPartition p = make_transfer_task(blobs, a, 3);
  CHECK(p.sources.size() == 3);
  CHECK(p.warnings.size() == 1);
  // A single-class target is rejected.
  CHECK_THROWS_AS(make_transfer_task(blobs, a, 0), DataError);
  CHECK_THROWS_AS(make_transfer_task(blobs, a, 9), DataError);
  CHECK_THROWS_AS(make_transfer_task(blobs, Eigen::VectorXi::Zero(80)), DataError);
}

TEST_CASE("synthetic generator geometry") {
  SyntheticSpec base = make_synthetic_spec(1, {0.0}, {Eigen::Vector2d::Zero()}, {1.0}, 4000, 5);
  const DomainDataset d0 = gen_synthetic_domains(base)[0];
  CHECK(d0.size() == 4000);
  CHECK(d0.class_counts() == std::make_pair(Eigen::Index{2000}, Eigen::Index{2000}));
  // Baseline class means at (-offset, 0) and (+offset, 0).
  const double se = 0.6 / std::sqrt(2000.0);
  CHECK(std::abs(class_mean(d0, 0.0)(0) + 1.0) < 4 * se);
  CHECK(std::abs(class_mean(d0, 1.0)(0) - 1.0) < 4 * se);
  CHECK(std::abs(class_mean(d0, 1.0)(1)) < 4 * se);

  SyntheticSpec mirrored = make_synthetic_spec(2, {30.0, -30.0}, {Eigen::Vector2d::Zero()}, {1.0}, 2000, 8);
  const auto m = gen_synthetic_domains(mirrored);
  const double se2 = 0.6 / std::sqrt(1000.0) * std::sqrt(2.0);
  for (const double cls : {0.0, 1.0}) {
    const Eigen::Vector2d a = class_mean(m[0], cls);
    const Eigen::Vector2d b = class_mean(m[1], cls);
    CHECK(std::abs(a(0) - b(0)) < 3 * se2);
    CHECK(std::abs(a(1) + b(1)) < 3 * se2);
  }

  SyntheticSpec wide = make_synthetic_spec(2, {0.0}, {Eigen::Vector2d::Zero()}, {1.0, 2.0}, 2000, 9);
  const auto w = gen_synthetic_domains(wide);
  const double ratio = class_cov_trace(w[1], 0.0) / class_cov_trace(w[0], 0.0);
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.2));

  SyntheticSpec bad = base;
  bad.domains[0].compactness = 0.0;
  CHECK_THROWS_AS(gen_synthetic_domains(bad), DataError);
  CHECK_THROWS_AS(make_synthetic_spec(0, {0.0}, {Eigen::Vector2d::Zero()}, {1.0}, 10, 1), DataError);
}

TEST_CASE("twelve domain grid") {
  const SyntheticSpec spec = twelve_domain_spec(30, 1);
  REQUIRE(spec.domains.size() == 12);
  std::set<double> angles;
  std::set<std::pair<double, double>> centers;
  for (const auto& d : spec.domains) {
    angles.insert(d.angle_degrees);
    centers.insert({d.center(0), d.center(1)});
  }
  CHECK(angles.size() == 4);
  CHECK(centers.size() == 3);
  const auto a = gen_synthetic_domains(spec);
  const auto b = gen_synthetic_domains(spec);
  CHECK(a[11].features == b[11].features);
}

TEST_CASE("stratified split") {
  SyntheticSpec spec = make_synthetic_spec(1, {0.0}, {Eigen::Vector2d::Zero()}, {1.0}, 100, 1);
  const DomainDataset d = gen_synthetic_domains(spec)[0];
  auto [train, test] = split_labeled_target(d, 0.1, 4);
  CHECK(train.size() == 10);
  CHECK(test.size() == 90);
  CHECK(train.class_counts() == std::make_pair(Eigen::Index{5}, Eigen::Index{5}));
  auto [train2, test2] = split_labeled_target(d, 0.1, 4);
  CHECK(train2.features == train.features);
  CHECK(test2.features == test.features);
  for (const double f : {0.7, 0.5, 0.3}) {
    auto [tr, te] = split_labeled_target(d, f, 1);
    CHECK(tr.size() + te.size() == 100);
    CHECK(std::abs(static_cast<double>(tr.class_counts().first) - f * 50.0) <= 1.0);
    CHECK(std::abs(static_cast<double>(tr.class_counts().second) - f * 50.0) <= 1.0);
  }
  CHECK_THROWS_AS(split_labeled_target(d, 1.0, 1), DataError);
  CHECK_THROWS_AS(split_labeled_target(d, 0.01, 1), DataError);
}

TEST_CASE("min-max scaling is fitted on the target training set") {
  Eigen::MatrixXd a(3, 2);
  a << 0, 5, 2, 5, 4, 5;
  const MinMaxScaler s = MinMaxScaler::fit(a);
  const Eigen::MatrixXd t = s.transform(a);
  CHECK(t(0, 0) == 0.0);
  CHECK(t(2, 0) == 1.0);
  CHECK(t(1, 1) == 0.0);  // constant column
  Eigen::MatrixXd outside(1, 2);
  outside << 8, 6;
  CHECK(s.transform(outside)(0, 0) == 2.0);

  SyntheticSpec spec = twelve_domain_spec(40, 2);
  const auto domains = gen_synthetic_domains(spec);
  TransferTask task;
  task.sources = {domains[1]};
  auto [train, test] = split_labeled_target(domains[0], 0.25, 1);
  task.target_train = train;
  task.target_test = test;
  const TransferTask scaled = scale_task(task, ScalingMode::minmax);
  CHECK(scaled.target_train.features.minCoeff() == 0.0);
  CHECK(scaled.target_train.features.maxCoeff() == 1.0);
  CHECK(scale_task(task, ScalingMode::none).sources[0].features == task.sources[0].features);
}

}  // TEST_SUITE
