#include "setrlusi/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "setrlusi/errors.hpp"
#include "setrlusi/sampling.hpp"
#include "text_util.hpp"

namespace setrlusi {

namespace {

using text::parse_double;
using text::split_record;
using text::trim;

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += "'" + s + "'";
  }
  return out;
}

}  // namespace

DomainDataset load_csv_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV '" + path.string() + "' has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_record(line);

  const auto column_of = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError("CSV '" + path.string() + "' has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label_col = column_of(schema.label_column);
  std::vector<std::size_t> feature_cols;
  if (schema.feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != label_col) feature_cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.feature_columns) feature_cols.push_back(column_of(name));
  }
  if (feature_cols.empty()) throw DataError("CSV '" + path.string() + "' has no feature columns");

  std::vector<std::vector<double>> rows;
  std::vector<std::string> tokens;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_record(line);
    if (fields.size() != header.size()) {
      throw DataError("CSV '" + path.string() + "' row " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    std::vector<double> values;
    for (const auto c : feature_cols) {
      double v = 0.0;
      if (fields[c].empty()) {
        throw DataError("CSV '" + path.string() + "' row " + std::to_string(line_no) +
                        " column '" + header[c] + "' is empty");
      }
      if (!parse_double(fields[c], v) || !std::isfinite(v)) {
        throw DataError("CSV '" + path.string() + "' row " + std::to_string(line_no) +
                        " column '" + header[c] + "' is not numeric: '" + fields[c] + "'");
      }
      values.push_back(v);
    }
    if (fields[label_col].empty()) {
      throw DataError("CSV '" + path.string() + "' row " + std::to_string(line_no) +
                      " column '" + header[label_col] + "' is empty");
    }
    rows.push_back(std::move(values));
    tokens.push_back(fields[label_col]);
  }
  if (rows.empty()) throw DataError("CSV '" + path.string() + "' has no data rows");

  const std::set<std::string> distinct(tokens.begin(), tokens.end());
  if (distinct.size() > 2) {
    throw DataError("CSV '" + path.string() + "' label column '" + schema.label_column +
                    "' has more than two values: " +
                    join(std::vector<std::string>(distinct.begin(), distinct.end())));
  }
  std::map<std::string, double> mapping;
  if (schema.positive_label) {
    for (const auto& t : distinct) mapping[t] = t == *schema.positive_label ? 1.0 : 0.0;
  } else if (std::all_of(distinct.begin(), distinct.end(),
                         [](const std::string& t) { return t == "0" || t == "1"; })) {
    for (const auto& t : distinct) mapping[t] = t == "1" ? 1.0 : 0.0;
  } else {
    double next = 0.0;
    for (const auto& t : distinct) mapping[t] = next++;
  }

  DomainDataset out;
  out.name = path.stem().string();
  out.features.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(feature_cols.size()));
  out.labels = Labels(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < feature_cols.size(); ++c) {
      out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    (*out.labels)(static_cast<Eigen::Index>(r)) = mapping.at(tokens[r]);
  }
  return out;
}

void write_csv_dataset(const DomainDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CSV file '" + path.string() + "'");
  for (Eigen::Index c = 0; c < data.dim(); ++c) out << (c ? "," : "") << "x" << c + 1;
  if (data.labeled()) out << ",label";
  out << '\n';
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (Eigen::Index c = 0; c < data.dim(); ++c) {
      out << (c ? "," : "") << text::format_double(data.features(r, c));
    }
    if (data.labeled()) out << ',' << static_cast<int>((*data.labels)(r));
    out << '\n';
  }
  if (!out) throw IoError("failed writing CSV file '" + path.string() + "'");
}

Eigen::VectorXi kmeans_cluster(const DomainDataset& data,
                               std::span<const Eigen::Index> feature_subset, int k,
                               std::uint64_t seed) {
  const Eigen::Index n = data.size();
  if (k < 1) throw DataError("k-means: k must be >= 1");
  if (k > n) {
    throw DataError("k-means: k=" + std::to_string(k) + " exceeds " + std::to_string(n) + " rows");
  }
  if (feature_subset.empty()) throw DataError("k-means: empty feature subset");
  for (const auto c : feature_subset) {
    if (c < 0 || c >= data.dim()) {
      throw DataError("k-means: feature index " + std::to_string(c) + " out of range");
    }
  }
  const auto dims = static_cast<Eigen::Index>(feature_subset.size());
  Eigen::MatrixXd x(n, dims);
  for (Eigen::Index j = 0; j < dims; ++j) {
    x.col(j) = data.features.col(feature_subset[static_cast<std::size_t>(j)]);
  }
  if (!x.allFinite()) throw DataError("k-means: non-finite features");

  RngStream rng(seed, make_stream_id({0x6B6D65616E73ULL}));
  const auto sq_dist_to = [&](const Eigen::MatrixXd& centroids, Eigen::Index upto) {
    Eigen::VectorXd best = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    for (Eigen::Index c = 0; c < upto; ++c) {
      best = best.cwiseMin((x.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }
    return best;
  };

  // k-means++ seeding.
  Eigen::MatrixXd centroids(k, dims);
  centroids.row(0) = x.row(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  for (int c = 1; c < k; ++c) {
    const Eigen::VectorXd d2 = sq_dist_to(centroids, c);
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = rng.uniform01() * total;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        u -= d2(i);
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = x.row(pick);
  }

  Eigen::VectorXi assignment = Eigen::VectorXi::Zero(n);
  for (int iter = 0; iter < kKMeansMaxIterations; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index arg = 0;
      (centroids.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&arg);
      assignment(i) = static_cast<int>(arg);
    }
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, dims);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(assignment(i)) += x.row(i);
      ++counts(assignment(i));
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0) {
        next.row(c) /= counts(c);
      } else {
        // Empty cluster: move it to the point farthest from its centroid.
        Eigen::Index far = 0;
        sq_dist_to(centroids, k).maxCoeff(&far);
        next.row(c) = x.row(far);
      }
    }
    const double shift = (next - centroids).rowwise().norm().maxCoeff();
    centroids = next;
    if (shift < kKMeansTolerance) break;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index arg = 0;
    (centroids.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&arg);
    assignment(i) = static_cast<int>(arg);
  }
  return assignment;
}

DomainPartition make_transfer_task(const DomainDataset& data, const Eigen::VectorXi& assignment,
                                   std::optional<int> target_cluster) {
  if (assignment.size() != data.size()) {
    throw DimensionError("make_transfer_task: assignment length differs from row count");
  }
  std::map<int, IndexList> members;
  for (Eigen::Index i = 0; i < assignment.size(); ++i) members[assignment(i)].push_back(i);
  if (members.size() < 2) throw DataError("make_transfer_task: need at least 2 clusters");
  if (target_cluster && !members.contains(*target_cluster)) {
    throw DataError("make_transfer_task: target cluster " + std::to_string(*target_cluster) +
                    " is empty or does not exist");
  }

  std::vector<int> order;
  for (const auto& [id, rows] : members) order.push_back(id);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return members[a].size() > members[b].size();
  });
  const int target_id = target_cluster.value_or(order.back());
  std::erase(order, target_id);

  DomainPartition out;
  const auto make = [&](int id, const std::string& name) {
    DomainDataset d = data.subset(members[id]);
    d.name = name;
    return d;
  };
  out.target = make(target_id, data.name + "/T(cluster " + std::to_string(target_id) + ")");
  if (!out.target.has_both_classes()) {
    throw DataError("make_transfer_task: target cluster " + std::to_string(target_id) +
                    " has a single class");
  }
  for (std::size_t s = 0; s < order.size(); ++s) {
    DomainDataset src = make(order[s], data.name + "/S" + std::to_string(s + 1) + "(cluster " +
                                           std::to_string(order[s]) + ")");
    if (!src.has_both_classes()) {
      out.warnings.push_back("source '" + src.name +
                             "' has a single class; its margin-classifier predicates are disabled");
    }
    out.sources.push_back(std::move(src));
  }
  return out;
}

SyntheticSpec make_synthetic_spec(std::size_t n_domains, const std::vector<double>& angles_degrees,
                                  const std::vector<Eigen::Vector2d>& centers,
                                  const std::vector<double>& compactness,
                                  Eigen::Index n_per_domain, std::uint64_t seed) {
  if (n_domains < 1) throw DataError("synthetic: n_domains must be >= 1");
  const auto pick = [&](const auto& list, std::size_t i, const char* what) {
    if (list.size() == 1) return list[0];
    if (list.size() != n_domains) {
      throw DataError(std::string("synthetic: ") + what + " needs 1 or " +
                      std::to_string(n_domains) + " entries");
    }
    return list[i];
  };
  SyntheticSpec spec;
  spec.n_per_domain = n_per_domain;
  spec.seed = seed;
  for (std::size_t i = 0; i < n_domains; ++i) {
    spec.domains.push_back({pick(angles_degrees, i, "rotation_angles"), pick(centers, i, "centers"),
                            pick(compactness, i, "compactness")});
  }
  return spec;
}

SyntheticSpec twelve_domain_spec(Eigen::Index n_per_domain, std::uint64_t seed) {
  const std::vector<double> angles{0.0, 20.0, 40.0, 60.0};
  const std::vector<Eigen::Vector2d> centers{{0.0, 0.0}, {1.5, 0.0}, {0.0, 1.5}};
  const std::vector<double> compactness{1.0, 0.85, 1.15};
  SyntheticSpec spec;
  spec.n_per_domain = n_per_domain;
  spec.seed = seed;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (const double a : angles) spec.domains.push_back({a, centers[c], compactness[c]});
  }
  return spec;
}

std::vector<DomainDataset> gen_synthetic_domains(const SyntheticSpec& spec) {
  if (spec.domains.empty()) throw DataError("synthetic: n_domains must be >= 1");
  if (spec.n_per_domain < 2) throw DataError("synthetic: n_per_domain must be >= 2");
  std::vector<DomainDataset> out;
  for (std::size_t i = 0; i < spec.domains.size(); ++i) {
    const SyntheticDomain& dom = spec.domains[i];
    if (!(dom.compactness > 0.0)) {
      throw DataError("synthetic: compactness must be positive, got " +
                      std::to_string(dom.compactness));
    }
    const double theta = dom.angle_degrees * std::numbers::pi / 180.0;
    Eigen::Matrix2d rot;
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);

    RngStream rng(spec.seed, make_stream_id({0x73796E74ULL, i}));
    DomainDataset d;
    d.name = "domain" + std::to_string(i + 1);
    d.features.resize(spec.n_per_domain, 2);
    d.labels = Labels(spec.n_per_domain);
    const Eigen::Index n0 = spec.n_per_domain / 2;
    for (Eigen::Index r = 0; r < spec.n_per_domain; ++r) {
      const double cls = r < n0 ? 0.0 : 1.0;
      Eigen::Vector2d local{cls == 0.0 ? -spec.class_offset : spec.class_offset, 0.0};
      local(0) += dom.compactness * spec.base_std(0) * rng.normal();
      local(1) += dom.compactness * spec.base_std(1) * rng.normal();
      d.features.row(r) = (dom.center + rot * local).transpose();
      (*d.labels)(r) = cls;
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::pair<DomainDataset, DomainDataset> split_labeled_target(const DomainDataset& target,
                                                             double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw DataError("split: fraction must lie strictly between 0 and 1, got " +
                    std::to_string(fraction));
  }
  const Labels& y = target.y();
  RngStream rng(seed, make_stream_id({0x73706C6974ULL}));
  IndexList train;
  IndexList test;
  for (const double cls : {0.0, 1.0}) {
    IndexList members;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y(i) == cls) members.push_back(i);
    }
    const auto n = static_cast<Eigen::Index>(members.size());
    const auto keep = static_cast<Eigen::Index>(std::llround(fraction * static_cast<double>(n)));
    if (keep < 2 || n - keep < 2) {
      throw DataError("split: fraction " + std::to_string(fraction) + " leaves " +
                      std::to_string(keep) + " train / " + std::to_string(n - keep) +
                      " test rows of class " + std::to_string(static_cast<int>(cls)) +
                      " (need >= 2 each)");
    }
    IndexList order = sample_without_replacement(n, n, rng);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto row = members[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
      (j < keep ? train : test).push_back(row);
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  DomainDataset tr = target.subset(train);
  DomainDataset te = target.subset(test);
  tr.name = target.name + "/train";
  te.name = target.name + "/test";
  return {std::move(tr), std::move(te)};
}

MinMaxScaler MinMaxScaler::fit(const Eigen::MatrixXd& features) {
  if (features.rows() < 1) throw DataError("scaler: cannot fit on an empty matrix");
  MinMaxScaler s;
  s.min_ = features.colwise().minCoeff();
  s.range_ = features.colwise().maxCoeff() - s.min_;
  return s;
}

Eigen::MatrixXd MinMaxScaler::transform(const Eigen::MatrixXd& features) const {
  if (features.cols() != min_.size()) throw DimensionError("scaler: column count mismatch");
  Eigen::MatrixXd out = features.rowwise() - min_;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    if (range_(c) > 0.0) {
      out.col(c) /= range_(c);
    } else {
      out.col(c).setZero();
    }
  }
  return out;
}

TransferTask scale_task(const TransferTask& task, ScalingMode mode) {
  if (mode == ScalingMode::none) return task;
  const MinMaxScaler scaler = MinMaxScaler::fit(task.target_train.features);
  TransferTask out = task;
  for (auto& s : out.sources) s.features = scaler.transform(s.features);
  out.target_train.features = scaler.transform(out.target_train.features);
  out.target_test.features = scaler.transform(out.target_test.features);
  return out;
}

}  // namespace setrlusi
