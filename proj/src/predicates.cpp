#include "setrlusi/predicates.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "setrlusi/errors.hpp"
#include "setrlusi/linalg.hpp"

namespace setrlusi {

namespace {

constexpr std::array<std::pair<PredicateKind, std::string_view>, 10> kKindNames{{
    {PredicateKind::SourceDecision, "SourceDecision"},
    {PredicateKind::SourceSign, "SourceSign"},
    {PredicateKind::SourceTopFeature, "SourceTopFeature"},
    {PredicateKind::SourceFeaturePair, "SourceFeaturePair"},
    {PredicateKind::SourceKernelSum, "SourceKernelSum"},
    {PredicateKind::TargetMean, "TargetMean"},
    {PredicateKind::TargetFeature, "TargetFeature"},
    {PredicateKind::TargetMeanSquare, "TargetMeanSquare"},
    {PredicateKind::TargetFeaturePair, "TargetFeaturePair"},
    {PredicateKind::Ones, "Ones"},
}};

Eigen::ArrayXd signed_labels(const Labels& labels) {
  return 2.0 * labels.array() - 1.0;
}

double pick_from(const std::vector<double>& grid, RngStream& rng) {
  return draw_uniform(std::span<const double>(grid), rng);
}

PredicateSpec margin_spec(PredicateKind kind, std::size_t source, const MarginClassifier& clf) {
  PredicateSpec spec;
  spec.kind = kind;
  spec.source_index = source;
  spec.classifier = clf;
  const auto ranked = rank_features(clf.w);
  if (kind == PredicateKind::SourceTopFeature) {
    spec.feature_indices = {ranked[0]};
  } else if (kind == PredicateKind::SourceFeaturePair) {
    spec.feature_indices = {ranked[0], ranked.size() > 1 ? ranked[1] : ranked[0]};
  }
  return spec;
}

PredicateSpec kernel_spec(std::size_t source, const Eigen::MatrixXd& centers, double sigma) {
  PredicateSpec spec;
  spec.kind = PredicateKind::SourceKernelSum;
  spec.source_index = source;
  spec.kernel_sum = KernelSum{centers, sigma};
  return spec;
}

PredicateSpec target_spec(PredicateKind kind, std::vector<Eigen::Index> features = {}) {
  PredicateSpec spec;
  spec.kind = kind;
  spec.feature_indices = std::move(features);
  return spec;
}

}  // namespace

const char* to_string(PredicateKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name.data();
  }
  return "unknown";
}

std::optional<PredicateKind> parse_predicate_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

bool is_source_kind(PredicateKind kind) {
  switch (kind) {
    case PredicateKind::SourceDecision:
    case PredicateKind::SourceSign:
    case PredicateKind::SourceTopFeature:
    case PredicateKind::SourceFeaturePair:
    case PredicateKind::SourceKernelSum:
      return true;
    default:
      return false;
  }
}

bool uses_margin_classifier(PredicateKind kind) {
  return is_source_kind(kind) && kind != PredicateKind::SourceKernelSum;
}

Eigen::VectorXd MarginClassifier::decision(const Eigen::MatrixXd& features) const {
  if (features.cols() != w.size()) {
    throw DimensionError("margin classifier expects " + std::to_string(w.size()) +
                         " features, got " + std::to_string(features.cols()));
  }
  return (features * w).array() + b;
}

double margin_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& features,
                        const Labels& labels, double reg_param) {
  const Eigen::ArrayXd margins =
      signed_labels(labels) * ((features * w).array() + b);
  const double hinge = (1.0 - margins).max(0.0).mean();
  return 0.5 * reg_param * (w.squaredNorm() + b * b) + hinge;
}

MarginClassifier train_linear_margin_classifier(const Eigen::MatrixXd& features,
                                                const Labels& labels, double reg_param,
                                                int max_epochs) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (labels.size() != n) throw DimensionError("margin classifier: label count mismatch");
  if (!(reg_param > 0.0 && std::isfinite(reg_param))) {
    throw DataError("margin classifier: reg_param must be positive");
  }
  if (max_epochs < 1) throw DataError("margin classifier: max_epochs must be >= 1");
  if (!features.allFinite()) throw DataError("margin classifier: non-finite features");
  const auto ones = (labels.array() == 1.0).count();
  if (ones == 0 || ones == n) {
    throw DataError("margin classifier: training data has a single class");
  }

  const Eigen::ArrayXd y = signed_labels(labels);
  const double radius = 1.0 / std::sqrt(reg_param);

  // The bias is handled as one more regularized weight.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;

  MarginClassifier best;
  best.reg_param = reg_param;
  best.w = w;
  best.b = b;
  double best_objective = margin_objective(w, b, features, labels, reg_param);

  constexpr int kPatience = 20;
  int last_improvement = 0;
  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    const Eigen::ArrayXd margins = y * ((features * w).array() + b);
    const Eigen::ArrayXd active = (margins < 1.0).cast<double>() * y;
    const Eigen::VectorXd grad_w =
        reg_param * w - features.transpose() * active.matrix() / static_cast<double>(n);
    const double grad_b = reg_param * b - active.sum() / static_cast<double>(n);

    const double step = 1.0 / (reg_param * epoch);
    w -= step * grad_w;
    b -= step * grad_b;
    const double norm = std::sqrt(w.squaredNorm() + b * b);
    if (norm > radius) {
      w *= radius / norm;
      b *= radius / norm;
    }

    const double objective = margin_objective(w, b, features, labels, reg_param);
    if (objective < best_objective) {
      if (best_objective - objective > 1e-6 * (1.0 + std::abs(best_objective))) {
        last_improvement = epoch;
      }
      best_objective = objective;
      best.w = w;
      best.b = b;
    }
    best.objective_history.push_back(best_objective);
    best.epochs = epoch;
  }
  best.converged = max_epochs - last_improvement >= std::min(kPatience, max_epochs);
  return best;
}

std::vector<Eigen::Index> rank_features(const Eigen::VectorXd& w) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(w.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(w(a)) > std::abs(w(b));
  });
  return order;
}

void PredicateSpec::validate(Eigen::Index d) const {
  const auto name = std::string(to_string(kind));
  const auto need_features = [&](std::size_t count) {
    if (feature_indices.size() != count) {
      throw DataError(name + " predicate needs " + std::to_string(count) + " feature indices");
    }
    for (const auto s : feature_indices) {
      if (s < 0 || s >= d) {
        throw DataError(name + " predicate feature index " + std::to_string(s) +
                        " out of range for d=" + std::to_string(d));
      }
    }
  };
  if (is_source_kind(kind) && !source_index) {
    throw DataError(name + " predicate is missing its source index");
  }
  switch (kind) {
    case PredicateKind::SourceDecision:
    case PredicateKind::SourceSign:
      if (!classifier) throw DataError(name + " predicate is missing its classifier");
      if (classifier->w.size() != d) throw DimensionError(name + " classifier dimension");
      break;
    case PredicateKind::SourceTopFeature:
    case PredicateKind::TargetFeature:
      need_features(1);
      break;
    case PredicateKind::SourceFeaturePair:
    case PredicateKind::TargetFeaturePair:
      need_features(2);
      break;
    case PredicateKind::SourceKernelSum:
      if (!kernel_sum || kernel_sum->centers.rows() == 0) {
        throw DataError(name + " predicate is missing its centers");
      }
      if (kernel_sum->centers.cols() != d) throw DimensionError(name + " center dimension");
      if (!(kernel_sum->sigma > 0.0)) throw DataError(name + " predicate sigma must be > 0");
      break;
    case PredicateKind::TargetMean:
    case PredicateKind::TargetMeanSquare:
    case PredicateKind::Ones:
      break;
  }
}

std::vector<double> default_svm_reg_grid() {
  std::vector<double> grid;
  for (int e = -8; e <= 8; e += 2) grid.push_back(std::ldexp(1.0, e));
  return grid;
}

void PoolConfig::validate() const {
  if (svm_reg_grid.empty() || kernel_sigma_grid.empty()) {
    throw ConfigError("predicate pool grids must be non-empty");
  }
  for (const double r : svm_reg_grid) {
    if (!(r > 0.0)) throw ConfigError("svm regularization values must be positive");
  }
  for (const double s : kernel_sigma_grid) {
    if (!(s > 0.0)) throw ConfigError("kernel sigma values must be positive");
  }
  if (svm_max_epochs < 1) throw ConfigError("svm_max_epochs must be >= 1");
}

std::size_t pool_size_formula(std::size_t d, std::size_t n_sources, std::size_t n_fs,
                              std::size_t n_gs, std::size_t n_kernel) {
  const std::size_t pairs = d * (d + 1) / 2;
  return n_sources * (n_fs + n_gs + d + pairs + n_kernel) + (1 + d + 1 + pairs + 1);
}

std::vector<std::size_t> PredicatePool::entries_for_source(std::size_t source) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (!is_source_kind(s.kind) || s.source_index == source) out.push_back(i);
  }
  return out;
}

PredicatePool build_predicate_pool(const TransferTask& task, const PoolConfig& config,
                                   RngStream& rng) {
  config.validate();
  if (task.sources.empty()) throw DataError("predicate pool: task has no sources");
  const Eigen::Index d = task.dim();
  if (d < 1) throw DataError("predicate pool: dimension must be >= 1");
  const auto du = static_cast<std::size_t>(d);

  PredicatePool pool;
  for (std::size_t i = 0; i < task.sources.size(); ++i) {
    const DomainDataset& src = task.sources[i];
    if (src.has_both_classes()) {
      const auto fit = [&] {
        return train_linear_margin_classifier(src.features, src.y(),
                                              pick_from(config.svm_reg_grid, rng),
                                              config.svm_max_epochs);
      };
      for (std::size_t k = 0; k < config.n_fs; ++k) {
        pool.specs.push_back(margin_spec(PredicateKind::SourceDecision, i, fit()));
      }
      for (std::size_t k = 0; k < config.n_gs; ++k) {
        pool.specs.push_back(margin_spec(PredicateKind::SourceSign, i, fit()));
      }
      for (std::size_t k = 0; k < du; ++k) {
        pool.specs.push_back(margin_spec(PredicateKind::SourceTopFeature, i, fit()));
      }
      for (std::size_t k = 0; k < du * (du + 1) / 2; ++k) {
        pool.specs.push_back(margin_spec(PredicateKind::SourceFeaturePair, i, fit()));
      }
    } else {
      pool.warnings.push_back("source '" + src.name + "' (index " + std::to_string(i) +
                              ") has a single class; margin-classifier predicates omitted");
    }
    for (std::size_t k = 0; k < config.n_kernel; ++k) {
      pool.specs.push_back(kernel_spec(i, src.features, pick_from(config.kernel_sigma_grid, rng)));
    }
  }

  pool.specs.push_back(target_spec(PredicateKind::TargetMean));
  for (Eigen::Index s = 0; s < d; ++s) {
    pool.specs.push_back(target_spec(PredicateKind::TargetFeature, {s}));
  }
  pool.specs.push_back(target_spec(PredicateKind::TargetMeanSquare));
  for (Eigen::Index s1 = 0; s1 < d; ++s1) {
    for (Eigen::Index s2 = s1; s2 < d; ++s2) {
      pool.specs.push_back(target_spec(PredicateKind::TargetFeaturePair, {s1, s2}));
    }
  }
  pool.specs.push_back(target_spec(PredicateKind::Ones));
  return pool;
}

Eigen::VectorXd evaluate_predicate(const PredicateSpec& spec, const Eigen::MatrixXd& samples) {
  spec.validate(samples.cols());
  const Eigen::Index q = samples.rows();
  const auto& f = spec.feature_indices;
  switch (spec.kind) {
    case PredicateKind::SourceDecision:
      return spec.classifier->decision(samples);
    case PredicateKind::SourceSign:
      return (spec.classifier->decision(samples).array() > 0.0).cast<double>();
    case PredicateKind::SourceTopFeature:
    case PredicateKind::TargetFeature:
      return samples.col(f[0]);
    case PredicateKind::SourceFeaturePair:
    case PredicateKind::TargetFeaturePair:
      return samples.col(f[0]).cwiseProduct(samples.col(f[1]));
    case PredicateKind::SourceKernelSum: {
      const KernelConfig cfg{KernelKind::rbf, spec.kernel_sum->sigma, SigmaRule::fixed};
      return rbf_kernel_matrix(samples, spec.kernel_sum->centers, cfg).rowwise().sum();
    }
    case PredicateKind::TargetMean:
      return samples.rowwise().mean();
    case PredicateKind::TargetMeanSquare:
      return samples.rowwise().mean().array().square();
    case PredicateKind::Ones:
      return Eigen::VectorXd::Ones(q);
  }
  throw DataError("unknown predicate kind");
}

PredicateSpec instantiate_predicate(const PredicateSpec& entry, const DomainDataset& source_sample,
                                    const PoolConfig& config, RngStream& rng) {
  if (!is_source_kind(entry.kind)) return entry;
  const std::size_t source = *entry.source_index;
  if (entry.kind == PredicateKind::SourceKernelSum) {
    return kernel_spec(source, source_sample.features, pick_from(config.kernel_sigma_grid, rng));
  }
  const MarginClassifier clf = train_linear_margin_classifier(
      source_sample.features, source_sample.y(), pick_from(config.svm_reg_grid, rng),
      config.svm_max_epochs);
  return margin_spec(entry.kind, source, clf);
}

}  // namespace setrlusi
