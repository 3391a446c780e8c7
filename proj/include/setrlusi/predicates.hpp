#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "setrlusi/dataset.hpp"
#include "setrlusi/sampling.hpp"

namespace setrlusi {

// The ten predicate families. The first five are built from a source domain,
// the last five from the target domain alone.
enum class PredicateKind {
  SourceDecision,     // w^T x + b of a source margin classifier
  SourceSign,         // 1[w^T x + b > 0]
  SourceTopFeature,   // x^s, s = argmax |w|
  SourceFeaturePair,  // x^s1 x^s2 for the two largest |w|
  SourceKernelSum,    // sum_k exp(-||x - c_k||^2 / (2 sigma^2)) over source rows
  TargetMean,         // mean of the features of x
  TargetFeature,      // x^s
  TargetMeanSquare,   // (mean of the features of x)^2
  TargetFeaturePair,  // x^s1 x^s2
  Ones,               // 1
};

const char* to_string(PredicateKind kind);
std::optional<PredicateKind> parse_predicate_kind(std::string_view name);
bool is_source_kind(PredicateKind kind);
bool uses_margin_classifier(PredicateKind kind);

/// Linear large-margin classifier f(x) = w^T x + b.
struct MarginClassifier {
  Eigen::VectorXd w;
  double b = 0.0;
  double reg_param = 1.0;
  int epochs = 0;
  bool converged = false;
  // Objective of the returned iterate after each epoch (non-increasing).
  std::vector<double> objective_history;

  Eigen::VectorXd decision(const Eigen::MatrixXd& features) const;
};

/// (reg/2)(||w||^2 + b^2) + mean hinge loss, labels 0/1 mapped to -1/+1.
double margin_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& features,
                        const Labels& labels, double reg_param);

/// Full-batch subgradient descent on the hinge + L2 objective with step
/// 1 / (reg t) and projection onto the ball of radius 1 / sqrt(reg). The
/// best iterate seen so far is kept, so the tracked objective never rises.
/// Throws DataError on single-class input; `converged` is false when the
/// objective was still moving at max_epochs.
MarginClassifier train_linear_margin_classifier(const Eigen::MatrixXd& features,
                                                const Labels& labels, double reg_param,
                                                int max_epochs = 200);

/// Feature indices ordered by decreasing |w|, ties broken by lower index.
std::vector<Eigen::Index> rank_features(const Eigen::VectorXd& w);

struct KernelSum {
  Eigen::MatrixXd centers;
  double sigma = 1.0;
};

/// One predicate. Which optional fields are set depends on `kind`:
/// the classifier for the four margin-based source kinds, feature indices
/// (0-based) for the feature kinds, kernel sum centers for SourceKernelSum.
struct PredicateSpec {
  PredicateKind kind = PredicateKind::Ones;
  std::optional<std::size_t> source_index;
  std::optional<MarginClassifier> classifier;
  std::vector<Eigen::Index> feature_indices;
  std::optional<KernelSum> kernel_sum;

  /// Throws DataError if the kind-dependent fields are inconsistent with d.
  void validate(Eigen::Index d) const;
};

std::vector<double> default_svm_reg_grid();  // 2^-8, 2^-6, ..., 2^8

struct PoolConfig {
  std::size_t n_fs = 3;      // SourceDecision entries per source
  std::size_t n_gs = 3;      // SourceSign entries per source
  std::size_t n_kernel = 3;  // SourceKernelSum entries per source
  std::vector<double> svm_reg_grid = default_svm_reg_grid();
  std::vector<double> kernel_sigma_grid = {0.1, 0.3, 1.0};
  int svm_max_epochs = 200;

  void validate() const;
};

/// Number of predicates for N sources in dimension d:
///   N (n_fs + n_gs + d + d(d+1)/2 + n_kernel) + (1 + d + 1 + d(d+1)/2 + 1).
std::size_t pool_size_formula(std::size_t d, std::size_t n_sources, std::size_t n_fs,
                              std::size_t n_gs, std::size_t n_kernel);

struct PredicatePool {
  std::vector<PredicateSpec> specs;
  std::vector<std::string> warnings;

  /// Positions of the entries usable alongside source i: that source's own
  /// families plus every target family.
  std::vector<std::size_t> entries_for_source(std::size_t source) const;
};

/// Builds every family slot. Source entries are fitted on the full source
/// with grid values drawn from `rng`; a single-class source loses its four
/// margin-based families and gets a warning instead.
PredicatePool build_predicate_pool(const TransferTask& task, const PoolConfig& config,
                                   RngStream& rng);

/// psi evaluated on each row of `samples`.
Eigen::VectorXd evaluate_predicate(const PredicateSpec& spec, const Eigen::MatrixXd& samples);

/// Re-fits a source-kind entry on the current source sample, drawing a fresh
/// regularization value or kernel width from the grids. Target-kind entries
/// come back unchanged.
PredicateSpec instantiate_predicate(const PredicateSpec& entry, const DomainDataset& source_sample,
                                    const PoolConfig& config, RngStream& rng);

}  // namespace setrlusi
