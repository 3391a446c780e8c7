#pragma once

#include <limits>

#include <Eigen/Dense>

#include "setrlusi/linalg.hpp"

namespace setrlusi {

// Matrix multiplying lambda in the linear system: M = P K + lambda I or
// M = P K + lambda V.
enum class RegularizerMode { identity, vmatrix };

inline const char* to_string(RegularizerMode mode) {
  return mode == RegularizerMode::identity ? "identity" : "vmatrix";
}

struct HyperParams {
  // Weight of the invariant term; the V-matrix gets 1 - tau. tau = 0 turns
  // the invariant off entirely (used by the no-invariant ablation).
  double tau = 0.5;
  double lambda = 1e-2;
  KernelConfig kernel;
  RegularizerMode regularizer_mode = RegularizerMode::identity;

  void validate() const;
};

struct WeakLearner {
  Eigen::MatrixXd centers;       // fitting samples, one per row
  Eigen::VectorXd coefficients;  // A
  double intercept = 0.0;        // b
  KernelConfig kernel;           // always resolved (fixed sigma)
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();

  Eigen::Index dim() const { return centers.cols(); }
};

/// Rescales psi so that ||psi||^2 == q. A zero vector is returned unchanged.
Eigen::VectorXd normalize_predicate(const Eigen::VectorXd& predicate_values);

/// (1 - tau) V + tau psi psi^T, with psi already normalized.
Eigen::MatrixXd blend_invariant(const Eigen::MatrixXd& v_matrix,
                                const Eigen::VectorXd& normalized_predicate, double tau);

/// Closed-form stationary point of
///   Q(A, b) = (F - Y)^T P (F - Y) + lambda A^T K A,   F = K A + b 1.
/// Labels are 0/1; the predicate is evaluated on the same samples.
/// Throws FitError when the intercept denominator degenerates.
WeakLearner fit_weak_learner(const Eigen::MatrixXd& samples, const Eigen::VectorXd& labels,
                             const Eigen::VectorXd& predicate_values,
                             const HyperParams& params);

/// K(x)^T A + b without clamping.
Eigen::VectorXd predict_raw(const WeakLearner& learner, const Eigen::MatrixXd& inputs);

/// K(x)^T A + b clamped to [0, 1].
Eigen::VectorXd predict_proba(const WeakLearner& learner, const Eigen::MatrixXd& inputs);

/// Q(A, b) on the given samples, using the same kernel resolution and
/// predicate normalization as fit_weak_learner.
double objective_value(const Eigen::MatrixXd& samples, const Eigen::VectorXd& labels,
                       const Eigen::VectorXd& predicate_values, const HyperParams& params,
                       const Eigen::VectorXd& coefficients, double intercept);

}  // namespace setrlusi
