#include "setrlusi/weak_learner.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace setrlusi {

namespace {

constexpr double kDenominatorFloor = 1e-12;

void check_shapes(const Eigen::MatrixXd& samples, const Eigen::VectorXd& labels,
                  const Eigen::VectorXd& predicate_values) {
  if (labels.size() != samples.rows() || predicate_values.size() != samples.rows()) {
    throw DimensionError("weak learner: " + std::to_string(samples.rows()) +
                         " samples but " + std::to_string(labels.size()) + " labels and " +
                         std::to_string(predicate_values.size()) + " predicate values");
  }
  if (!predicate_values.allFinite()) {
    throw DataError("weak learner: predicate values are not finite");
  }
  if (!labels.allFinite()) throw DataError("weak learner: labels are not finite");
}

// Kernel, V-matrix and blended weight matrix shared by fit and objective.
struct Problem {
  KernelConfig kernel;
  Eigen::MatrixXd gram;
  Eigen::MatrixXd v;
  Eigen::MatrixXd blended;
};

Problem build_problem(const Eigen::MatrixXd& samples, const Eigen::VectorXd& predicate_values,
                      const HyperParams& params) {
  Problem p;
  p.kernel = resolve_kernel(params.kernel, samples);
  p.gram = rbf_kernel_matrix(samples, samples, p.kernel);
  p.v = compute_v_matrix(samples);
  p.blended = blend_invariant(p.v, normalize_predicate(predicate_values), params.tau);
  return p;
}

}  // namespace

void HyperParams::validate() const {
  if (!(tau >= 0.0 && tau < 1.0)) {
    throw DataError("tau must lie in [0, 1), got " + std::to_string(tau));
  }
  if (!(lambda > 0.0 && std::isfinite(lambda))) {
    throw DataError("lambda must be positive, got " + std::to_string(lambda));
  }
  kernel.validate();
}

Eigen::VectorXd normalize_predicate(const Eigen::VectorXd& predicate_values) {
  const double norm_sq = predicate_values.squaredNorm();
  if (norm_sq == 0.0) return predicate_values;
  const double q = static_cast<double>(predicate_values.size());
  return predicate_values * std::sqrt(q / norm_sq);
}

Eigen::MatrixXd blend_invariant(const Eigen::MatrixXd& v_matrix,
                                const Eigen::VectorXd& normalized_predicate, double tau) {
  return (1.0 - tau) * v_matrix +
         tau * normalized_predicate * normalized_predicate.transpose();
}

WeakLearner fit_weak_learner(const Eigen::MatrixXd& samples, const Eigen::VectorXd& labels,
                             const Eigen::VectorXd& predicate_values,
                             const HyperParams& params) {
  params.validate();
  if (samples.rows() < 2) throw DataError("weak learner: need at least 2 samples");
  check_shapes(samples, labels, predicate_values);

  const Problem p = build_problem(samples, predicate_values, params);
  const Eigen::Index q = samples.rows();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(q);

  Eigen::MatrixXd system = p.blended * p.gram;
  if (params.regularizer_mode == RegularizerMode::identity) {
    system.diagonal().array() += params.lambda;
  } else {
    system += params.lambda * p.v;
  }

  // Both right-hand sides go through one factorization:
  // column 0 -> A1 (labels), column 1 -> a2 (intercept direction).
  Eigen::MatrixXd rhs(q, 2);
  rhs.col(0) = p.blended * labels;
  rhs.col(1) = p.blended * ones;
  const Eigen::MatrixXd solution = solve_jittered_system(system, rhs, 0.0);
  const Eigen::VectorXd a1 = solution.col(0);
  const Eigen::VectorXd a2 = solution.col(1);

  const double numerator = ones.dot(p.blended * (labels - p.gram * a1));
  const double denominator = ones.dot(p.blended * (ones - p.gram * a2));
  if (!(std::abs(denominator) >= kDenominatorFloor)) {
    throw FitError("weak learner: intercept denominator " + std::to_string(denominator) +
                   " is degenerate");
  }

  WeakLearner learner;
  learner.centers = samples;
  learner.intercept = numerator / denominator;
  learner.coefficients = a1 - learner.intercept * a2;
  learner.kernel = p.kernel;
  if (!learner.coefficients.allFinite() || !std::isfinite(learner.intercept)) {
    throw FitError("weak learner: solution is not finite");
  }
  return learner;
}

Eigen::VectorXd predict_raw(const WeakLearner& learner, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != learner.dim()) {
    throw DimensionError("predict: inputs have " + std::to_string(inputs.cols()) +
                         " columns, learner expects " + std::to_string(learner.dim()));
  }
  const Eigen::MatrixXd k = rbf_kernel_matrix(inputs, learner.centers, learner.kernel);
  return (k * learner.coefficients).array() + learner.intercept;
}

Eigen::VectorXd predict_proba(const WeakLearner& learner, const Eigen::MatrixXd& inputs) {
  return predict_raw(learner, inputs).cwiseMax(0.0).cwiseMin(1.0);
}

double objective_value(const Eigen::MatrixXd& samples, const Eigen::VectorXd& labels,
                       const Eigen::VectorXd& predicate_values, const HyperParams& params,
                       const Eigen::VectorXd& coefficients, double intercept) {
  params.validate();
  check_shapes(samples, labels, predicate_values);
  if (coefficients.size() != samples.rows()) {
    throw DimensionError("objective: coefficient vector has wrong length");
  }
  const Problem p = build_problem(samples, predicate_values, params);
  const Eigen::VectorXd residual =
      (p.gram * coefficients).array() + intercept - labels.array();
  return residual.dot(p.blended * residual) +
         params.lambda * coefficients.dot(p.gram * coefficients);
}

}  // namespace setrlusi
