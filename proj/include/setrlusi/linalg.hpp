#pragma once

// Dense kernel / V-matrix construction and the jittered linear solve used by
// the weak-learner fitter. Everything here is header-only and templated on
// the Eigen expression type, so float and long double instantiations work
// the same way as double.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "setrlusi/errors.hpp"

namespace setrlusi {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class KernelKind { rbf, linear };
enum class SigmaRule { fixed, median_heuristic };

struct KernelConfig {
  KernelKind kind = KernelKind::rbf;
  double sigma = 1.0;
  SigmaRule sigma_rule = SigmaRule::median_heuristic;

  void validate() const {
    if (kind == KernelKind::rbf && sigma_rule == SigmaRule::fixed &&
        !(sigma > 0.0 && std::isfinite(sigma))) {
      throw DataError("rbf kernel needs a positive finite sigma, got " +
                      std::to_string(sigma));
    }
  }
};

inline const char* to_string(KernelKind kind) {
  return kind == KernelKind::rbf ? "rbf" : "linear";
}

inline const char* to_string(SigmaRule rule) {
  return rule == SigmaRule::fixed ? "fixed" : "median_heuristic";
}

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw DataError(std::string(what) + " contains non-finite values");
  }
}

}  // namespace detail

/// Median of the non-zero pairwise Euclidean distances between rows of
/// `samples`. Falls back to 1 when every pair coincides (or q < 2).
template <typename Derived>
typename Derived::Scalar median_pairwise_distance(
    const Eigen::MatrixBase<Derived>& samples) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index q = samples.rows();
  std::vector<Scalar> dists;
  dists.reserve(static_cast<std::size_t>(q * (q - 1) / 2));
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = i + 1; j < q; ++j) {
      const Scalar dist = (samples.row(i) - samples.row(j)).norm();
      if (dist > Scalar(0)) dists.push_back(dist);
    }
  }
  if (dists.empty()) return Scalar(1);
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  if (dists.size() % 2 == 1) return *mid;
  const Scalar upper = *mid;
  const Scalar lower = *std::max_element(dists.begin(), mid);
  return (lower + upper) / Scalar(2);
}

/// Turns a median-heuristic config into a fixed one using `samples`.
template <typename Derived>
KernelConfig resolve_kernel(const KernelConfig& config,
                            const Eigen::MatrixBase<Derived>& samples) {
  KernelConfig resolved = config;
  if (config.kind == KernelKind::rbf &&
      config.sigma_rule == SigmaRule::median_heuristic) {
    resolved.sigma = static_cast<double>(median_pairwise_distance(samples));
    resolved.sigma_rule = SigmaRule::fixed;
  }
  resolved.validate();
  return resolved;
}

/// Kernel matrix with entry (i, k) = K(rows_i, centers_k).
///
/// For an rbf config using the median heuristic, sigma is taken from the
/// centers; resolve the config first when the bandwidth must be pinned.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> rbf_kernel_matrix(
    const Eigen::MatrixBase<DerivedA>& rows,
    const Eigen::MatrixBase<DerivedB>& centers, const KernelConfig& config) {
  using Scalar = typename DerivedA::Scalar;
  if (rows.cols() != centers.cols()) {
    throw DimensionError("kernel: rows have " + std::to_string(rows.cols()) +
                         " columns, centers have " +
                         std::to_string(centers.cols()));
  }
  detail::require_finite(rows, "kernel rows");
  detail::require_finite(centers, "kernel centers");

  if (config.kind == KernelKind::linear) {
    return rows * centers.transpose();
  }
  const KernelConfig cfg = resolve_kernel(config, centers);
  const Scalar inv_two_sigma_sq =
      Scalar(1) / (Scalar(2) * Scalar(cfg.sigma) * Scalar(cfg.sigma));

  MatrixX<Scalar> out(rows.rows(), centers.rows());
  for (Eigen::Index k = 0; k < centers.rows(); ++k) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      // Direct difference keeps K(x, x) == 1 exactly.
      out(i, k) = std::exp(-(rows.row(i) - centers.row(k)).squaredNorm() *
                           inv_two_sigma_sq);
    }
  }
  return out;
}

/// V-matrix of the product empirical measure over the samples themselves:
///
///   V(i, j) = prod_c  |{k : x_k^c >= max(x_i^c, x_j^c)}| / q
///
/// Ties count as dominating. Factors are multiplied in column order starting
/// from 1, so a scalar-loop evaluation in the same order agrees bit for bit.
template <typename Derived>
MatrixX<typename Derived::Scalar> compute_v_matrix(
    const Eigen::MatrixBase<Derived>& samples) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index q = samples.rows();
  const Eigen::Index d = samples.cols();
  if (q < 1 || d < 1) throw DataError("v-matrix: empty sample set");
  detail::require_finite(samples, "v-matrix samples");

  // dominated(i, c) = number of samples whose c-th coordinate is >= x_i^c.
  // Since that count is non-increasing in the threshold, the count at
  // max(x_i^c, x_j^c) is min(dominated(i, c), dominated(j, c)).
  Eigen::MatrixXi dominated(q, d);
  std::vector<Scalar> column(static_cast<std::size_t>(q));
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index k = 0; k < q; ++k) column[static_cast<std::size_t>(k)] = samples(k, c);
    std::sort(column.begin(), column.end());
    for (Eigen::Index i = 0; i < q; ++i) {
      const auto first = std::lower_bound(column.begin(), column.end(), samples(i, c));
      dominated(i, c) = static_cast<int>(column.end() - first);
    }
  }

  const Scalar qs = static_cast<Scalar>(q);
  MatrixX<Scalar> v(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = i; j < q; ++j) {
      Scalar value(1);
      for (Eigen::Index c = 0; c < d; ++c) {
        value *= static_cast<Scalar>(std::min(dominated(i, c), dominated(j, c))) / qs;
      }
      v(i, j) = value;
      v(j, i) = value;
    }
  }
  return v;
}

/// Smallest jitter tried once the caller's own jitter fails, and the cap.
inline constexpr double kJitterFloor = 1e-8;
inline constexpr double kJitterCeiling = 1e-4;

/// Solves (M + jitter I) x = rhs with partial-pivot LU. M need not be
/// symmetric. A solve is accepted when the LU is not numerically singular,
/// x is finite and ||(M + jitter I) x - rhs||_inf <= 1e-8 (1 + ||rhs||_inf);
/// otherwise jitter is raised by decades from 1e-8 up to 1e-4. The jitter
/// that was finally applied is written to `applied_jitter` when given.
template <typename DerivedM, typename DerivedR>
Eigen::Matrix<typename DerivedM::Scalar, Eigen::Dynamic, DerivedR::ColsAtCompileTime>
solve_jittered_system(const Eigen::MatrixBase<DerivedM>& m,
                      const Eigen::MatrixBase<DerivedR>& rhs,
                      typename DerivedM::Scalar jitter,
                      typename DerivedM::Scalar* applied_jitter = nullptr) {
  using Scalar = typename DerivedM::Scalar;
  using Result = Eigen::Matrix<Scalar, Eigen::Dynamic, DerivedR::ColsAtCompileTime>;

  if (m.rows() != m.cols()) {
    throw DimensionError("solve: matrix is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", not square");
  }
  if (rhs.rows() != m.rows()) {
    throw DimensionError("solve: rhs has " + std::to_string(rhs.rows()) +
                         " rows, matrix has " + std::to_string(m.rows()));
  }
  if (!(jitter >= Scalar(0)) || !std::isfinite(static_cast<double>(jitter))) {
    throw DataError("solve: jitter must be a finite non-negative number");
  }
  detail::require_finite(m, "solve matrix");
  detail::require_finite(rhs, "solve rhs");

  std::vector<Scalar> schedule{jitter};
  for (Scalar j = Scalar(kJitterFloor); j <= Scalar(kJitterCeiling) * Scalar(1.0000001);
       j *= Scalar(10)) {
    if (j > jitter) schedule.push_back(j);
  }

  const Scalar rhs_norm = rhs.size() == 0 ? Scalar(0) : rhs.cwiseAbs().maxCoeff();
  const Scalar tolerance = Scalar(1e-8) * (Scalar(1) + rhs_norm);
  const Eigen::Index n = m.rows();

  for (const Scalar j : schedule) {
    const MatrixX<Scalar> shifted = m + j * MatrixX<Scalar>::Identity(n, n);
    const Eigen::PartialPivLU<MatrixX<Scalar>> lu(shifted);
    if (!(lu.rcond() > std::numeric_limits<Scalar>::epsilon())) continue;

    Result x = lu.solve(rhs);
    Result residual = shifted * x - rhs;
    // One round of iterative refinement tightens ill-conditioned solves.
    x -= lu.solve(residual);
    residual = shifted * x - rhs;
    if (!x.allFinite()) continue;
    const Scalar worst = residual.size() == 0 ? Scalar(0) : residual.cwiseAbs().maxCoeff();
    if (worst <= tolerance) {
      if (applied_jitter != nullptr) *applied_jitter = j;
      return x;
    }
  }
  throw SingularSystemError("solve: system stayed singular up to jitter " +
                            std::to_string(kJitterCeiling));
}

}  // namespace setrlusi
