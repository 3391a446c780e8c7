#include "setrlusi/stats.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "setrlusi/errors.hpp"

namespace setrlusi {

namespace {

// Two-tailed Nemenyi critical values for k = 2..10 methods.
constexpr std::array<double, 9> kQ005{1.960, 2.343, 2.569, 2.728, 2.850,
                                      2.949, 3.031, 3.102, 3.164};
constexpr std::array<double, 9> kQ010{1.645, 2.052, 2.291, 2.459, 2.589,
                                      2.693, 2.780, 2.855, 2.920};

}  // namespace

Eigen::MatrixXd rank_rows_descending(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd ranks(scores.rows(), scores.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.cols()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return scores(r, a) > scores(r, b);
    });
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && scores(r, order[j + 1]) == scores(r, order[i])) ++j;
      // Positions i..j (0-based) share rank ((i+1) + (j+1)) / 2.
      const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
      for (std::size_t t = i; t <= j; ++t) ranks(r, order[t]) = shared;
      i = j + 1;
    }
  }
  return ranks;
}

FriedmanResult friedman_statistic(const Eigen::MatrixXd& accuracy) {
  const auto n = static_cast<double>(accuracy.rows());
  const auto k = static_cast<double>(accuracy.cols());
  if (accuracy.rows() < 2 || accuracy.cols() < 2) {
    throw DataError("friedman: need at least 2 datasets and 2 methods");
  }
  if (!accuracy.allFinite()) throw DataError("friedman: accuracy table has non-finite entries");

  FriedmanResult out;
  out.average_ranks = rank_rows_descending(accuracy).colwise().mean().transpose();
  out.chi_square = 12.0 * n / (k * (k + 1.0)) *
                   (out.average_ranks.squaredNorm() - k * (k + 1.0) * (k + 1.0) / 4.0);
  const double denominator = n * (k - 1.0) - out.chi_square;
  if (std::abs(denominator) < 1e-12 * n * k) {
    throw DataError("friedman: F_F is undefined because every dataset ranks the methods "
                    "identically (chi^2_F = n (k - 1))");
  }
  out.f_statistic = (n - 1.0) * out.chi_square / denominator;
  return out;
}

double nemenyi_q_alpha(int n_methods, double alpha) {
  if (n_methods < 2 || n_methods > 10) {
    throw DataError("nemenyi: n_methods must be between 2 and 10, got " +
                    std::to_string(n_methods));
  }
  const auto slot = static_cast<std::size_t>(n_methods - 2);
  if (std::abs(alpha - 0.05) < 1e-12) return kQ005[slot];
  if (std::abs(alpha - 0.10) < 1e-12) return kQ010[slot];
  throw DataError("nemenyi: alpha must be 0.05 or 0.10, got " + std::to_string(alpha));
}

double nemenyi_cd(int n_methods, int n_datasets, double alpha) {
  if (n_datasets < 1) throw DataError("nemenyi: n_datasets must be >= 1");
  const double k = n_methods;
  return nemenyi_q_alpha(n_methods, alpha) * std::sqrt(k * (k + 1.0) / (6.0 * n_datasets));
}

}  // namespace setrlusi
