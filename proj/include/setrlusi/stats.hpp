#pragma once

#include <Eigen/Dense>

namespace setrlusi {

struct FriedmanResult {
  double chi_square = 0.0;         // chi^2_F
  double f_statistic = 0.0;        // F_F (Iman-Davenport)
  Eigen::VectorXd average_ranks;   // per method, rank 1 = best
};

/// Ranks within each row; the highest score gets rank 1, ties share the
/// average of the positions they span.
Eigen::MatrixXd rank_rows_descending(const Eigen::MatrixXd& scores);

/// Friedman test over an n_datasets x n_methods accuracy table.
///   chi^2_F = 12 n / (k (k+1)) [sum_j R_j^2 - k (k+1)^2 / 4]
///   F_F     = (n - 1) chi^2_F / (n (k - 1) - chi^2_F)
/// Throws DataError when n < 2 or k < 2 and when the F_F denominator
/// vanishes (all datasets rank the methods identically).
FriedmanResult friedman_statistic(const Eigen::MatrixXd& accuracy);

/// Studentized-range critical value q_alpha / sqrt(2) for the Nemenyi test;
/// alpha in {0.05, 0.10}, 2 <= n_methods <= 10.
double nemenyi_q_alpha(int n_methods, double alpha);

/// CD = q_alpha sqrt(k (k + 1) / (6 n)).
double nemenyi_cd(int n_methods, int n_datasets, double alpha = 0.10);

}  // namespace setrlusi
