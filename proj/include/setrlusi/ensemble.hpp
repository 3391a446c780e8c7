#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "setrlusi/dataset.hpp"
#include "setrlusi/predicates.hpp"
#include "setrlusi/weak_learner.hpp"

namespace setrlusi {

inline constexpr double kMinError = 0.001;
inline constexpr double kMaxError = 0.499;

/// Misclassification fraction with class 1 iff f(x) >= 0.5.
double raw_weak_error(const WeakLearner& learner, const Eigen::MatrixXd& samples,
                      const Labels& labels);

/// Raw error clamped to [0.001, 0.499].
double clamp_error(double raw_error);

/// Clamped error of `learner` on the labeled set.
double weak_error(const WeakLearner& learner, const Eigen::MatrixXd& samples,
                  const Labels& labels);

/// beta = 1 - eps / (1 - eps), evaluated as (1 - 2 eps) / (1 - eps).
double learner_weight(double epsilon);

/// Position of the smallest error; the earliest one wins ties. NaN entries
/// mark failed candidates and are skipped. Returns nullopt if all failed.
std::optional<std::size_t> select_min_error(std::span<const double> errors);

/// Weighted vote of weak learners. Raw betas are kept on the learners; the
/// normalized weights are recomputed from them on demand.
class Ensemble {
 public:
  Ensemble() = default;

  /// Appends a learner whose epsilon and beta are already set.
  void add(WeakLearner learner);

  const std::vector<WeakLearner>& learners() const { return learners_; }
  std::size_t size() const { return learners_.size(); }
  bool empty() const { return learners_.empty(); }
  Eigen::Index dim() const;

  /// beta^h / sum beta.
  Eigen::VectorXd weights() const;
  double sum_squared_weights() const;

 private:
  std::vector<WeakLearner> learners_;
};

struct EnsemblePrediction {
  Eigen::VectorXd probability;  // S_e per input
  Eigen::VectorXi classes;      // 1 iff S_e >= 0.5
};

EnsemblePrediction ensemble_predict(const Ensemble& ensemble, const Eigen::MatrixXd& inputs);

struct TrainConfig {
  int rounds = 100;  // H
  double gamma = 0.5;
  HyperParams params;
  PoolConfig pool;
  std::uint64_t master_seed = 0;
  std::uint64_t trial = 0;

  void validate() const;
};

/// One completed round.
struct RoundRecord {
  int round = 0;  // 1-based h
  std::size_t selected_source = 0;
  PredicateKind predicate = PredicateKind::Ones;
  double epsilon = 0.0;
  int failed_candidates = 0;
  // Error of the ensemble built so far on target_test (NaN without labels).
  double test_error = 0.0;
};

struct SkippedRound {
  int round = 0;
  std::string reason;
};

struct TrainResult {
  Ensemble ensemble;
  std::vector<RoundRecord> trace;
  std::vector<SkippedRound> skipped;
};

/// The stochastic ensemble loop: for every round h and source i, bootstrap the
/// target, gamma-sample source i, draw a predicate from source i's families
/// plus the target families, fit a weak learner on a random half of the
/// bootstrap and score it on the full target training set. The lowest-error
/// candidate of each round joins the ensemble.
///
/// Randomness comes from one stream per (trial, h, i, purpose), so the result
/// depends only on master_seed and trial.
TrainResult train_setrlusi(const TransferTask& task, const PredicatePool& pool,
                           const TrainConfig& config);

}  // namespace setrlusi
