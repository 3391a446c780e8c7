#include "setrlusi/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "setrlusi/errors.hpp"
#include "setrlusi/sampling.hpp"

namespace setrlusi {

namespace {

enum class Purpose : std::uint64_t { bootstrap = 1, source, predicate, instantiate, half };

RngStream stream_for(const TrainConfig& config, int round, std::size_t source, Purpose purpose) {
  return RngStream(config.master_seed,
                   make_stream_id({config.trial, static_cast<std::uint64_t>(round),
                                   static_cast<std::uint64_t>(source),
                                   static_cast<std::uint64_t>(purpose)}));
}

struct Candidate {
  WeakLearner learner;
  PredicateKind predicate;
};

std::optional<Candidate> build_candidate(const TransferTask& task, const PredicatePool& pool,
                                         const std::vector<std::size_t>& allowed,
                                         const TrainConfig& config, int round,
                                         std::size_t source) {
  const DomainDataset& target = task.target_train;

  RngStream boot_rng = stream_for(config, round, source, Purpose::bootstrap);
  const IndexList boot = bootstrap_indices(target.y(), boot_rng);

  RngStream src_rng = stream_for(config, round, source, Purpose::source);
  const DomainDataset source_sample =
      proportional_sample_source(task.sources[source], config.gamma, src_rng);

  RngStream pick_rng = stream_for(config, round, source, Purpose::predicate);
  const std::size_t entry = draw_uniform(std::span<const std::size_t>(allowed), pick_rng);
  RngStream inst_rng = stream_for(config, round, source, Purpose::instantiate);
  const PredicateSpec psi =
      instantiate_predicate(pool.specs[entry], source_sample, config.pool, inst_rng);

  // Fit on a random half of the bootstrap (at least two rows).
  RngStream half_rng = stream_for(config, round, source, Purpose::half);
  const auto q = static_cast<Eigen::Index>(boot.size());
  const Eigen::Index half = std::max<Eigen::Index>(2, q / 2);
  IndexList rows;
  for (const auto pos : sample_without_replacement(q, half, half_rng)) {
    rows.push_back(boot[static_cast<std::size_t>(pos)]);
  }
  const DomainDataset fit_set = target.subset(rows);

  const Eigen::VectorXd psi_values = evaluate_predicate(psi, fit_set.features);
  if (config.params.tau > 0.0 && psi_values.squaredNorm() == 0.0) return std::nullopt;

  WeakLearner learner = fit_weak_learner(fit_set.features, fit_set.y(), psi_values, config.params);
  learner.epsilon = weak_error(learner, target.features, target.y());
  learner.beta = learner_weight(learner.epsilon);
  return Candidate{std::move(learner), psi.kind};
}

}  // namespace

double raw_weak_error(const WeakLearner& learner, const Eigen::MatrixXd& samples,
                      const Labels& labels) {
  if (labels.size() != samples.rows()) throw DimensionError("weak_error: label count mismatch");
  if (samples.rows() < 1) throw DataError("weak_error: no samples");
  const Eigen::VectorXd f = predict_raw(learner, samples);
  Eigen::Index wrong = 0;
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    const double predicted = f(k) >= 0.5 ? 1.0 : 0.0;
    if (predicted != labels(k)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(samples.rows());
}

double clamp_error(double raw_error) { return std::clamp(raw_error, kMinError, kMaxError); }

double weak_error(const WeakLearner& learner, const Eigen::MatrixXd& samples,
                  const Labels& labels) {
  return clamp_error(raw_weak_error(learner, samples, labels));
}

double learner_weight(double epsilon) { return (1.0 - 2.0 * epsilon) / (1.0 - epsilon); }

std::optional<std::size_t> select_min_error(std::span<const double> errors) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (std::isnan(errors[i])) continue;
    if (!best || errors[i] < errors[*best]) best = i;
  }
  return best;
}

void Ensemble::add(WeakLearner learner) {
  if (!(learner.epsilon >= kMinError && learner.epsilon <= kMaxError)) {
    throw DataError("ensemble: learner error " + std::to_string(learner.epsilon) +
                    " is outside [0.001, 0.499]");
  }
  if (!(learner.beta > 0.0 && learner.beta <= 1.0)) {
    throw DataError("ensemble: learner weight must lie in (0, 1]");
  }
  if (!learners_.empty() && learner.dim() != dim()) {
    throw DimensionError("ensemble: learner dimension differs from the ensemble");
  }
  learners_.push_back(std::move(learner));
}

Eigen::Index Ensemble::dim() const { return learners_.empty() ? 0 : learners_.front().dim(); }

Eigen::VectorXd Ensemble::weights() const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(learners_.size()));
  for (std::size_t h = 0; h < learners_.size(); ++h) {
    w(static_cast<Eigen::Index>(h)) = learners_[h].beta;
  }
  return w / w.sum();
}

double Ensemble::sum_squared_weights() const { return weights().squaredNorm(); }

EnsemblePrediction ensemble_predict(const Ensemble& ensemble, const Eigen::MatrixXd& inputs) {
  if (ensemble.empty()) throw DataError("ensemble_predict: ensemble is empty");
  const Eigen::VectorXd w = ensemble.weights();
  EnsemblePrediction out;
  out.probability = Eigen::VectorXd::Zero(inputs.rows());
  for (std::size_t h = 0; h < ensemble.size(); ++h) {
    out.probability += w(static_cast<Eigen::Index>(h)) * predict_proba(ensemble.learners()[h], inputs);
  }
  out.classes = (out.probability.array() >= 0.5).cast<int>();
  return out;
}

void TrainConfig::validate() const {
  if (rounds < 1) throw ConfigError("rounds (H) must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  params.validate();
  pool.validate();
}

TrainResult train_setrlusi(const TransferTask& task, const PredicatePool& pool,
                           const TrainConfig& config) {
  config.validate();
  task.validate();
  if (pool.specs.empty()) throw DataError("train: predicate pool is empty");

  std::vector<std::vector<std::size_t>> allowed(task.sources.size());
  for (std::size_t i = 0; i < task.sources.size(); ++i) {
    allowed[i] = pool.entries_for_source(i);
  }

  // Running beta-weighted sum of test probabilities for the trace.
  const bool score_test = task.target_test.labeled() && task.target_test.size() > 0;
  Eigen::VectorXd test_sum = Eigen::VectorXd::Zero(task.target_test.size());
  double beta_sum = 0.0;

  TrainResult result;
  for (int h = 1; h <= config.rounds; ++h) {
    std::vector<std::optional<Candidate>> candidates(task.sources.size());
    std::vector<double> errors(task.sources.size(), std::numeric_limits<double>::quiet_NaN());
    int failed = 0;
    std::string last_failure;
    for (std::size_t i = 0; i < task.sources.size(); ++i) {
      try {
        candidates[i] = build_candidate(task, pool, allowed[i], config, h, i);
        if (!candidates[i]) last_failure = "predicate evaluated to zero";
      } catch (const Error& e) {
        last_failure = e.what();
      }
      if (candidates[i]) {
        errors[i] = candidates[i]->learner.epsilon;
      } else {
        ++failed;
      }
    }
    const auto chosen = select_min_error(errors);
    if (!chosen) {
      result.skipped.push_back({h, "no viable candidate: " + last_failure});
      continue;
    }
    const std::size_t best_source = *chosen;
    Candidate* best = &*candidates[best_source];

    RoundRecord record;
    record.round = h;
    record.selected_source = best_source;
    record.predicate = best->predicate;
    record.epsilon = best->learner.epsilon;
    record.failed_candidates = failed;
    record.test_error = std::numeric_limits<double>::quiet_NaN();
    if (score_test) {
      test_sum += best->learner.beta * predict_proba(best->learner, task.target_test.features);
      beta_sum += best->learner.beta;
      const Labels& y = task.target_test.y();
      Eigen::Index wrong = 0;
      for (Eigen::Index k = 0; k < y.size(); ++k) {
        const double cls = test_sum(k) / beta_sum >= 0.5 ? 1.0 : 0.0;
        if (cls != y(k)) ++wrong;
      }
      record.test_error = static_cast<double>(wrong) / static_cast<double>(y.size());
    }
    result.ensemble.add(std::move(best->learner));
    result.trace.push_back(record);
  }
  if (result.ensemble.empty()) {
    throw TrainingError("train: every round failed to produce a weak learner");
  }
  return result;
}

}  // namespace setrlusi
