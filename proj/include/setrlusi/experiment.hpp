#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "setrlusi/datasets.hpp"
#include "setrlusi/ensemble.hpp"
#include "setrlusi/predicates.hpp"
#include "setrlusi/weak_learner.hpp"

namespace setrlusi {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// One CSV per source domain plus one for the whole target domain.
struct CsvDomainsInput {
  std::vector<std::filesystem::path> source_csvs;
  std::filesystem::path target_csv;
};

/// A single CSV split into domains by k-means on a few columns.
struct ClusteredCsvInput {
  std::filesystem::path csv;
  std::vector<Eigen::Index> cluster_features;  // 0-based
  int k = 3;
  std::optional<int> target_cluster;
  std::uint64_t cluster_seed = 0;
};

/// Generated rotated-Gaussian domains; picks which ones act as sources/target.
struct SyntheticInput {
  SyntheticSpec spec;
  std::vector<std::size_t> source_domains;
  std::size_t target_domain = 0;
};

struct TaskConfig {
  std::string name;
  std::variant<CsvDomainsInput, ClusteredCsvInput, SyntheticInput> input;
  CsvSchema schema;
  double split_fraction = 0.10;
  std::uint64_t seed = 1;
  // Keep only the first n sources (0 = all).
  std::size_t source_limit = 0;
};

struct ModelConfig {
  // More than one value triggers grid selection on target_train accuracy.
  std::vector<double> tau_grid{0.5};
  std::vector<double> gamma_grid{0.5};
  double lambda = 1e-2;
  int rounds = 100;  // H
  KernelConfig kernel;
  RegularizerMode regularizer_mode = RegularizerMode::identity;
  ScalingMode scaling = ScalingMode::minmax;
  PoolConfig pool;
};

enum class ResultFormat { json_lines, csv };

inline constexpr const char* kMethodSetrlusi = "setrlusi";
inline constexpr const char* kMethodSingleLusi = "lusi_single";
inline constexpr const char* kMethodNoInvariant = "setrlusi_no_si";

struct ExperimentOptions {
  int trials = 10;
  int workers = 1;
  std::filesystem::path output = "results.jsonl";
  ResultFormat format = ResultFormat::json_lines;
  std::uint64_t master_seed = 0;
  // When false, wall_time_seconds is written as 0 so result files are
  // byte-reproducible.
  bool record_wall_time = true;
  std::vector<std::string> methods{kMethodSetrlusi, kMethodSingleLusi, kMethodNoInvariant};
  // Sweeps: every task is re-run for each value (empty = no sweep).
  std::vector<double> split_fractions;
  std::vector<std::size_t> source_counts;
};

struct ExperimentConfig {
  std::vector<TaskConfig> tasks;
  ModelConfig model;
  ExperimentOptions experiment;
};

/// Parses the JSON config; relative CSV paths resolve against `base_dir`.
/// Throws ConfigError on any schema problem.
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// One (task, method, trial) outcome.
struct TrialRecord {
  std::string task;
  std::string method;
  int trial = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double wall_time_seconds = 0.0;
  std::vector<int> h_index;
  std::vector<double> test_error;
};

struct ExperimentResult {
  std::string task_name;
  std::string method_name;
  int trials = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;  // sample standard deviation over trials
  double wall_time_seconds = 0.0;  // mean per trial
  std::uint64_t master_seed = 0;
  std::string config_snapshot;  // JSON text
  std::vector<TrialRecord> records;
};

/// Groups records by (task, method) in first-seen order and aggregates them.
std::vector<ExperimentResult> aggregate_records(const std::vector<TrialRecord>& records,
                                                std::uint64_t master_seed = 0);

/// Loads a transfer task's domains (before splitting). IO problems surface as
/// IoError.
struct LoadedDomains {
  std::string name;
  std::vector<DomainDataset> sources;
  DomainDataset target;
  std::vector<std::string> warnings;
};
LoadedDomains load_task_domains(const TaskConfig& task);

/// Runs every (task variant, method, trial) of the config.
std::vector<ExperimentResult> run_experiment(const ExperimentConfig& config);

/// Writes the per-trial records plus an aggregate record (trial = -1) to
/// config.output, a `<output>.summary.json` file with mean/std/config per
/// (task, method), and one `<stem>.<task>.<method>.convergence.csv` per
/// (task, method) with columns h, mean_test_error, std_test_error.
void emit_results(const std::vector<ExperimentResult>& results,
                  const std::filesystem::path& output, ResultFormat format);

/// Reads the per-trial records back (aggregate rows are skipped).
std::vector<TrialRecord> parse_results(const std::filesystem::path& path, ResultFormat format);

ResultFormat format_for_path(const std::filesystem::path& path);

/// Mean and sample std of the per-round test error across records;
/// row h averages the trials that completed round h.
struct ConvergenceRow {
  int h = 0;
  double mean_test_error = 0.0;
  double std_test_error = 0.0;
};
std::vector<ConvergenceRow> convergence_curve(const std::vector<TrialRecord>& records);

// ---------------------------------------------------------------------------
// Scaling benchmark
// ---------------------------------------------------------------------------

struct BenchConfig {
  std::vector<Eigen::Index> q_values{50, 100, 200, 400};
  std::size_t n_sources = 3;
  int rounds = 20;
  int repeats = 3;
  Eigen::Index source_size = 200;
  Eigen::Index test_size = 200;
  std::uint64_t seed = 11;
  ModelConfig model;
};

struct BenchPoint {
  Eigen::Index q = 0;
  double seconds = 0.0;  // best of `repeats`
};

struct BenchResult {
  std::vector<BenchPoint> points;
  double loglog_slope = 0.0;  // least-squares slope of log(seconds) on log(q)
};

BenchResult run_scaling_benchmark(const BenchConfig& config);

}  // namespace setrlusi
