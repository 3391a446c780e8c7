// Command-line front end: run experiments, compute rank statistics over
// result files, time the scaling sweep and generate synthetic task files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "setrlusi/errors.hpp"
#include "setrlusi/experiment.hpp"
#include "setrlusi/stats.hpp"

namespace fs = std::filesystem;
using namespace setrlusi;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitIo = 4;

int cmd_run(const std::string& config_path, const std::string& output_override) {
  ExperimentConfig config = load_experiment_config(config_path);
  if (!output_override.empty()) {
    config.experiment.output = output_override;
    config.experiment.format = format_for_path(output_override);
  }
  for (const auto& task : config.tasks) {
    for (const auto& w : load_task_domains(task).warnings) std::cerr << "warning: " << w << "\n";
  }
  const auto results = run_experiment(config);
  emit_results(results, config.experiment.output, config.experiment.format);
  std::printf("%-32s %-16s %6s %10s %10s %10s\n", "task", "method", "trials", "acc_mean",
              "acc_std", "time_s");
  for (const auto& r : results) {
    std::printf("%-32s %-16s %6d %10.4f %10.4f %10.4f\n", r.task_name.c_str(),
                r.method_name.c_str(), r.trials, r.accuracy_mean, r.accuracy_std,
                r.wall_time_seconds);
  }
  std::printf("wrote %s\n", config.experiment.output.string().c_str());
  return 0;
}

int cmd_stats(const std::vector<std::string>& paths, double alpha) {
  std::vector<TrialRecord> records;
  for (const auto& p : paths) {
    auto part = parse_results(p, format_for_path(p));
    records.insert(records.end(), part.begin(), part.end());
  }
  const auto results = aggregate_records(records);

  std::vector<std::string> tasks;
  std::vector<std::string> methods;
  std::map<std::pair<std::string, std::string>, double> mean;
  for (const auto& r : results) {
    if (std::find(tasks.begin(), tasks.end(), r.task_name) == tasks.end()) tasks.push_back(r.task_name);
    if (std::find(methods.begin(), methods.end(), r.method_name) == methods.end()) {
      methods.push_back(r.method_name);
    }
    mean[{r.task_name, r.method_name}] = r.accuracy_mean;
  }
  Eigen::MatrixXd table(static_cast<Eigen::Index>(tasks.size()),
                        static_cast<Eigen::Index>(methods.size()));
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto it = mean.find({tasks[t], methods[m]});
      if (it == mean.end()) {
        throw DataError("task '" + tasks[t] + "' has no results for method '" + methods[m] + "'");
      }
      table(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(m)) = it->second;
    }
  }

  const FriedmanResult f = friedman_statistic(table);
  const double cd = nemenyi_cd(static_cast<int>(methods.size()), static_cast<int>(tasks.size()), alpha);
  std::printf("datasets %zu, methods %zu\n", tasks.size(), methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::printf("  %-20s avg rank %.4f\n", methods[m].c_str(),
                f.average_ranks(static_cast<Eigen::Index>(m)));
  }
  std::printf("chi_square_F %.6f\nF_F %.6f\nNemenyi CD (alpha=%.2f) %.6f\n", f.chi_square,
              f.f_statistic, alpha, cd);
  return 0;
}

int cmd_bench(const BenchConfig& config) {
  const BenchResult r = run_scaling_benchmark(config);
  std::printf("%8s %12s\n", "q", "seconds");
  for (const auto& p : r.points) std::printf("%8td %12.6f\n", static_cast<std::ptrdiff_t>(p.q), p.seconds);
  std::printf("log-log slope %.4f\n", r.loglog_slope);
  return 0;
}

int cmd_gen(const fs::path& out_dir, Eigen::Index n_per_domain, std::uint64_t seed,
            std::size_t target, std::size_t n_sources) {
  const SyntheticSpec spec = twelve_domain_spec(n_per_domain, seed);
  if (target >= spec.domains.size()) throw ConfigError("--target must be below 12");
  if (n_sources < 1 || n_sources > spec.domains.size() - 1) {
    throw ConfigError("--sources must be in [1, 11]");
  }
  const auto domains = gen_synthetic_domains(spec);
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  std::vector<std::string> names;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "domain_%02zu.csv", i);
    write_csv_dataset(domains[i], out_dir / name);
    names.emplace_back(name);
  }
  nlohmann::ordered_json sources = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < domains.size() && sources.size() < n_sources; ++i) {
    if (i != target) sources.push_back(names[i]);
  }
  nlohmann::ordered_json config;
  config["task"] = {{"name", "synthetic"},
                    {"source_csvs", sources},
                    {"target_csv", names[target]},
                    {"label_column", "label"},
                    {"split_fraction", 0.10},
                    {"seed", seed}};
  config["model"] = {{"tau", {0.3, 0.5, 0.7, 0.9}},
                     {"gamma", {0.1, 0.3, 0.5, 0.7, 0.9}},
                     {"lambda", 0.01},
                     {"H", 100},
                     {"kernel", {{"kind", "rbf"}, {"sigma", "median"}}},
                     {"regularizer_mode", "identity"},
                     {"scaling", "minmax"}};
  config["experiment"] = {{"trials", 10},
                          {"workers", 1},
                          {"output", "results.jsonl"},
                          {"format", "json_lines"},
                          {"master_seed", seed}};
  std::ofstream out(out_dir / "config.json");
  if (!out) throw IoError("cannot write '" + (out_dir / "config.json").string() + "'");
  out << config.dump(2) << "\n";
  std::printf("wrote %zu domains and config.json to %s\n", domains.size(), out_dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic-ensemble multi-source transfer learning with statistical invariants"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_override;
  auto* run = app.add_subcommand("run", "run the experiment described by a JSON config");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("-o,--output", output_override, "override the result path");

  std::vector<std::string> result_paths;
  double alpha = 0.10;
  auto* stats = app.add_subcommand("stats", "Friedman test and Nemenyi CD over result files");
  stats->add_option("results", result_paths, "result files (.jsonl or .csv)")
      ->required()
      ->check(CLI::ExistingFile);
  stats->add_option("--alpha", alpha, "Nemenyi significance level")
      ->check(CLI::IsMember({0.05, 0.10}));

  BenchConfig bench_config;
  auto* bench = app.add_subcommand("bench", "time training for growing labeled target size");
  bench->add_option("--q", bench_config.q_values, "labeled target sizes");
  bench->add_option("--rounds", bench_config.rounds, "ensemble rounds H");
  bench->add_option("--sources", bench_config.n_sources, "number of sources");
  bench->add_option("--repeats", bench_config.repeats, "timing repeats (best is kept)");
  bench->add_option("--seed", bench_config.seed, "seed");

  std::string gen_dir = "synthetic";
  Eigen::Index n_per_domain = 200;
  std::uint64_t gen_seed = 7;
  std::size_t gen_target = 0;
  std::size_t gen_sources = 3;
  auto* gen = app.add_subcommand("gen", "write the 12-domain synthetic task as CSV files");
  gen->add_option("-o,--out-dir", gen_dir, "output directory");
  gen->add_option("-n,--n-per-domain", n_per_domain, "samples per domain")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--target", gen_target, "index of the target domain");
  gen->add_option("--sources", gen_sources, "number of source domains listed in config.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, output_override);
    if (*stats) return cmd_stats(result_paths, alpha);
    if (*bench) return cmd_bench(bench_config);
    if (*gen) return cmd_gen(gen_dir, n_per_domain, gen_seed, gen_target, gen_sources);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTraining;
  }
  return 0;
}
