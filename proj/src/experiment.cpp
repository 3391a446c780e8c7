#include "setrlusi/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "setrlusi/errors.hpp"
#include "setrlusi/sampling.hpp"
#include "text_util.hpp"

namespace setrlusi {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config parsing helpers
// ---------------------------------------------------------------------------

std::vector<double> number_or_list(const json& node, const char* key) {
  if (node.is_number()) return {node.get<double>()};
  if (node.is_array() && !node.empty()) {
    std::vector<double> out;
    for (const auto& v : node) {
      if (!v.is_number()) throw ConfigError(std::string(key) + " must hold numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }
  throw ConfigError(std::string(key) + " must be a number or a non-empty list of numbers");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

SyntheticSpec parse_synthetic_spec(const json& node) {
  const auto n_per = node.value("n_per_domain", Eigen::Index{200});
  const auto seed = node.value("seed", std::uint64_t{0});
  SyntheticSpec spec;
  if (node.value("preset", std::string()) == "twelve_domain") {
    spec = twelve_domain_spec(n_per, seed);
  } else {
    const auto n_domains = node.at("n_domains").get<std::size_t>();
    std::vector<Eigen::Vector2d> centers;
    for (const auto& c : node.at("centers")) {
      if (!c.is_array() || c.size() != 2) throw ConfigError("synthetic centers must be [x, y] pairs");
      centers.emplace_back(c[0].get<double>(), c[1].get<double>());
    }
    spec = make_synthetic_spec(n_domains, number_or_list(node.at("rotation_angles"), "rotation_angles"),
                               centers, number_or_list(node.at("compactness"), "compactness"),
                               n_per, seed);
  }
  if (node.contains("class_offset")) spec.class_offset = node.at("class_offset").get<double>();
  if (node.contains("base_std")) {
    const auto v = number_or_list(node.at("base_std"), "base_std");
    if (v.size() != 2) throw ConfigError("base_std must have two entries");
    spec.base_std = {v[0], v[1]};
  }
  return spec;
}

TaskConfig parse_task(const json& node, const std::filesystem::path& base) {
  TaskConfig task;
  task.name = node.value("name", std::string("task"));
  task.split_fraction = node.value("split_fraction", 0.10);
  task.seed = node.value("seed", std::uint64_t{1});
  task.source_limit = node.value("source_limit", std::size_t{0});
  task.schema.label_column = node.value("label_column", std::string("label"));
  if (node.contains("feature_columns")) {
    task.schema.feature_columns = node.at("feature_columns").get<std::vector<std::string>>();
  }
  if (node.contains("positive_label")) {
    task.schema.positive_label = node.at("positive_label").get<std::string>();
  }

  const int kinds = static_cast<int>(node.contains("source_csvs")) +
                    static_cast<int>(node.contains("csv")) +
                    static_cast<int>(node.contains("synthetic_spec"));
  if (kinds != 1) {
    throw ConfigError("task '" + task.name +
                      "' needs exactly one of source_csvs, csv, synthetic_spec");
  }
  if (node.contains("source_csvs")) {
    CsvDomainsInput in;
    for (const auto& p : node.at("source_csvs")) in.source_csvs.push_back(resolve(base, p.get<std::string>()));
    if (in.source_csvs.empty()) throw ConfigError("source_csvs must not be empty");
    in.target_csv = resolve(base, node.at("target_csv").get<std::string>());
    task.input = std::move(in);
  } else if (node.contains("csv")) {
    ClusteredCsvInput in;
    in.csv = resolve(base, node.at("csv").get<std::string>());
    in.cluster_features = node.at("cluster_features").get<std::vector<Eigen::Index>>();
    in.k = node.value("k", 3);
    if (node.contains("target_cluster")) in.target_cluster = node.at("target_cluster").get<int>();
    in.cluster_seed = node.value("cluster_seed", task.seed);
    task.input = std::move(in);
  } else {
    SyntheticInput in;
    const json& syn = node.at("synthetic_spec");
    in.spec = parse_synthetic_spec(syn);
    in.target_domain = syn.value("target", std::size_t{0});
    if (syn.contains("sources")) {
      in.source_domains = syn.at("sources").get<std::vector<std::size_t>>();
    } else {
      for (std::size_t i = 0; i < in.spec.domains.size(); ++i) {
        if (i != in.target_domain) in.source_domains.push_back(i);
      }
    }
    for (const auto i : in.source_domains) {
      if (i >= in.spec.domains.size() || i == in.target_domain) {
        throw ConfigError("task '" + task.name + "': bad source domain index " + std::to_string(i));
      }
    }
    if (in.target_domain >= in.spec.domains.size()) {
      throw ConfigError("task '" + task.name + "': target domain index out of range");
    }
    task.input = std::move(in);
  }
  return task;
}

ModelConfig parse_model(const json& node) {
  ModelConfig m;
  if (node.contains("tau")) m.tau_grid = number_or_list(node.at("tau"), "tau");
  if (node.contains("gamma")) m.gamma_grid = number_or_list(node.at("gamma"), "gamma");
  m.lambda = node.value("lambda", m.lambda);
  m.rounds = node.value("H", m.rounds);
  if (node.contains("kernel")) {
    const json& k = node.at("kernel");
    const std::string kind = k.value("kind", std::string("rbf"));
    if (kind == "rbf") {
      m.kernel.kind = KernelKind::rbf;
    } else if (kind == "linear") {
      m.kernel.kind = KernelKind::linear;
    } else {
      throw ConfigError("unknown kernel kind '" + kind + "'");
    }
    if (k.contains("sigma") && k.at("sigma").is_number()) {
      m.kernel.sigma = k.at("sigma").get<double>();
      m.kernel.sigma_rule = SigmaRule::fixed;
    }
  }
  const std::string reg = node.value("regularizer_mode", std::string("identity"));
  if (reg == "identity") {
    m.regularizer_mode = RegularizerMode::identity;
  } else if (reg == "vmatrix") {
    m.regularizer_mode = RegularizerMode::vmatrix;
  } else {
    throw ConfigError("unknown regularizer_mode '" + reg + "'");
  }
  const std::string scaling = node.value("scaling", std::string("minmax"));
  if (scaling == "minmax") {
    m.scaling = ScalingMode::minmax;
  } else if (scaling == "none") {
    m.scaling = ScalingMode::none;
  } else {
    throw ConfigError("unknown scaling '" + scaling + "'");
  }
  if (node.contains("pool")) {
    const json& p = node.at("pool");
    m.pool.n_fs = p.value("n_fs", m.pool.n_fs);
    m.pool.n_gs = p.value("n_gs", m.pool.n_gs);
    m.pool.n_kernel = p.value("n_kernel", m.pool.n_kernel);
    if (p.contains("svm_reg_grid")) m.pool.svm_reg_grid = number_or_list(p.at("svm_reg_grid"), "svm_reg_grid");
    if (p.contains("kernel_sigma_grid")) {
      m.pool.kernel_sigma_grid = number_or_list(p.at("kernel_sigma_grid"), "kernel_sigma_grid");
    }
    m.pool.svm_max_epochs = p.value("svm_max_epochs", m.pool.svm_max_epochs);
  }
  return m;
}

ExperimentOptions parse_options(const json& node, const std::filesystem::path& base) {
  ExperimentOptions o;
  o.trials = node.value("trials", o.trials);
  o.workers = node.value("workers", o.workers);
  if (node.contains("output")) o.output = resolve(base, node.at("output").get<std::string>());
  o.master_seed = node.value("master_seed", o.master_seed);
  o.record_wall_time = node.value("record_wall_time", o.record_wall_time);
  const std::string fmt = node.value("format", std::string("json_lines"));
  if (fmt == "json_lines") {
    o.format = ResultFormat::json_lines;
  } else if (fmt == "csv") {
    o.format = ResultFormat::csv;
  } else {
    throw ConfigError("unknown result format '" + fmt + "'");
  }
  if (node.contains("methods")) o.methods = node.at("methods").get<std::vector<std::string>>();
  if (node.contains("split_fractions")) {
    o.split_fractions = number_or_list(node.at("split_fractions"), "split_fractions");
  }
  if (node.contains("source_counts")) {
    o.source_counts = node.at("source_counts").get<std::vector<std::size_t>>();
  }
  return o;
}

void validate_config(const ExperimentConfig& c) {
  if (c.tasks.empty()) throw ConfigError("config has no task");
  const auto in_open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  for (const double t : c.model.tau_grid) {
    if (!in_open_unit(t)) throw ConfigError("tau values must lie in (0, 1)");
  }
  for (const double g : c.model.gamma_grid) {
    if (!(g > 0.0 && g <= 1.0)) throw ConfigError("gamma values must lie in (0, 1]");
  }
  if (!(c.model.lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (c.model.rounds < 1) throw ConfigError("H must be >= 1");
  try {
    c.model.kernel.validate();
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  c.model.pool.validate();
  if (c.experiment.trials < 1) throw ConfigError("trials must be >= 1");
  if (c.experiment.workers < 1) throw ConfigError("workers must be >= 1");
  if (c.experiment.methods.empty()) throw ConfigError("methods must not be empty");
  for (const auto& m : c.experiment.methods) {
    if (m != kMethodSetrlusi && m != kMethodSingleLusi && m != kMethodNoInvariant) {
      throw ConfigError("unknown method '" + m + "'");
    }
  }
  for (const auto& t : c.tasks) {
    if (!in_open_unit(t.split_fraction)) throw ConfigError("split_fraction must lie in (0, 1)");
  }
  for (const double f : c.experiment.split_fractions) {
    if (!in_open_unit(f)) throw ConfigError("split_fractions must lie in (0, 1)");
  }
  for (const auto s : c.experiment.source_counts) {
    if (s < 1) throw ConfigError("source_counts must be >= 1");
  }
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

struct Variant {
  std::string name;
  TaskConfig task;
  std::size_t domains_index = 0;
};

json model_snapshot(const ModelConfig& m) {
  return json{{"tau", m.tau_grid},
              {"gamma", m.gamma_grid},
              {"lambda", m.lambda},
              {"H", m.rounds},
              {"kernel",
               {{"kind", to_string(m.kernel.kind)},
                {"sigma_rule", to_string(m.kernel.sigma_rule)},
                {"sigma", m.kernel.sigma}}},
              {"regularizer_mode", to_string(m.regularizer_mode)},
              {"scaling", m.scaling == ScalingMode::minmax ? "minmax" : "none"},
              {"pool",
               {{"n_fs", m.pool.n_fs},
                {"n_gs", m.pool.n_gs},
                {"n_kernel", m.pool.n_kernel},
                {"svm_reg_grid", m.pool.svm_reg_grid},
                {"kernel_sigma_grid", m.pool.kernel_sigma_grid},
                {"svm_max_epochs", m.pool.svm_max_epochs}}}};
}

std::string format_fraction(double f) { return text::format_double(f); }

std::vector<Variant> expand_variants(const ExperimentConfig& config) {
  std::vector<Variant> out;
  for (std::size_t t = 0; t < config.tasks.size(); ++t) {
    const TaskConfig& base = config.tasks[t];
    std::vector<std::optional<double>> fractions{std::nullopt};
    if (!config.experiment.split_fractions.empty()) {
      fractions.assign(config.experiment.split_fractions.begin(),
                       config.experiment.split_fractions.end());
    }
    std::vector<std::optional<std::size_t>> counts{std::nullopt};
    if (!config.experiment.source_counts.empty()) {
      counts.assign(config.experiment.source_counts.begin(), config.experiment.source_counts.end());
    }
    for (const auto& f : fractions) {
      for (const auto& c : counts) {
        Variant v;
        v.task = base;
        v.name = base.name;
        v.domains_index = t;
        if (f) {
          v.task.split_fraction = *f;
          v.name += "@frac=" + format_fraction(*f);
        }
        if (c) {
          v.task.source_limit = *c;
          v.name += "@sources=" + std::to_string(*c);
        }
        out.push_back(std::move(v));
      }
    }
  }
  return out;
}

TransferTask build_trial_task(const LoadedDomains& domains, const Variant& variant, int trial,
                              ScalingMode scaling) {
  TransferTask task;
  task.name = variant.name;
  task.sources = domains.sources;
  if (variant.task.source_limit > 0) {
    if (variant.task.source_limit > task.sources.size()) {
      throw ConfigError("task '" + variant.name + "' asks for " +
                        std::to_string(variant.task.source_limit) + " sources but has " +
                        std::to_string(task.sources.size()));
    }
    task.sources.resize(variant.task.source_limit);
  }
  const std::uint64_t split_seed =
      make_stream_id({variant.task.seed, static_cast<std::uint64_t>(trial)});
  auto [train, test] = split_labeled_target(domains.target, variant.task.split_fraction, split_seed);
  task.target_train = std::move(train);
  task.target_test = std::move(test);
  task.validate();
  return scale_task(task, scaling);
}

double accuracy_of(const Eigen::VectorXi& classes, const Labels& y) {
  Eigen::Index right = 0;
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    if (static_cast<double>(classes(k)) == y(k)) ++right;
  }
  return static_cast<double>(right) / static_cast<double>(y.size());
}

TrainConfig train_config(const ModelConfig& model, double tau, double gamma,
                         std::uint64_t master_seed, int trial) {
  TrainConfig tc;
  tc.rounds = model.rounds;
  tc.gamma = gamma;
  tc.params.tau = tau;
  tc.params.lambda = model.lambda;
  tc.params.kernel = model.kernel;
  tc.params.regularizer_mode = model.regularizer_mode;
  tc.pool = model.pool;
  tc.master_seed = master_seed;
  tc.trial = static_cast<std::uint64_t>(trial);
  return tc;
}

constexpr std::uint64_t kPoolStream = 0x706F6F6CULL;
constexpr std::uint64_t kInnerSeedSalt = 0x696E6E6572ULL;

PredicatePool make_pool(const TransferTask& task, const ModelConfig& model,
                        std::uint64_t master_seed, int trial) {
  RngStream rng(master_seed, make_stream_id({static_cast<std::uint64_t>(trial), kPoolStream}));
  return build_predicate_pool(task, model.pool, rng);
}

// Ensemble method: grid-select (tau, gamma) on target_train accuracy with an
// inner seed, then train with the trial's seed.
TrialRecord run_ensemble_method(const TransferTask& task, const ModelConfig& model,
                                const ExperimentOptions& opt, int trial, bool with_invariant) {
  const PredicatePool pool = make_pool(task, model, opt.master_seed, trial);
  const std::vector<double> taus = with_invariant ? model.tau_grid : std::vector<double>{0.0};

  double tau = taus.front();
  double gamma = model.gamma_grid.front();
  if (taus.size() * model.gamma_grid.size() > 1) {
    double best = -1.0;
    for (const double t : taus) {
      for (const double g : model.gamma_grid) {
        const TrainConfig tc = train_config(model, t, g, opt.master_seed ^ kInnerSeedSalt, trial);
        const TrainResult r = train_setrlusi(task, pool, tc);
        const double acc = accuracy_of(ensemble_predict(r.ensemble, task.target_train.features).classes,
                                       task.target_train.y());
        if (acc > best) {
          best = acc;
          tau = t;
          gamma = g;
        }
      }
    }
  }

  const TrainResult result = train_setrlusi(task, pool, train_config(model, tau, gamma, opt.master_seed, trial));
  TrialRecord rec;
  rec.accuracy = accuracy_of(ensemble_predict(result.ensemble, task.target_test.features).classes,
                             task.target_test.y());
  for (const auto& r : result.trace) {
    rec.h_index.push_back(r.round);
    rec.test_error.push_back(r.test_error);
  }
  return rec;
}

// Baseline: one weak learner on the full target training set with the
// all-ones invariant.
TrialRecord run_single_lusi(const TransferTask& task, const ModelConfig& model) {
  const auto fit = [&](double tau) {
    HyperParams hp;
    hp.tau = tau;
    hp.lambda = model.lambda;
    hp.kernel = model.kernel;
    hp.regularizer_mode = model.regularizer_mode;
    return fit_weak_learner(task.target_train.features, task.target_train.y(),
                            Eigen::VectorXd::Ones(task.target_train.size()), hp);
  };
  double tau = model.tau_grid.front();
  if (model.tau_grid.size() > 1) {
    double best = -1.0;
    for (const double t : model.tau_grid) {
      const WeakLearner l = fit(t);
      const double acc = 1.0 - raw_weak_error(l, task.target_train.features, task.target_train.y());
      if (acc > best) {
        best = acc;
        tau = t;
      }
    }
  }
  const WeakLearner learner = fit(tau);
  TrialRecord rec;
  const double err = raw_weak_error(learner, task.target_test.features, task.target_test.y());
  rec.accuracy = 1.0 - err;
  rec.h_index = {1};
  rec.test_error = {err};
  return rec;
}

std::vector<TrialRecord> run_trial(const LoadedDomains& domains, const Variant& variant,
                                   const ModelConfig& model, const ExperimentOptions& opt,
                                   int trial) {
  const TransferTask task = build_trial_task(domains, variant, trial, model.scaling);
  std::vector<TrialRecord> out;
  for (const auto& method : opt.methods) {
    const auto start = std::chrono::steady_clock::now();
    TrialRecord rec;
    if (method == kMethodSetrlusi) {
      rec = run_ensemble_method(task, model, opt, trial, true);
    } else if (method == kMethodNoInvariant) {
      rec = run_ensemble_method(task, model, opt, trial, false);
    } else {
      rec = run_single_lusi(task, model);
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    rec.task = variant.name;
    rec.method = method;
    rec.trial = trial;
    rec.seed = opt.master_seed;
    rec.wall_time_seconds = opt.record_wall_time ? elapsed.count() : 0.0;
    out.push_back(std::move(rec));
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

std::string sanitize(const std::string& s) {
  std::string out;
  for (const char c : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += keep ? c : '_';
  }
  return out;
}

ordered_json record_to_json(const TrialRecord& r) {
  ordered_json j;
  j["task"] = r.task;
  j["method"] = r.method;
  j["trial"] = r.trial;
  j["seed"] = r.seed;
  j["accuracy"] = r.accuracy;
  j["wall_time_seconds"] = r.wall_time_seconds;
  j["h_index"] = r.h_index;
  ordered_json errs = ordered_json::array();
  for (const double e : r.test_error) {
    if (std::isnan(e)) {
      errs.push_back(nullptr);
    } else {
      errs.push_back(e);
    }
  }
  j["test_error"] = std::move(errs);
  return j;
}

template <typename T, typename F>
std::string join_list(const std::vector<T>& values, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ';';
    out += fmt(values[i]);
  }
  return out;
}

std::string record_to_csv(const TrialRecord& r) {
  return text::quote_field(r.task) + "," + text::quote_field(r.method) + "," +
         std::to_string(r.trial) + "," + std::to_string(r.seed) + "," +
         text::format_double(r.accuracy) + "," + text::format_double(r.wall_time_seconds) + "," +
         join_list(r.h_index, [](int h) { return std::to_string(h); }) + "," +
         join_list(r.test_error, [](double e) { return text::format_double(e); });
}

TrialRecord aggregate_record(const ExperimentResult& res) {
  TrialRecord agg;
  agg.task = res.task_name;
  agg.method = res.method_name;
  agg.trial = -1;
  agg.seed = res.master_seed;
  agg.accuracy = res.accuracy_mean;
  agg.wall_time_seconds = res.wall_time_seconds;
  for (const auto& row : convergence_curve(res.records)) {
    agg.h_index.push_back(row.h);
    agg.test_error.push_back(row.mean_test_error);
  }
  return agg;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

TrialRecord record_from_json(const json& j) {
  TrialRecord r;
  r.task = j.at("task").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.trial = j.at("trial").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.accuracy = j.at("accuracy").get<double>();
  r.wall_time_seconds = j.at("wall_time_seconds").get<double>();
  r.h_index = j.at("h_index").get<std::vector<int>>();
  for (const auto& e : j.at("test_error")) {
    r.test_error.push_back(e.is_null() ? std::nan("") : e.get<double>());
  }
  return r;
}

TrialRecord record_from_csv(const std::vector<std::string>& f, std::size_t line_no) {
  const auto fail = [&](const std::string& why) {
    return DataError("results line " + std::to_string(line_no) + ": " + why);
  };
  if (f.size() != 8) throw fail("expected 8 columns");
  TrialRecord r;
  r.task = f[0];
  r.method = f[1];
  try {
    r.trial = std::stoi(f[2]);
    r.seed = std::stoull(f[3]);
  } catch (const std::exception&) {
    throw fail("bad trial or seed");
  }
  if (!text::parse_double(f[4], r.accuracy) || !text::parse_double(f[5], r.wall_time_seconds)) {
    throw fail("bad accuracy or wall time");
  }
  const auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    if (s.empty()) return parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) parts.push_back(item);
    return parts;
  };
  for (const auto& h : split(f[6])) r.h_index.push_back(std::stoi(h));
  for (const auto& e : split(f[7])) {
    double v = 0.0;
    if (!text::parse_double(e, v)) throw fail("bad test_error entry '" + e + "'");
    r.test_error.push_back(v);
  }
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API
// ---------------------------------------------------------------------------

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    ExperimentConfig config;
    if (doc.contains("tasks")) {
      for (const auto& t : doc.at("tasks")) config.tasks.push_back(parse_task(t, base_dir));
    } else if (doc.contains("task")) {
      config.tasks.push_back(parse_task(doc.at("task"), base_dir));
    }
    config.model = parse_model(doc.value("model", json::object()));
    config.experiment = parse_options(doc.value("experiment", json::object()), base_dir);
    validate_config(config);
    return config;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str(), path.parent_path());
}

LoadedDomains load_task_domains(const TaskConfig& task) {
  LoadedDomains out;
  out.name = task.name;
  try {
    if (const auto* in = std::get_if<CsvDomainsInput>(&task.input)) {
      for (const auto& p : in->source_csvs) out.sources.push_back(load_csv_dataset(p, task.schema));
      out.target = load_csv_dataset(in->target_csv, task.schema);
      for (const auto& s : out.sources) {
        if (!s.has_both_classes()) {
          out.warnings.push_back("source '" + s.name + "' has a single class");
        }
      }
    } else if (const auto* in = std::get_if<ClusteredCsvInput>(&task.input)) {
      const DomainDataset data = load_csv_dataset(in->csv, task.schema);
      const Eigen::VectorXi assignment =
          kmeans_cluster(data, in->cluster_features, in->k, in->cluster_seed);
      DomainPartition part = make_transfer_task(data, assignment, in->target_cluster);
      out.sources = std::move(part.sources);
      out.target = std::move(part.target);
      out.warnings = std::move(part.warnings);
    } else {
      const auto& syn = std::get<SyntheticInput>(task.input);
      std::vector<DomainDataset> domains = gen_synthetic_domains(syn.spec);
      for (const auto i : syn.source_domains) out.sources.push_back(domains[i]);
      out.target = domains[syn.target_domain];
    }
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError("task '" + task.name + "': " + e.what());
  }
  return out;
}

std::vector<ExperimentResult> aggregate_records(const std::vector<TrialRecord>& records,
                                                std::uint64_t master_seed) {
  std::vector<ExperimentResult> out;
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.task, r.method);
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, out.size()).first;
      ExperimentResult res;
      res.task_name = r.task;
      res.method_name = r.method;
      res.master_seed = master_seed ? master_seed : r.seed;
      out.push_back(std::move(res));
    }
    out[it->second].records.push_back(r);
  }
  for (auto& res : out) {
    std::vector<double> acc;
    std::vector<double> time;
    for (const auto& r : res.records) {
      acc.push_back(r.accuracy);
      time.push_back(r.wall_time_seconds);
    }
    res.trials = static_cast<int>(res.records.size());
    res.accuracy_mean = mean_of(acc);
    res.accuracy_std = sample_std(acc);
    res.wall_time_seconds = mean_of(time);
  }
  return out;
}

std::vector<ExperimentResult> run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  std::vector<LoadedDomains> domains;
  for (const auto& t : config.tasks) domains.push_back(load_task_domains(t));

  const std::vector<Variant> variants = expand_variants(config);
  const int trials = config.experiment.trials;
  const std::size_t jobs = variants.size() * static_cast<std::size_t>(trials);
  std::vector<std::vector<TrialRecord>> slots(jobs);
  std::vector<std::exception_ptr> errors(jobs);

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const Variant& v = variants[job / static_cast<std::size_t>(trials)];
      const int trial = static_cast<int>(job % static_cast<std::size_t>(trials));
      try {
        slots[job] = run_trial(domains[v.domains_index], v, config.model, config.experiment, trial);
      } catch (...) {
        errors[job] = std::current_exception();
      }
    }
  };
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(config.experiment.workers), jobs);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  for (std::size_t job = 0; job < jobs; ++job) {
    if (!errors[job]) continue;
    const Variant& v = variants[job / static_cast<std::size_t>(trials)];
    const auto where = "task '" + v.name + "' trial " + std::to_string(job % static_cast<std::size_t>(trials));
    try {
      std::rethrow_exception(errors[job]);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    } catch (const IoError& e) {
      throw IoError(where + ": " + e.what());
    } catch (const std::exception& e) {
      throw TrainingError(where + ": " + e.what());
    }
  }

  std::vector<TrialRecord> all;
  for (auto& s : slots) {
    for (auto& r : s) all.push_back(std::move(r));
  }
  // Jobs are variant-major then trial, so grouping by (task, method) keeps
  // each group in trial order.
  std::vector<ExperimentResult> results = aggregate_records(all, config.experiment.master_seed);
  for (auto& res : results) {
    const auto v = std::find_if(variants.begin(), variants.end(),
                                [&](const Variant& x) { return x.name == res.task_name; });
    json snap{{"model", model_snapshot(config.model)},
              {"trials", trials},
              {"master_seed", config.experiment.master_seed}};
    if (v != variants.end()) {
      snap["task"] = {{"name", v->name},
                      {"split_fraction", v->task.split_fraction},
                      {"seed", v->task.seed},
                      {"source_limit", v->task.source_limit}};
    }
    res.config_snapshot = snap.dump();
  }
  return results;
}

std::vector<ConvergenceRow> convergence_curve(const std::vector<TrialRecord>& records) {
  std::map<int, std::vector<double>> by_round;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.h_index.size() && i < r.test_error.size(); ++i) {
      by_round[r.h_index[i]].push_back(r.test_error[i]);
    }
  }
  std::vector<ConvergenceRow> out;
  for (const auto& [h, errs] : by_round) out.push_back({h, mean_of(errs), sample_std(errs)});
  return out;
}

ResultFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? ResultFormat::csv : ResultFormat::json_lines;
}

void emit_results(const std::vector<ExperimentResult>& results,
                  const std::filesystem::path& output, ResultFormat format) {
  if (results.empty()) throw DataError("emit_results: nothing to write");

  std::string body;
  if (format == ResultFormat::csv) {
    body = "task,method,trial,seed,accuracy,wall_time_seconds,h_index,test_error\n";
  }
  json summary = json::array();
  for (const auto& res : results) {
    std::vector<TrialRecord> rows = res.records;
    rows.push_back(aggregate_record(res));
    for (const auto& r : rows) {
      body += format == ResultFormat::csv ? record_to_csv(r) : record_to_json(r).dump();
      body += '\n';
    }
    json entry{{"task", res.task_name},
               {"method", res.method_name},
               {"trials", res.trials},
               {"accuracy_mean", res.accuracy_mean},
               {"accuracy_std", res.accuracy_std},
               {"wall_time_seconds", res.wall_time_seconds},
               {"master_seed", res.master_seed}};
    if (!res.config_snapshot.empty()) entry["config"] = json::parse(res.config_snapshot);
    summary.push_back(std::move(entry));

    std::string curve = "h,mean_test_error,std_test_error\n";
    for (const auto& row : convergence_curve(res.records)) {
      curve += std::to_string(row.h) + "," + text::format_double(row.mean_test_error) + "," +
               text::format_double(row.std_test_error) + "\n";
    }
    const auto curve_path = output.parent_path() /
                            (output.stem().string() + "." + sanitize(res.task_name) + "." +
                             sanitize(res.method_name) + ".convergence.csv");
    write_file(curve_path, curve);
  }
  write_file(output, body);
  write_file(output.string() + ".summary.json", summary.dump(2) + "\n");
}

std::vector<TrialRecord> parse_results(const std::filesystem::path& path, ResultFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open results '" + path.string() + "'");
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t line_no = 0;
  if (format == ResultFormat::csv) {
    std::getline(in, line);
    ++line_no;
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    TrialRecord r;
    if (format == ResultFormat::csv) {
      r = record_from_csv(text::split_record(line), line_no);
    } else {
      try {
        r = record_from_json(json::parse(line));
      } catch (const json::exception& e) {
        throw DataError("results line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (r.trial >= 0) out.push_back(std::move(r));
  }
  return out;
}

BenchResult run_scaling_benchmark(const BenchConfig& config) {
  if (config.q_values.size() < 2) throw ConfigError("bench: need at least two q values");
  if (config.repeats < 1 || config.rounds < 1 || config.n_sources < 1) {
    throw ConfigError("bench: repeats, rounds and n_sources must be >= 1");
  }
  BenchResult out;
  for (const auto q : config.q_values) {
    // Fixed sources and test set; only the labeled target size changes.
    SyntheticSpec spec = twelve_domain_spec(config.source_size, config.seed);
    std::vector<DomainDataset> domains = gen_synthetic_domains(spec);
    TransferTask task;
    task.name = "bench";
    for (std::size_t i = 0; i < config.n_sources; ++i) task.sources.push_back(domains[1 + i % 11]);
    SyntheticSpec target_spec = spec;
    target_spec.domains = {spec.domains[0]};
    target_spec.n_per_domain = q + config.test_size;
    target_spec.seed = config.seed + static_cast<std::uint64_t>(q);
    const DomainDataset target = gen_synthetic_domains(target_spec)[0];
    const double fraction = static_cast<double>(q) / static_cast<double>(target.size());
    auto [train, test] = split_labeled_target(target, fraction, config.seed);
    task.target_train = std::move(train);
    task.target_test = std::move(test);
    task = scale_task(task, config.model.scaling);

    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < config.repeats; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      const PredicatePool pool = make_pool(task, config.model, config.seed, 0);
      TrainConfig tc = train_config(config.model, config.model.tau_grid.front(),
                                    config.model.gamma_grid.front(), config.seed, 0);
      tc.rounds = config.rounds;
      const TrainResult r = train_setrlusi(task, pool, tc);
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      best = std::min(best, elapsed.count());
      if (r.ensemble.empty()) throw TrainingError("bench: empty ensemble");
    }
    out.points.push_back({task.target_train.size(), best});
  }
  // Least-squares slope on log-log axes.
  const auto n = static_cast<double>(out.points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : out.points) {
    const double x = std::log(static_cast<double>(p.q));
    const double y = std::log(p.seconds);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  out.loglog_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return out;
}

}  // namespace setrlusi
