#include "hinet/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "hinet/error.hpp"
#include "hinet/rng.hpp"
#include "hinet/train.hpp"

namespace hinet {

namespace fs = std::filesystem;

std::string_view to_string(DgpVariant variant) {
  switch (variant) {
    case DgpVariant::only_individual: return "only_individual";
    case DgpVariant::only_spillover: return "only_spillover";
    case DgpVariant::both: return "both";
  }
  return "both";
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::beta_xt_grid: return "beta_xt_grid";
    case SweepAxis::exposure_kinds: return "exposure_kinds";
    case SweepAxis::dgp_variant: return "dgp_variant";
  }
  return "beta_xt_grid";
}

DgpVariant parse_dgp_variant(std::string_view text) {
  for (auto v : {DgpVariant::only_individual, DgpVariant::only_spillover, DgpVariant::both}) {
    if (text == to_string(v)) return v;
  }
  throw InvalidParameter("dgp_variants: unknown variant '" + std::string(text) + "'");
}

SweepAxis parse_sweep_axis(std::string_view text) {
  for (auto a : {SweepAxis::beta_xt_grid, SweepAxis::exposure_kinds, SweepAxis::dgp_variant}) {
    if (text == to_string(a)) return a;
  }
  throw InvalidParameter("sweep_axis: unknown axis '" + std::string(text) + "'");
}

DgpParams apply_variant(DgpParams params, DgpVariant variant) {
  if (variant == DgpVariant::only_individual) params.beta_spillover = 0.0;
  if (variant == DgpVariant::only_spillover) params.beta_individual = 0.0;
  return params;
}

void ExperimentConfig::validate() const {
  dgp.validate();
  grid.validate();
  if (n_per_split < 10) throw InvalidParameter("n_per_split: must be at least 10");
  if (estimators.empty()) throw InvalidParameter("estimators: list must not be empty");
  if (seeds.empty()) throw InvalidParameter("seeds: list must not be empty");
  if (m < 1) throw InvalidParameter("m: must be positive");
  if (replicates < 1) throw InvalidParameter("replicates: must be positive");
  if (!(alpha_threshold >= 0.0)) throw InvalidParameter("alpha_threshold: must be non-negative");
  if (jobs < 1) throw InvalidParameter("jobs: must be positive");
  if (output_dir.empty()) throw InvalidParameter("output_dir: must not be empty");
  if (graph.kind == GraphKind::ba && (graph.ba_m < 1 || graph.ba_m >= n_per_split)) {
    throw InvalidParameter("ba_m: must lie in [1, n_per_split)");
  }
  if (!(graph.homophily.target_avg_degree > 0.0)) throw InvalidParameter("homophily_degree: must be positive");
  if (!(graph.homophily.noise_sd >= 0.0)) throw InvalidParameter("homophily_noise_sd: must be non-negative");
  for (double b : beta_xt_grid) {
    if (!(b >= 0.0)) throw InvalidParameter("beta_xt_grid: values must be non-negative");
  }
  for (double h : grid.hidden_sizes) {
    if (h < 1) throw InvalidParameter("hidden_sizes: values must be positive");
  }
  for (int e : grid.epochs) {
    if (e < 1) throw InvalidParameter("epochs: values must be positive");
  }
  for (double lr : grid.learning_rates) {
    if (!(lr > 0.0)) throw InvalidParameter("learning_rates: values must be positive");
  }
  for (double p : grid.dropouts) {
    if (!(p >= 0.0 && p < 1.0)) throw InvalidParameter("dropouts: values must lie in [0, 1)");
  }
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["d"] = c.dgp.d;
  j["beta_xt"] = c.dgp.beta_xt;
  j["beta_individual"] = c.dgp.beta_individual;
  j["beta_spillover"] = c.dgp.beta_spillover;
  j["beta_xy"] = c.dgp.beta_xy;
  j["beta_xny"] = c.dgp.beta_xny;
  j["beta_eps"] = c.dgp.beta_eps;
  j["exposure_kind"] = std::string(to_string(c.dgp.exposure_kind));
  j["target_treated_rate"] = c.dgp.target_treated_rate;
  j["dgp_seed"] = c.dgp.seed;
  j["graph_kind"] = std::string(to_string(c.graph.kind));
  j["ba_m"] = c.graph.ba_m;
  j["homophily_degree"] = c.graph.homophily.target_avg_degree;
  j["homophily_noise_sd"] = c.graph.homophily.noise_sd;
  j["n_per_split"] = c.n_per_split;
  j["hidden_sizes"] = c.grid.hidden_sizes;
  j["epochs"] = c.grid.epochs;
  j["learning_rates"] = c.grid.learning_rates;
  j["dropouts"] = c.grid.dropouts;
  j["alphas"] = c.grid.alphas;
  j["alpha_threshold"] = c.alpha_threshold;
  Json est = Json::array();
  for (auto k : c.estimators) est.push_back(std::string(to_string(k)));
  j["estimators"] = std::move(est);
  j["seeds"] = c.seeds;
  j["data_seed"] = c.data_seed;
  j["m"] = c.m;
  j["replicates"] = c.replicates;
  j["metric_seed"] = c.metric_seed;
  j["output_dir"] = c.output_dir;
  j["jobs"] = c.jobs;
  j["sweep_axis"] = std::string(to_string(c.sweep_axis));
  j["beta_xt_grid"] = c.beta_xt_grid;
  Json kinds = Json::array();
  for (auto k : c.exposure_kinds) kinds.push_back(std::string(to_string(k)));
  j["exposure_kinds"] = std::move(kinds);
  Json variants = Json::array();
  for (auto v : c.dgp_variants) variants.push_back(std::string(to_string(v)));
  j["dgp_variants"] = std::move(variants);
  return j;
}

namespace {

template <class T>
T get_as(const Json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidParameter(key + ": wrong type");
  }
}

template <class T>
void read_key(const Json& j, const std::string& key, T& out) {
  if (j.contains(key)) out = get_as<T>(j, key);
}

}  // namespace

ExperimentConfig experiment_config_from_json(const Json& j) {
  if (!j.is_object()) throw InvalidParameter("experiment config: expected a JSON object");
  ExperimentConfig c;
  const Json known = to_json(c);
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw InvalidParameter(item.key() + ": unknown config key");
  }
  read_key(j, "d", c.dgp.d);
  read_key(j, "beta_xt", c.dgp.beta_xt);
  read_key(j, "beta_individual", c.dgp.beta_individual);
  read_key(j, "beta_spillover", c.dgp.beta_spillover);
  read_key(j, "beta_xy", c.dgp.beta_xy);
  read_key(j, "beta_xny", c.dgp.beta_xny);
  read_key(j, "beta_eps", c.dgp.beta_eps);
  if (j.contains("exposure_kind")) c.dgp.exposure_kind = parse_exposure_kind(get_as<std::string>(j, "exposure_kind"));
  read_key(j, "target_treated_rate", c.dgp.target_treated_rate);
  read_key(j, "dgp_seed", c.dgp.seed);
  if (j.contains("graph_kind")) c.graph.kind = parse_graph_kind(get_as<std::string>(j, "graph_kind"));
  read_key(j, "ba_m", c.graph.ba_m);
  read_key(j, "homophily_degree", c.graph.homophily.target_avg_degree);
  read_key(j, "homophily_noise_sd", c.graph.homophily.noise_sd);
  read_key(j, "n_per_split", c.n_per_split);
  read_key(j, "hidden_sizes", c.grid.hidden_sizes);
  read_key(j, "epochs", c.grid.epochs);
  read_key(j, "learning_rates", c.grid.learning_rates);
  read_key(j, "dropouts", c.grid.dropouts);
  read_key(j, "alphas", c.grid.alphas);
  read_key(j, "alpha_threshold", c.alpha_threshold);
  if (j.contains("estimators")) {
    c.estimators.clear();
    for (const auto& name : get_as<std::vector<std::string>>(j, "estimators")) {
      try {
        c.estimators.push_back(parse_estimator_kind(name));
      } catch (const InvalidParameter& e) {
        throw InvalidParameter(std::string("estimators: ") + e.what());
      }
    }
  }
  read_key(j, "seeds", c.seeds);
  read_key(j, "data_seed", c.data_seed);
  read_key(j, "m", c.m);
  read_key(j, "replicates", c.replicates);
  read_key(j, "metric_seed", c.metric_seed);
  read_key(j, "output_dir", c.output_dir);
  read_key(j, "jobs", c.jobs);
  if (j.contains("sweep_axis")) c.sweep_axis = parse_sweep_axis(get_as<std::string>(j, "sweep_axis"));
  read_key(j, "beta_xt_grid", c.beta_xt_grid);
  if (j.contains("exposure_kinds")) {
    c.exposure_kinds.clear();
    for (const auto& name : get_as<std::vector<std::string>>(j, "exposure_kinds")) {
      c.exposure_kinds.push_back(parse_exposure_kind(name));
    }
  }
  if (j.contains("dgp_variants")) {
    c.dgp_variants.clear();
    for (const auto& name : get_as<std::vector<std::string>>(j, "dgp_variants")) {
      c.dgp_variants.push_back(parse_dgp_variant(name));
    }
  }
  c.validate();
  return c;
}

namespace {

Json parse_scalar(const std::string& key, const std::string& text, const Json& like) {
  try {
    std::size_t used = 0;
    if (like.is_boolean()) {
      if (text == "true") return true;
      if (text == "false") return false;
      throw InvalidParameter(key + ": expected true or false, got '" + text + "'");
    }
    if (like.is_number_unsigned()) {
      if (!text.empty() && text[0] == '-') throw InvalidParameter(key + ": must be non-negative");
      const unsigned long long v = std::stoull(text, &used);
      if (used != text.size()) throw InvalidParameter(key + ": not an integer: '" + text + "'");
      return v;
    }
    if (like.is_number_integer()) {
      const long long v = std::stoll(text, &used);
      if (used != text.size()) throw InvalidParameter(key + ": not an integer: '" + text + "'");
      return v;
    }
    if (like.is_number_float()) {
      const double v = std::stod(text, &used);
      if (used != text.size()) throw InvalidParameter(key + ": not a number: '" + text + "'");
      return v;
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const InvalidParameter*>(&e) != nullptr) throw;
    throw InvalidParameter(key + ": cannot parse '" + text + "'");
  }
  return text;
}

}  // namespace

Json apply_overrides(Json document, const std::map<std::string, std::string>& overrides) {
  for (const auto& [key, text] : overrides) {
    if (!document.contains(key)) throw InvalidParameter(key + ": unknown config key");
    const Json& current = document[key];
    if (current.is_array()) {
      // Element type follows the default list, which is never empty for
      // numeric keys.
      const Json like = current.empty() ? Json(std::string()) : current.front();
      Json list = Json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) list.push_back(parse_scalar(key, item, like));
      }
      document[key] = std::move(list);
    } else {
      document[key] = parse_scalar(key, text, current);
    }
  }
  return document;
}

fs::path resolve_output_dir(const ExperimentConfig& config) {
  fs::path dir(config.output_dir);
  if (dir.is_relative()) {
    if (const char* root = std::getenv("HINET_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
      return fs::path(root) / dir;
    }
  }
  return dir;
}

std::array<std::uint64_t, 3> split_seeds(std::uint64_t data_seed) {
  return {derive_seed(data_seed, 1), derive_seed(data_seed, 2), derive_seed(data_seed, 3)};
}

std::array<Dataset, 3> generate_splits(const ExperimentConfig& config) {
  const auto seeds = split_seeds(config.data_seed);
  return {generate_dataset(config.n_per_split, config.graph, config.dgp, seeds[0], SplitTag::train),
          generate_dataset(config.n_per_split, config.graph, config.dgp, seeds[1], SplitTag::validation),
          generate_dataset(config.n_per_split, config.graph, config.dgp, seeds[2], SplitTag::test)};
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

namespace {

constexpr std::array<SplitTag, 3> kSplitTags{SplitTag::train, SplitTag::validation, SplitTag::test};

std::mutex log_mutex;

void log_line(const std::string& text) {
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << text << '\n';
}

// Runs task(0..count-1) on `jobs` threads. Tasks must not throw.
void run_pool(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
  for (auto& t : threads) t.join();
}

// Prepares a fresh output subdirectory.
fs::path claim_directory(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) {
      throw InvalidParameter("output directory " + dir.string() + " already exists; pass --force to overwrite");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  return dir;
}

Json manifest_header(const std::string& command, const ExperimentConfig& config) {
  Json j;
  j["format"] = "hinet-manifest";
  j["version"] = 1;
  j["command"] = command;
  j["config"] = to_json(config);
  return j;
}

fs::path split_file(const fs::path& data_dir, SplitTag tag) {
  return data_dir / (std::string(to_string(tag)) + ".json");
}

Json write_splits(const std::array<Dataset, 3>& splits, const fs::path& data_dir) {
  Json entries = Json::array();
  for (const Dataset& ds : splits) {
    const fs::path file = split_file(data_dir, ds.split_tag);
    write_json_file(file, to_json(ds));
    Json e;
    e["split_tag"] = std::string(to_string(ds.split_tag));
    e["file"] = file.filename().string();
    e["split_seed"] = ds.split_seed;
    e["n"] = ds.size();
    e["edge_count"] = ds.graph.edge_count();
    e["treated_fraction"] = treated_fraction(ds.treatments);
    e["params"] = to_json(ds.params);
    entries.push_back(std::move(e));
  }
  return entries;
}

Dataset load_split(const fs::path& data_dir, SplitTag tag) {
  const fs::path file = split_file(data_dir, tag);
  if (!fs::exists(file)) {
    throw InvalidParameter("missing dataset " + file.string() + "; run the generate command first");
  }
  return dataset_from_json(read_json_file(file));
}

fs::path run_dir(const fs::path& root, EstimatorKind kind, std::uint64_t seed) {
  return root / std::string(to_string(kind)) / ("seed_" + std::to_string(seed));
}

std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

struct CellResult {
  bool ok = false;
  std::string error;
  MetricReport report;
  BalancingReport balancing;
  double selected_alpha = 0.0;
};

}  // namespace

int cmd_generate(const ExperimentConfig& config, const CommandOptions& options) {
  config.validate();
  const fs::path data_dir = claim_directory(resolve_output_dir(config) / "data", options.force);
  const auto splits = generate_splits(config);
  Json manifest = manifest_header("generate", config);
  manifest["splits"] = write_splits(splits, data_dir);
  write_json_file(data_dir / "manifest.json", manifest);
  log_line("generate: wrote 3 splits of " + std::to_string(config.n_per_split) + " nodes to " + data_dir.string());
  return kExitOk;
}

int cmd_train(const ExperimentConfig& config, const CommandOptions& options) {
  config.validate();
  const fs::path root = resolve_output_dir(config);
  const Dataset train_split = load_split(root / "data", SplitTag::train);
  const Dataset validation_split = load_split(root / "data", SplitTag::validation);
  const fs::path runs_dir = claim_directory(root / "runs", options.force);

  struct Job {
    EstimatorKind kind;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto kind : config.estimators) {
    for (auto seed : config.seeds) jobs.push_back({kind, seed});
  }
  std::vector<Json> entries(jobs.size());
  run_pool(jobs.size(), config.jobs, [&](std::size_t i) {
    const Job& job = jobs[i];
    Json e;
    e["estimator"] = std::string(to_string(job.kind));
    e["seed"] = job.seed;
    try {
      TunedModel tuned = tune_and_train(job.kind, train_split, validation_split, config.grid, job.seed,
                                        config.alpha_threshold);
      const fs::path dir = run_dir(runs_dir, job.kind, job.seed);
      write_json_file(dir / "checkpoint.json", checkpoint_to_json(*tuned.trained.model));
      write_text_file(dir / "history.csv", history_csv(tuned.trained.history));
      Json tuning = to_json(tuned.tuning);
      if (!uses_alpha(job.kind)) tuning.erase("alpha_table");
      write_json_file(dir / "tuning.json", tuning);
      write_text_file(dir / "loss_table.csv", loss_table_csv(tuned.tuning));
      e["status"] = "ok";
      e["selected_config"] = to_json(tuned.tuning.selected_config);
      log_line("train: " + std::string(to_string(job.kind)) + " seed " + std::to_string(job.seed) +
               " validation loss " + fixed(tuned.trained.final_validation_loss(), 6));
    } catch (const std::exception& ex) {
      e["status"] = "failed";
      e["error"] = ex.what();
      log_line("train: " + std::string(to_string(job.kind)) + " seed " + std::to_string(job.seed) +
               " failed: " + ex.what());
    }
    entries[i] = std::move(e);
  });

  Json manifest = manifest_header("train", config);
  manifest["runs"] = entries;
  write_json_file(runs_dir / "manifest.json", manifest);
  for (const auto& e : entries) {
    if (e["status"] != "ok") return kExitPartialFailure;
  }
  return kExitOk;
}

int cmd_evaluate(const ExperimentConfig& config, const CommandOptions& options) {
  config.validate();
  const fs::path root = resolve_output_dir(config);
  const Dataset test = load_split(root / "data", SplitTag::test);
  const fs::path runs_dir = root / "runs";
  const fs::path eval_dir = claim_directory(root / "eval", options.force);

  Json manifest = manifest_header("evaluate", config);
  Json entries = Json::array();
  std::string csv = "estimator,runs,pehne_mean,pehne_sd,cnee_mean,cnee_sd,factual_mse_mean,factual_mse_sd\n";
  bool partial = false;
  auto add_row = [&](const std::string& name, const std::vector<MetricReport>& reports) {
    std::vector<double> pe, cn, fm;
    for (const auto& r : reports) {
      pe.push_back(r.pehne);
      cn.push_back(r.cnee);
      fm.push_back(r.factual_mse);
    }
    const Aggregate a = aggregate(pe), b = aggregate(cn), c = aggregate(fm);
    csv += name + "," + std::to_string(reports.size()) + "," + csv_number(a.mean) + "," + csv_number(a.sd) + "," +
           csv_number(b.mean) + "," + csv_number(b.sd) + "," + csv_number(c.mean) + "," + csv_number(c.sd) + "\n";
  };

  for (auto kind : config.estimators) {
    std::vector<MetricReport> reports;
    for (auto seed : config.seeds) {
      Json e;
      e["estimator"] = std::string(to_string(kind));
      e["seed"] = seed;
      const fs::path ckpt = run_dir(runs_dir, kind, seed) / "checkpoint.json";
      if (!fs::exists(ckpt)) {
        e["status"] = "missing";
        partial = true;
        entries.push_back(std::move(e));
        log_line("evaluate: no checkpoint at " + ckpt.string());
        continue;
      }
      auto model = checkpoint_from_json(read_json_file(ckpt));
      if (model->input_dim() != test.dim()) {
        throw InvalidParameter("checkpoint " + ckpt.string() + " expects " + std::to_string(model->input_dim()) +
                               " features but the test set has " + std::to_string(test.dim()));
      }
      const MetricReport report = evaluate_model(*model, test, config.m, config.metric_seed, config.replicates);
      const fs::path dir = run_dir(eval_dir, kind, seed);
      write_json_file(dir / "metrics.json", to_json(report));
      write_text_file(dir / "per_rate.csv", per_rate_csv(report));
      e["status"] = "ok";
      e["pehne"] = report.pehne;
      e["cnee"] = report.cnee;
      entries.push_back(std::move(e));
      reports.push_back(report);
      log_line("evaluate: " + std::string(to_string(kind)) + " seed " + std::to_string(seed) + " pehne " +
               fixed(report.pehne) + " cnee " + fixed(report.cnee));
    }
    add_row(std::string(to_string(kind)), reports);
  }
  if (options.include_oracle) {
    const NetworkFunction oracle = oracle_outcome_function(test);
    MetricReport report =
        counterfactual_report(oracle, oracle, test.size(), config.m, config.metric_seed, config.replicates);
    report.factual_mse = (potential_outcome_oracle(test, test.treatments) - test.outcomes).squaredNorm() /
                         static_cast<double>(test.size());
    write_json_file(eval_dir / "oracle" / "metrics.json", to_json(report));
    write_text_file(eval_dir / "oracle" / "per_rate.csv", per_rate_csv(report));
    Json e;
    e["estimator"] = "oracle";
    e["status"] = "ok";
    e["pehne"] = report.pehne;
    e["cnee"] = report.cnee;
    entries.push_back(std::move(e));
    add_row("oracle", {report});
  }
  write_text_file(eval_dir / "aggregate.csv", csv);
  manifest["test_split_seed"] = test.split_seed;
  manifest["evaluations"] = std::move(entries);
  write_json_file(eval_dir / "manifest.json", manifest);
  return partial ? kExitPartialFailure : kExitOk;
}

int cmd_sweep(const ExperimentConfig& config, const CommandOptions& options) {
  config.validate();
  const fs::path sweep_dir = claim_directory(resolve_output_dir(config) / "sweep", options.force);

  std::vector<std::string> labels;
  std::vector<ExperimentConfig> cells;
  switch (config.sweep_axis) {
    case SweepAxis::beta_xt_grid:
      for (double b : config.beta_xt_grid) {
        ExperimentConfig c = config;
        c.dgp.beta_xt = b;
        labels.push_back(format_double(b));
        cells.push_back(c);
      }
      break;
    case SweepAxis::exposure_kinds:
      for (auto k : config.exposure_kinds) {
        ExperimentConfig c = config;
        c.dgp.exposure_kind = k;
        labels.emplace_back(to_string(k));
        cells.push_back(c);
      }
      break;
    case SweepAxis::dgp_variant:
      for (auto v : config.dgp_variants) {
        ExperimentConfig c = config;
        c.dgp = apply_variant(config.dgp, v);
        labels.emplace_back(to_string(v));
        cells.push_back(c);
      }
      break;
  }
  if (cells.empty()) throw InvalidParameter(std::string(to_string(config.sweep_axis)) + ": no values to sweep");

  // Datasets for every axis value; the same data_seed keeps features and
  // graphs aligned across values where the parameters allow it.
  std::vector<std::array<Dataset, 3>> data;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    cells[k].validate();
    data.push_back(generate_splits(cells[k]));
    const fs::path data_dir = sweep_dir / labels[k] / "data";
    Json manifest = manifest_header("sweep", cells[k]);
    manifest["axis"] = std::string(to_string(config.sweep_axis));
    manifest["axis_value"] = labels[k];
    manifest["splits"] = write_splits(data.back(), data_dir);
    write_json_file(data_dir / "manifest.json", manifest);
  }

  struct Job {
    std::size_t cell;
    EstimatorKind kind;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    for (auto kind : config.estimators) {
      for (auto seed : config.seeds) jobs.push_back({k, kind, seed});
    }
  }
  std::vector<CellResult> results(jobs.size());
  run_pool(jobs.size(), config.jobs, [&](std::size_t i) {
    const Job& job = jobs[i];
    const auto& splits = data[job.cell];
    CellResult r;
    try {
      TunedModel tuned =
          tune_and_train(job.kind, splits[0], splits[1], config.grid, job.seed, config.alpha_threshold);
      Model& model = *tuned.trained.model;
      r.report = evaluate_model(model, splits[2], config.m, config.metric_seed, config.replicates);
      r.balancing = balancing_diagnostic(model, splits[2], derive_seed(config.metric_seed, job.seed));
      r.selected_alpha = tuned.tuning.selected_config.alpha;
      r.ok = true;
      log_line("sweep: " + labels[job.cell] + " " + std::string(to_string(job.kind)) + " seed " +
               std::to_string(job.seed) + " cnee " + fixed(r.report.cnee));
    } catch (const std::exception& ex) {
      r.error = ex.what();
      log_line("sweep: " + labels[job.cell] + " " + std::string(to_string(job.kind)) + " seed " +
               std::to_string(job.seed) + " failed: " + ex.what());
    }
    results[i] = std::move(r);
  });

  const std::string axis(to_string(config.sweep_axis));
  std::string csv =
      "axis,axis_value,estimator,seed,status,pehne,cnee,factual_mse,mmd_own_treatment,mmd_neighbor_treatment,"
      "selected_alpha\n";
  bool partial = false;
  Json failures = Json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& job = jobs[i];
    const CellResult& r = results[i];
    csv += axis + "," + labels[job.cell] + "," + std::string(to_string(job.kind)) + "," + std::to_string(job.seed) +
           ",";
    if (r.ok) {
      csv += "ok," + csv_number(r.report.pehne) + "," + csv_number(r.report.cnee) + "," +
             csv_number(r.report.factual_mse) + "," + csv_number(r.balancing.own_treatment) + "," +
             csv_number(r.balancing.neighbor_treatment) + "," + csv_number(r.selected_alpha) + "\n";
    } else {
      partial = true;
      csv += "failed,,,,,,\n";
      Json f;
      f["axis_value"] = labels[job.cell];
      f["estimator"] = std::string(to_string(job.kind));
      f["seed"] = job.seed;
      f["error"] = r.error;
      failures.push_back(std::move(f));
    }
  }
  write_text_file(sweep_dir / "results.csv", csv);

  Json plot;
  plot["axis"] = axis;
  plot["axis_values"] = labels;
  Json series = Json::array();
  for (auto kind : config.estimators) {
    Json s;
    s["estimator"] = std::string(to_string(kind));
    Json pe_mean = Json::array(), pe_sd = Json::array(), cn_mean = Json::array(), cn_sd = Json::array(),
         runs = Json::array();
    for (std::size_t k = 0; k < cells.size(); ++k) {
      std::vector<double> pe, cn;
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (jobs[i].cell == k && jobs[i].kind == kind && results[i].ok) {
          pe.push_back(results[i].report.pehne);
          cn.push_back(results[i].report.cnee);
        }
      }
      const Aggregate a = aggregate(pe), b = aggregate(cn);
      auto num = [&](double v) { return pe.empty() ? Json(nullptr) : Json(v); };
      pe_mean.push_back(num(a.mean));
      pe_sd.push_back(num(a.sd));
      cn_mean.push_back(num(b.mean));
      cn_sd.push_back(num(b.sd));
      runs.push_back(pe.size());
    }
    s["pehne_mean"] = std::move(pe_mean);
    s["pehne_sd"] = std::move(pe_sd);
    s["cnee_mean"] = std::move(cn_mean);
    s["cnee_sd"] = std::move(cn_sd);
    s["runs"] = std::move(runs);
    series.push_back(std::move(s));
  }
  plot["series"] = std::move(series);
  write_json_file(sweep_dir / "plot_data.json", plot);

  Json manifest = manifest_header("sweep", config);
  manifest["axis"] = axis;
  manifest["axis_values"] = labels;
  manifest["failures"] = std::move(failures);
  write_json_file(sweep_dir / "manifest.json", manifest);
  return partial ? kExitPartialFailure : kExitOk;
}

int cmd_report(const ExperimentConfig& config, const CommandOptions& options) {
  config.validate();
  const fs::path root = resolve_output_dir(config);
  const fs::path eval_dir = root / "eval";
  const fs::path sweep_dir = root / "sweep";
  if (!fs::exists(eval_dir) && !fs::exists(sweep_dir)) {
    throw InvalidParameter("nothing to report under " + root.string() + "; run evaluate or sweep first");
  }
  const fs::path report_dir = claim_directory(root / "report", options.force);

  std::ostringstream md;
  Json summary;
  summary["format"] = "hinet-report";
  summary["version"] = 1;
  if (fs::exists(eval_dir)) {
    md << "## Test-set metrics (mean ± SD over seeds)\n\n"
       << "| estimator | runs | PEHNE | CNEE | factual MSE |\n|---|---|---|---|---|\n";
    Json rows = Json::array();
    std::vector<std::string> names;
    for (auto kind : config.estimators) names.emplace_back(to_string(kind));
    if (fs::exists(eval_dir / "oracle")) names.emplace_back("oracle");
    for (const auto& name : names) {
      std::vector<double> pe, cn, fm;
      std::vector<fs::path> files;
      if (name == "oracle") {
        files.push_back(eval_dir / "oracle" / "metrics.json");
      } else {
        for (auto seed : config.seeds) {
          files.push_back(eval_dir / name / ("seed_" + std::to_string(seed)) / "metrics.json");
        }
      }
      for (const auto& f : files) {
        if (!fs::exists(f)) continue;
        const MetricReport r = metric_report_from_json(read_json_file(f));
        pe.push_back(r.pehne);
        cn.push_back(r.cnee);
        fm.push_back(r.factual_mse);
      }
      const Aggregate a = aggregate(pe), b = aggregate(cn), c = aggregate(fm);
      md << "| " << name << " | " << pe.size() << " | " << fixed(a.mean) << " ± " << fixed(a.sd) << " | "
         << fixed(b.mean) << " ± " << fixed(b.sd) << " | " << fixed(c.mean) << " ± " << fixed(c.sd) << " |\n";
      Json row;
      row["estimator"] = name;
      row["runs"] = pe.size();
      row["pehne_mean"] = a.mean;
      row["pehne_sd"] = a.sd;
      row["cnee_mean"] = b.mean;
      row["cnee_sd"] = b.sd;
      row["factual_mse_mean"] = c.mean;
      row["factual_mse_sd"] = c.sd;
      rows.push_back(std::move(row));
    }
    summary["evaluation"] = std::move(rows);
    md << "\n";
  }
  if (fs::exists(sweep_dir / "plot_data.json")) {
    const Json plot = read_json_file(sweep_dir / "plot_data.json");
    md << "## Sweep over " << plot["axis"].get<std::string>() << " (CNEE mean ± SD)\n\n| estimator |";
    for (const auto& v : plot["axis_values"]) md << " " << v.get<std::string>() << " |";
    md << "\n|---|";
    for (std::size_t k = 0; k < plot["axis_values"].size(); ++k) md << "---|";
    md << "\n";
    for (const auto& s : plot["series"]) {
      md << "| " << s["estimator"].get<std::string>() << " |";
      for (std::size_t k = 0; k < s["cnee_mean"].size(); ++k) {
        if (s["cnee_mean"][k].is_null()) {
          md << " n/a |";
        } else {
          md << " " << fixed(s["cnee_mean"][k].get<double>()) << " ± " << fixed(s["cnee_sd"][k].get<double>())
             << " |";
        }
      }
      md << "\n";
    }
    summary["sweep"] = plot;
  }
  write_text_file(report_dir / "report.md", md.str());
  write_json_file(report_dir / "report.json", summary);
  std::cout << md.str();
  return kExitOk;
}

}  // namespace hinet
