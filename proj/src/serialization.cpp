#include "hinet/serialization.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hinet/error.hpp"

namespace hinet {

namespace {

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from(const Json& j, const char* field) {
  if (!j.is_array()) throw FormatError(std::string(field) + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Json matrix_json(const FeatureMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

FeatureMatrix matrix_from(const Json& j, std::size_t rows, int cols, const char* field) {
  if (!j.is_array() || j.size() != rows) {
    throw FormatError(std::string(field) + ": expected " + std::to_string(rows) + " rows");
  }
  FeatureMatrix m(static_cast<Eigen::Index>(rows), cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != static_cast<std::size_t>(cols)) {
      throw FormatError(std::string(field) + ": row " + std::to_string(r) + " does not have " +
                        std::to_string(cols) + " entries");
    }
    for (int c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = j[r][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

const Json& member(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  return j[key];
}

template <class T>
T required(const Json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T optional_field(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? required<T>(j, key) : fallback;
}

void check_format(const Json& j, const char* format, int version) {
  if (!j.is_object() || required<std::string>(j, "format") != format) {
    throw FormatError(std::string("not a ") + format + " document");
  }
  const int v = required<int>(j, "version");
  if (v != version) {
    throw FormatError(std::string(format) + " version " + std::to_string(v) + " is not supported (expected " +
                      std::to_string(version) + ")");
  }
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, end);
}

Json to_json(const DgpParams& p) {
  Json j;
  j["d"] = p.d;
  j["beta_xt"] = p.beta_xt;
  j["beta_individual"] = p.beta_individual;
  j["beta_spillover"] = p.beta_spillover;
  j["beta_xy"] = p.beta_xy;
  j["beta_xny"] = p.beta_xny;
  j["beta_eps"] = p.beta_eps;
  j["exposure_kind"] = std::string(to_string(p.exposure_kind));
  j["target_treated_rate"] = p.target_treated_rate;
  j["seed"] = p.seed;
  return j;
}

DgpParams dgp_params_from_json(const Json& j) {
  DgpParams p;
  p.d = optional_field(j, "d", p.d);
  p.beta_xt = optional_field(j, "beta_xt", p.beta_xt);
  p.beta_individual = optional_field(j, "beta_individual", p.beta_individual);
  p.beta_spillover = optional_field(j, "beta_spillover", p.beta_spillover);
  p.beta_xy = optional_field(j, "beta_xy", p.beta_xy);
  p.beta_xny = optional_field(j, "beta_xny", p.beta_xny);
  p.beta_eps = optional_field(j, "beta_eps", p.beta_eps);
  if (j.contains("exposure_kind")) p.exposure_kind = parse_exposure_kind(required<std::string>(j, "exposure_kind"));
  p.target_treated_rate = optional_field(j, "target_treated_rate", p.target_treated_rate);
  p.seed = optional_field<std::uint64_t>(j, "seed", p.seed);
  return p;
}

Json to_json(const GraphSettings& s) {
  Json j;
  j["kind"] = std::string(to_string(s.kind));
  j["ba_m"] = s.ba_m;
  j["target_avg_degree"] = s.homophily.target_avg_degree;
  j["noise_sd"] = s.homophily.noise_sd;
  return j;
}

GraphSettings graph_settings_from_json(const Json& j) {
  GraphSettings s;
  if (j.contains("kind")) s.kind = parse_graph_kind(required<std::string>(j, "kind"));
  s.ba_m = optional_field<std::size_t>(j, "ba_m", s.ba_m);
  s.homophily.target_avg_degree = optional_field(j, "target_avg_degree", s.homophily.target_avg_degree);
  s.homophily.noise_sd = optional_field(j, "noise_sd", s.homophily.noise_sd);
  return s;
}

Json to_json(const HiNetConfig& c) {
  Json j;
  j["hidden_size"] = c.hidden_size;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["dropout"] = c.dropout;
  j["alpha"] = c.alpha;
  j["use_gin_t"] = c.use_gin_t;
  j["seed"] = c.seed;
  j["weight_decay"] = c.weight_decay;
  return j;
}

HiNetConfig hinet_config_from_json(const Json& j) {
  HiNetConfig c;
  c.hidden_size = optional_field(j, "hidden_size", c.hidden_size);
  c.epochs = optional_field(j, "epochs", c.epochs);
  c.learning_rate = optional_field(j, "learning_rate", c.learning_rate);
  c.dropout = optional_field(j, "dropout", c.dropout);
  c.alpha = optional_field(j, "alpha", c.alpha);
  c.use_gin_t = optional_field(j, "use_gin_t", c.use_gin_t);
  c.seed = optional_field<std::uint64_t>(j, "seed", c.seed);
  c.weight_decay = optional_field(j, "weight_decay", c.weight_decay);
  return c;
}

Json to_json(const HyperparameterGrid& g) {
  Json j;
  j["hidden_sizes"] = g.hidden_sizes;
  j["epochs"] = g.epochs;
  j["learning_rates"] = g.learning_rates;
  j["dropouts"] = g.dropouts;
  j["alphas"] = g.alphas;
  return j;
}

HyperparameterGrid grid_from_json(const Json& j) {
  HyperparameterGrid g;
  g.hidden_sizes = optional_field(j, "hidden_sizes", g.hidden_sizes);
  g.epochs = optional_field(j, "epochs", g.epochs);
  g.learning_rates = optional_field(j, "learning_rates", g.learning_rates);
  g.dropouts = optional_field(j, "dropouts", g.dropouts);
  g.alphas = optional_field(j, "alphas", g.alphas);
  return g;
}

Json to_json(const WeightBank& b) {
  Json j;
  j["w_xt"] = vector_json(b.w_xt);
  j["w_xy"] = vector_json(b.w_xy);
  j["w_ty"] = vector_json(b.w_ty);
  j["w_xny"] = vector_json(b.w_xny);
  j["w_tny"] = vector_json(b.w_tny);
  return j;
}

WeightBank weight_bank_from_json(const Json& j) {
  WeightBank b;
  b.w_xt = vector_from(member(j, "w_xt"), "w_xt");
  b.w_xy = vector_from(member(j, "w_xy"), "w_xy");
  b.w_ty = vector_from(member(j, "w_ty"), "w_ty");
  b.w_xny = vector_from(member(j, "w_xny"), "w_xny");
  b.w_tny = vector_from(member(j, "w_tny"), "w_tny");
  return b;
}

Json to_json(const Dataset& ds) {
  Json j;
  j["format"] = "hinet-dataset";
  j["version"] = kDatasetFormatVersion;
  j["split_tag"] = std::string(to_string(ds.split_tag));
  j["n"] = ds.size();
  j["d"] = ds.dim();
  j["params"] = to_json(ds.params);
  j["graph"] = to_json(ds.graph_settings);
  Json seeds;
  seeds["split"] = ds.split_seed;
  seeds["features"] = ds.seeds.features;
  seeds["graph"] = ds.seeds.graph;
  seeds["treatments"] = ds.seeds.treatments;
  seeds["noise"] = ds.seeds.noise;
  j["seeds"] = seeds;
  j["weight_bank"] = to_json(ds.weights);
  j["features"] = matrix_json(ds.features);
  j["transformed_features"] = matrix_json(ds.transformed_features);
  Json t = Json::array();
  for (Treatment ti : ds.treatments) t.push_back(static_cast<int>(ti));
  j["treatments"] = std::move(t);
  j["outcomes"] = vector_json(ds.outcomes);
  Json edges = Json::array();
  for (const auto& [a, b] : ds.graph.edges()) edges.push_back(Json::array({a, b}));
  j["edges"] = std::move(edges);
  return j;
}

Dataset dataset_from_json(const Json& j) {
  check_format(j, "hinet-dataset", kDatasetFormatVersion);
  Dataset ds;
  const auto n = required<std::size_t>(j, "n");
  const int d = required<int>(j, "d");
  ds.split_tag = parse_split_tag(required<std::string>(j, "split_tag"));
  ds.params = dgp_params_from_json(member(j, "params"));
  ds.params.validate();
  if (ds.params.d != d) throw FormatError("params.d does not match d");
  ds.graph_settings = graph_settings_from_json(member(j, "graph"));
  const Json& seeds = member(j, "seeds");
  ds.split_seed = required<std::uint64_t>(seeds, "split");
  ds.seeds.features = required<std::uint64_t>(seeds, "features");
  ds.seeds.graph = required<std::uint64_t>(seeds, "graph");
  ds.seeds.treatments = required<std::uint64_t>(seeds, "treatments");
  ds.seeds.noise = required<std::uint64_t>(seeds, "noise");
  ds.weights = weight_bank_from_json(member(j, "weight_bank"));
  for (const Vector* w : {&ds.weights.w_xt, &ds.weights.w_xy, &ds.weights.w_ty, &ds.weights.w_xny, &ds.weights.w_tny}) {
    if (w->size() != d) throw FormatError("weight_bank: vector length does not match d");
  }
  ds.features = matrix_from(member(j, "features"), n, d, "features");
  ds.transformed_features = matrix_from(member(j, "transformed_features"), n, d, "transformed_features");
  if (ds.transformed_features != transform_features(ds.features)) {
    throw FormatError("transformed_features are inconsistent with features");
  }
  const Json& t = member(j, "treatments");
  if (!t.is_array() || t.size() != n) throw FormatError("treatments: expected " + std::to_string(n) + " entries");
  ds.treatments.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int v = t[i].get<int>();
    if (v != 0 && v != 1) throw FormatError("treatments: entry " + std::to_string(i) + " is not 0 or 1");
    ds.treatments[i] = static_cast<Treatment>(v);
  }
  ds.outcomes = vector_from(member(j, "outcomes"), "outcomes");
  if (static_cast<std::size_t>(ds.outcomes.size()) != n) throw FormatError("outcomes: wrong length");
  std::vector<Edge> edges;
  for (const auto& e : member(j, "edges")) {
    if (!e.is_array() || e.size() != 2) throw FormatError("edges: every edge must be a pair");
    const auto a = e[0].get<std::size_t>();
    const auto b = e[1].get<std::size_t>();
    if (a >= b) throw FormatError("edges: pairs must satisfy i < j");
    edges.emplace_back(a, b);
  }
  try {
    ds.graph = UndirectedGraph::from_edges(n, edges);
  } catch (const InvalidParameter& e) {
    throw FormatError(std::string("edges: ") + e.what());
  }
  return ds;
}

Json to_json(const MetricReport& r) {
  Json j;
  j["pehne"] = r.pehne;
  j["cnee"] = r.cnee;
  j["factual_mse"] = r.factual_mse;
  j["m"] = r.m;
  j["replicates"] = r.replicates;
  j["seed"] = r.seed;
  Json rows = Json::array();
  for (const auto& row : r.per_rate) {
    Json e;
    e["j"] = row.j;
    e["p_j"] = row.p;
    e["mse_pehne_j"] = row.mse_pehne;
    e["mse_cnee_j"] = row.mse_cnee;
    rows.push_back(std::move(e));
  }
  j["per_rate"] = std::move(rows);
  return j;
}

MetricReport metric_report_from_json(const Json& j) {
  MetricReport r;
  r.pehne = required<double>(j, "pehne");
  r.cnee = required<double>(j, "cnee");
  r.factual_mse = required<double>(j, "factual_mse");
  r.m = required<int>(j, "m");
  r.replicates = optional_field(j, "replicates", 1);
  r.seed = required<std::uint64_t>(j, "seed");
  for (const auto& e : member(j, "per_rate")) {
    r.per_rate.push_back({required<int>(e, "j"), required<double>(e, "p_j"), required<double>(e, "mse_pehne_j"),
                          required<double>(e, "mse_cnee_j")});
  }
  return r;
}

std::string per_rate_csv(const MetricReport& report) {
  std::string out = "j,p_j,mse_pehne_j,mse_cnee_j\n";
  for (const auto& row : report.per_rate) {
    out += std::to_string(row.j) + "," + format_double(row.p) + "," + format_double(row.mse_pehne) + "," +
           format_double(row.mse_cnee) + "\n";
  }
  return out;
}

Json to_json(const TuningResult& r) {
  Json j;
  j["selected_config"] = to_json(r.selected_config);
  Json table = Json::array();
  for (const auto& row : r.loss_table) {
    Json e;
    e["config"] = to_json(row.config);
    e["validation_loss"] = row.failed ? Json(nullptr) : Json(row.validation_loss);
    e["failed"] = row.failed;
    table.push_back(std::move(e));
  }
  j["loss_table"] = std::move(table);
  Json alphas = Json::array();
  for (const auto& [alpha, loss] : r.alpha_table) {
    Json e;
    e["alpha"] = alpha;
    e["validation_loss"] = std::isfinite(loss) ? Json(loss) : Json(nullptr);
    alphas.push_back(std::move(e));
  }
  j["alpha_table"] = std::move(alphas);
  j["loss_at_alpha_zero"] = r.loss_at_alpha_zero;
  return j;
}

std::string loss_table_csv(const TuningResult& r) {
  const auto loss_text = [](bool failed, double loss) {
    return failed || !std::isfinite(loss) ? std::string() : format_double(loss);
  };
  const auto config_text = [](const HiNetConfig& c, double alpha) {
    return std::to_string(c.hidden_size) + "," + std::to_string(c.epochs) + "," + format_double(c.learning_rate) +
           "," + format_double(c.dropout) + "," + format_double(alpha);
  };
  std::string out = "stage,hidden_size,epochs,learning_rate,dropout,alpha,validation_loss\n";
  for (const auto& row : r.loss_table) {
    out += "grid," + config_text(row.config, row.config.alpha) + "," + loss_text(row.failed, row.validation_loss) +
           "\n";
  }
  for (const auto& [alpha, loss] : r.alpha_table) {
    out += "alpha," + config_text(r.selected_config, alpha) + "," + loss_text(false, loss) + "\n";
  }
  return out;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,treatment_loss,validation_loss\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," +
           (std::isnan(r.treatment_loss) ? std::string() : format_double(r.treatment_loss)) + "," +
           format_double(r.validation_loss) + "\n";
  }
  return out;
}

Json checkpoint_to_json(Model& model) {
  Json j;
  j["format"] = "hinet-checkpoint";
  j["version"] = kCheckpointFormatVersion;
  j["estimator"] = std::string(to_string(model.kind()));
  j["input_dim"] = model.input_dim();
  j["config"] = to_json(model.config());
  Json params = Json::array();
  for (const ad::Parameter* p : model.parameters()) {
    Json e;
    e["name"] = p->name;
    e["shape"] = Json::array({p->value.rows(), p->value.cols()});
    Json values = Json::array();
    for (Eigen::Index i = 0; i < p->value.size(); ++i) values.push_back(p->value.data()[i]);
    e["values"] = std::move(values);
    params.push_back(std::move(e));
  }
  j["parameters"] = std::move(params);
  return j;
}

std::unique_ptr<Model> checkpoint_from_json(const Json& j) {
  check_format(j, "hinet-checkpoint", kCheckpointFormatVersion);
  const EstimatorKind kind = parse_estimator_kind(required<std::string>(j, "estimator"));
  const int input_dim = required<int>(j, "input_dim");
  auto model = make_model(kind, input_dim, hinet_config_from_json(member(j, "config")));
  auto params = model->parameters();
  const Json& records = member(j, "parameters");
  if (!records.is_array() || records.size() != params.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(params.size()) + " parameter records");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Json& rec = records[k];
    ad::Parameter& p = *params[k];
    if (required<std::string>(rec, "name") != p.name) {
      throw FormatError("checkpoint: record " + std::to_string(k) + " is '" + required<std::string>(rec, "name") +
                        "', expected '" + p.name + "'");
    }
    const auto shape = required<std::vector<Eigen::Index>>(rec, "shape");
    if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols()) {
      throw FormatError("checkpoint: shape mismatch for '" + p.name + "'");
    }
    const Json& values = member(rec, "values");
    if (!values.is_array() || values.size() != static_cast<std::size_t>(p.value.size())) {
      throw FormatError("checkpoint: wrong value count for '" + p.name + "'");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!values[i].is_number()) throw FormatError("checkpoint: non-numeric value in '" + p.name + "'");
      p.value.data()[i] = values[i].get<double>();
    }
  }
  return model;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Json read_json_file(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

}  // namespace hinet
