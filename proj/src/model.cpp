#include "hinet/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hinet/error.hpp"

namespace hinet {

namespace {

std::uint64_t module_seed(std::uint64_t seed, std::string_view name) {
  return derive_seed(seed, stable_hash(name));
}

ad::Matrix treatment_column(std::span<const Treatment> t) {
  ad::Matrix col(static_cast<Eigen::Index>(t.size()), 1);
  for (std::size_t i = 0; i < t.size(); ++i) col(static_cast<Eigen::Index>(i), 0) = t[i];
  return col;
}

}  // namespace

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::hinet: return "hinet";
    case EstimatorKind::hinet_alpha0: return "hinet_alpha0";
    case EstimatorKind::hinet_no_gin_t: return "hinet_no_gin_t";
    case EstimatorKind::gin_baseline: return "gin_baseline";
    case EstimatorKind::no_network_baseline: return "no_network_baseline";
  }
  return "?";
}

EstimatorKind parse_estimator_kind(std::string_view text) {
  for (auto kind : {EstimatorKind::hinet, EstimatorKind::hinet_alpha0, EstimatorKind::hinet_no_gin_t,
                    EstimatorKind::gin_baseline, EstimatorKind::no_network_baseline}) {
    if (to_string(kind) == text) return kind;
  }
  throw InvalidParameter("estimator: unknown value '" + std::string(text) + "'");
}

bool uses_alpha(EstimatorKind kind) {
  return kind == EstimatorKind::hinet || kind == EstimatorKind::hinet_no_gin_t;
}

void HiNetConfig::validate() const {
  if (hidden_size < 1) throw InvalidParameter("hidden_size: must be >= 1");
  if (epochs < 1) throw InvalidParameter("epochs: must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidParameter("learning_rate: must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidParameter("dropout: must lie in [0, 1)");
  if (!(alpha >= 0.0)) throw InvalidParameter("alpha: must be non-negative");
  if (!(weight_decay >= 0.0)) throw InvalidParameter("weight_decay: must be non-negative");
}

Linear::Linear(const std::string& name, int in, int out, std::uint64_t seed)
    : weight_(name + ".weight", ad::Matrix(in, out)), bias_(name + ".bias", ad::Matrix(1, out)) {
  Rng rng = make_rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> unif(-bound, bound);
  for (Eigen::Index i = 0; i < weight_.value.size(); ++i) weight_.value.data()[i] = unif(rng);
  for (Eigen::Index i = 0; i < bias_.value.size(); ++i) bias_.value.data()[i] = unif(rng);
}

ad::Var Linear::apply(ad::Tape& tape, ad::Var x) {
  return ad::add(tape, ad::matmul(tape, x, tape.parameter(weight_)), tape.parameter(bias_));
}

Mlp::Mlp(const std::string& name, std::vector<int> widths, bool linear_output, double dropout,
         std::uint64_t seed)
    : widths_(std::move(widths)),
      linear_output_(linear_output),
      dropout_(dropout),
      rng_(make_rng(module_seed(seed, name), 0xd0)) {
  if (widths_.size() < 2) throw InvalidParameter("Mlp needs at least one layer");
  layers_.reserve(widths_.size() - 1);
  for (std::size_t k = 0; k + 1 < widths_.size(); ++k) {
    const std::string layer = name + "." + std::to_string(k);
    layers_.emplace_back(layer, widths_[k], widths_[k + 1], module_seed(seed, layer));
  }
}

ad::Var Mlp::forward(ad::Tape& tape, ad::Var x, Mode mode) {
  ad::Var h = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    h = layers_[k].apply(tape, h);
    const bool last = k + 1 == layers_.size();
    if (last && linear_output_) break;
    h = ad::relu(tape, h);
    if (mode == Mode::train) h = ad::dropout(tape, h, dropout_, rng_);
  }
  return h;
}

void Mlp::collect(std::vector<ad::Parameter*>& out) {
  for (auto& layer : layers_) layer.collect(out);
}

std::vector<ad::Parameter*> Model::parameters() {
  std::vector<ad::Parameter*> out;
  collect(out);
  return out;
}

void Model::check_inputs(const UndirectedGraph& graph, const FeatureMatrix& features,
                         std::span<const Treatment> treatments) const {
  const std::size_t n = graph.node_count();
  if (static_cast<std::size_t>(features.rows()) != n || treatments.size() != n) {
    throw ShapeError("forward: graph has " + std::to_string(n) + " nodes but features have " +
                     std::to_string(features.rows()) + " rows and treatments " +
                     std::to_string(treatments.size()) + " entries");
  }
  if (features.cols() != input_dim_) {
    throw ShapeError("forward: model expects " + std::to_string(input_dim_) + " features, got " +
                     std::to_string(features.cols()));
  }
}

HiNetModel::HiNetModel(EstimatorKind kind, int input_dim, HiNetConfig config)
    : Model(kind, input_dim, config),
      encoder_("encoder", {input_dim, config.hidden_size, config.hidden_size}, false, config.dropout,
               config.seed),
      gin_y_epsilon_("gin_y.epsilon", ad::Matrix::Zero(1, 1)),
      gin_y_("gin_y.mlp", {config.hidden_size + 1, config.hidden_size, config.hidden_size}, false,
             config.dropout, config.seed),
      p_y_("p_y", {2 * config.hidden_size + 1, config.hidden_size, config.hidden_size, config.hidden_size, 1},
           true, config.dropout, config.seed),
      d_t_("d_t",
           {(config.use_gin_t ? 2 : 1) * config.hidden_size, config.hidden_size, config.hidden_size,
            config.hidden_size, 1},
           true, config.dropout, config.seed) {
  if (config.use_gin_t) {
    gin_t_epsilon_.emplace("gin_t.epsilon", ad::Matrix::Zero(1, 1));
    gin_t_.emplace("gin_t.mlp", std::vector<int>{config.hidden_size, config.hidden_size, config.hidden_size},
                   false, config.dropout, config.seed);
  }
}

ForwardPass HiNetModel::forward(ad::Tape& tape, const UndirectedGraph& graph, const FeatureMatrix& features,
                                std::span<const Treatment> treatments, const ForwardOptions& options) {
  check_inputs(graph, features, treatments);
  const Mode mode = options.mode;
  auto reverse = [&](ad::Var v) { return options.reverse_gradients ? ad::gradient_reversal(tape, v) : v; };

  const ad::Var x = tape.constant(features);
  const ad::Var t = tape.constant(treatment_column(treatments));
  const ad::Var phi = encoder_.forward(tape, x, mode);

  // Outcome branch: GIN_Y over c_k = phi_k (+) t_k, then p_Y(g_i (+) phi_i (+) t_i).
  const ad::Var c = ad::concat_cols(tape, std::vector<ad::Var>{phi, t});
  const ad::Var aggregated = ad::gin_aggregate(tape, graph, c, tape.parameter(gin_y_epsilon_));
  const ad::Var g = gin_y_.forward(tape, aggregated, mode);
  const ad::Var y_hat = p_y_.forward(tape, ad::concat_cols(tape, std::vector<ad::Var>{g, phi, t}), mode);

  ForwardPass out{y_hat, std::nullopt, phi};
  if (!options.treatment_branch) return out;

  // Treatment branch: both inputs pass through their own reversal layer.
  ad::Var d_input = reverse(phi);
  if (gin_t_) {
    const ad::Var r = reverse(phi);
    const ad::Var agg_t = ad::gin_aggregate(tape, graph, r, tape.parameter(*gin_t_epsilon_));
    const ad::Var g_t = gin_t_->forward(tape, agg_t, mode);
    d_input = ad::concat_cols(tape, std::vector<ad::Var>{g_t, d_input});
  }
  out.t_logits = d_t_.forward(tape, d_input, mode);
  return out;
}

void HiNetModel::collect(std::vector<ad::Parameter*>& out) {
  encoder_.collect(out);
  out.push_back(&gin_y_epsilon_);
  gin_y_.collect(out);
  p_y_.collect(out);
  if (gin_t_) {
    out.push_back(&*gin_t_epsilon_);
    gin_t_->collect(out);
  }
  d_t_.collect(out);
}

GinBaseline::GinBaseline(int input_dim, HiNetConfig config)
    : Model(EstimatorKind::gin_baseline, input_dim, config),
      epsilon_("gin.epsilon", ad::Matrix::Zero(1, 1)),
      gin_("gin.mlp", {input_dim + 1, config.hidden_size, config.hidden_size}, false, config.dropout,
           config.seed),
      head_("head", {config.hidden_size, config.hidden_size, config.hidden_size, config.hidden_size, 1}, true,
            config.dropout, config.seed) {}

ForwardPass GinBaseline::forward(ad::Tape& tape, const UndirectedGraph& graph, const FeatureMatrix& features,
                                 std::span<const Treatment> treatments, const ForwardOptions& options) {
  check_inputs(graph, features, treatments);
  const ad::Var x = tape.constant(features);
  const ad::Var t = tape.constant(treatment_column(treatments));
  const ad::Var c = ad::concat_cols(tape, std::vector<ad::Var>{x, t});
  const ad::Var g = gin_.forward(tape, ad::gin_aggregate(tape, graph, c, tape.parameter(epsilon_)), options.mode);
  return {head_.forward(tape, g, options.mode), std::nullopt, g};
}

void GinBaseline::collect(std::vector<ad::Parameter*>& out) {
  out.push_back(&epsilon_);
  gin_.collect(out);
  head_.collect(out);
}

NoNetworkBaseline::NoNetworkBaseline(int input_dim, HiNetConfig config)
    : Model(EstimatorKind::no_network_baseline, input_dim, config),
      shared_("shared", {input_dim, config.hidden_size, config.hidden_size}, false, config.dropout, config.seed),
      head_control_("head_control",
                    {config.hidden_size, config.hidden_size, config.hidden_size, config.hidden_size, 1}, true,
                    config.dropout, config.seed),
      head_treated_("head_treated",
                    {config.hidden_size, config.hidden_size, config.hidden_size, config.hidden_size, 1}, true,
                    config.dropout, config.seed) {}

ForwardPass NoNetworkBaseline::forward(ad::Tape& tape, const UndirectedGraph& graph,
                                       const FeatureMatrix& features, std::span<const Treatment> treatments,
                                       const ForwardOptions& options) {
  check_inputs(graph, features, treatments);
  const ad::Matrix t_col = treatment_column(treatments);
  const ad::Var x = tape.constant(features);
  const ad::Var phi = shared_.forward(tape, x, options.mode);
  const ad::Var y0 = head_control_.forward(tape, phi, options.mode);
  const ad::Var y1 = head_treated_.forward(tape, phi, options.mode);
  const ad::Var treated = tape.constant(t_col);
  const ad::Var control = tape.constant((1.0 - t_col.array()).matrix());
  const ad::Var y_hat = ad::add(tape, ad::mul(tape, y0, control), ad::mul(tape, y1, treated));
  return {y_hat, std::nullopt, phi};
}

void NoNetworkBaseline::collect(std::vector<ad::Parameter*>& out) {
  shared_.collect(out);
  head_control_.collect(out);
  head_treated_.collect(out);
}

HiNetConfig effective_config(EstimatorKind kind, HiNetConfig config) {
  if (kind == EstimatorKind::hinet_alpha0) config.alpha = 0.0;
  if (kind == EstimatorKind::hinet_no_gin_t) config.use_gin_t = false;
  if (kind == EstimatorKind::hinet || kind == EstimatorKind::hinet_alpha0) config.use_gin_t = true;
  if (kind == EstimatorKind::gin_baseline || kind == EstimatorKind::no_network_baseline) config.alpha = 0.0;
  return config;
}

std::unique_ptr<Model> make_model(EstimatorKind kind, int input_dim, HiNetConfig config) {
  if (input_dim < 1) throw InvalidParameter("input dimension must be >= 1");
  config = effective_config(kind, config);
  config.validate();
  switch (kind) {
    case EstimatorKind::hinet:
    case EstimatorKind::hinet_alpha0:
    case EstimatorKind::hinet_no_gin_t:
      return std::make_unique<HiNetModel>(kind, input_dim, config);
    case EstimatorKind::gin_baseline:
      return std::make_unique<GinBaseline>(input_dim, config);
    case EstimatorKind::no_network_baseline:
      return std::make_unique<NoNetworkBaseline>(input_dim, config);
  }
  throw InvalidParameter("unknown estimator kind");
}

Vector to_vector(std::span<const Treatment> t) {
  Vector v(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) v[static_cast<Eigen::Index>(i)] = t[i];
  return v;
}

LossTerms combined_loss(ad::Tape& tape, ad::Var y_hat, const Vector& outcomes, std::optional<ad::Var> t_logits,
                        std::span<const Treatment> treatments, double alpha) {
  const ad::Var outcome_loss = ad::mse_loss(tape, y_hat, outcomes);
  if (alpha == 0.0 || !t_logits) return {outcome_loss, outcome_loss, std::nullopt};
  const ad::Var treatment_loss = ad::bce_with_logits_loss(tape, *t_logits, to_vector(treatments));
  return {ad::add(tape, outcome_loss, ad::scale(tape, treatment_loss, alpha)), outcome_loss, treatment_loss};
}

Vector predict_potential(Model& model, const UndirectedGraph& graph, const FeatureMatrix& features,
                         std::span<const Treatment> t_cf) {
  ad::Tape tape(false);
  ForwardOptions options;
  options.mode = Mode::eval;
  options.treatment_branch = false;
  const ForwardPass pass = model.forward(tape, graph, features, t_cf, options);
  return tape.value(pass.y_hat).col(0);
}

Vector estimate_itte(Model& model, const UndirectedGraph& graph, const FeatureMatrix& features,
                     std::span<const Treatment> t_cf) {
  const TreatmentVector zeros(t_cf.size(), 0);
  return predict_potential(model, graph, features, t_cf) - predict_potential(model, graph, features, zeros);
}

ad::Matrix representations(Model& model, const UndirectedGraph& graph, const FeatureMatrix& features,
                           std::span<const Treatment> treatments) {
  ad::Tape tape(false);
  ForwardOptions options;
  options.treatment_branch = false;
  const ForwardPass pass = model.forward(tape, graph, features, treatments, options);
  return tape.value(pass.representation);
}

double mmd_squared(const ad::Matrix& a, const ad::Matrix& b, double bandwidth) {
  if (a.rows() == 0 || b.rows() == 0) throw UndefinedStatistic("MMD needs two non-empty groups");
  if (a.cols() != b.cols()) throw ShapeError("MMD groups have different widths");
  const double gamma = 1.0 / (2.0 * bandwidth * bandwidth);
  auto mean_kernel = [gamma](const ad::Matrix& p, const ad::Matrix& q) {
    const Eigen::VectorXd pn = p.rowwise().squaredNorm();
    const Eigen::VectorXd qn = q.rowwise().squaredNorm();
    ad::Matrix d2 = -2.0 * p * q.transpose();
    d2.colwise() += pn;
    d2.rowwise() += qn.transpose();
    return d2.unaryExpr([gamma](double v) { return std::exp(-gamma * std::max(v, 0.0)); }).mean();
  };
  return std::max(0.0, mean_kernel(a, a) + mean_kernel(b, b) - 2.0 * mean_kernel(a, b));
}

namespace {

ad::Matrix gather_rows(const ad::Matrix& m, const std::vector<std::size_t>& rows) {
  ad::Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

void cap_group(std::vector<std::size_t>& group, std::size_t max_group, Rng& rng) {
  if (group.size() <= max_group) return;
  std::shuffle(group.begin(), group.end(), rng);
  group.resize(max_group);
  std::sort(group.begin(), group.end());
}

}  // namespace

BalancingReport balancing_diagnostic(Model& model, const Dataset& dataset, std::uint64_t seed,
                                     std::size_t max_group) {
  const ad::Matrix phi = representations(model, dataset.graph, dataset.features, dataset.treatments);
  Rng rng = make_rng(seed, 0xba1);
  BalancingReport report;

  std::vector<std::size_t> treated, control;
  for (std::size_t i = 0; i < dataset.size(); ++i) (dataset.treatments[i] ? treated : control).push_back(i);
  cap_group(treated, max_group, rng);
  cap_group(control, max_group, rng);
  report.own_treatment = mmd_squared(gather_rows(phi, treated), gather_rows(phi, control));

  std::vector<std::size_t> nb_treated, nb_control;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto nb = dataset.graph.neighbors(i);
    if (nb.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, nb.size() - 1);
    (dataset.treatments[nb[pick(rng)]] ? nb_treated : nb_control).push_back(i);
  }
  cap_group(nb_treated, max_group, rng);
  cap_group(nb_control, max_group, rng);
  report.neighbor_treatment = mmd_squared(gather_rows(phi, nb_treated), gather_rows(phi, nb_control));
  return report;
}

}  // namespace hinet
