#include "hinet/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hinet/error.hpp"
#include "hinet/rng.hpp"

namespace hinet {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Stream ids for the per-split draws.
constexpr std::uint64_t kFeatureStream = 1;
constexpr std::uint64_t kGraphStream = 2;
constexpr std::uint64_t kTreatmentStream = 3;
constexpr std::uint64_t kNoiseStream = 4;

}  // namespace

std::string_view to_string(ExposureKind kind) {
  switch (kind) {
    case ExposureKind::weighted_avg: return "weighted_avg";
    case ExposureKind::sum: return "sum";
    case ExposureKind::proportion: return "proportion";
    case ExposureKind::entropy: return "entropy";
    case ExposureKind::squared_weighted_avg: return "squared_weighted_avg";
  }
  return "?";
}

std::string_view to_string(GraphKind kind) { return kind == GraphKind::ba ? "ba" : "homophily"; }

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::validation: return "validation";
    case SplitTag::test: return "test";
  }
  return "?";
}

ExposureKind parse_exposure_kind(std::string_view text) {
  for (auto kind : {ExposureKind::weighted_avg, ExposureKind::sum, ExposureKind::proportion,
                    ExposureKind::entropy, ExposureKind::squared_weighted_avg}) {
    if (to_string(kind) == text) return kind;
  }
  throw InvalidParameter("exposure_kind: unknown value '" + std::string(text) + "'");
}

GraphKind parse_graph_kind(std::string_view text) {
  if (text == "ba") return GraphKind::ba;
  if (text == "homophily") return GraphKind::homophily;
  throw InvalidParameter("graph_kind: unknown value '" + std::string(text) + "'");
}

SplitTag parse_split_tag(std::string_view text) {
  for (auto tag : {SplitTag::train, SplitTag::validation, SplitTag::test}) {
    if (to_string(tag) == text) return tag;
  }
  throw InvalidParameter("split_tag: unknown value '" + std::string(text) + "'");
}

void DgpParams::validate() const {
  if (d < 1) throw InvalidParameter("d: must be >= 1");
  const std::pair<const char*, double> betas[] = {
      {"beta_xt", beta_xt},           {"beta_individual", beta_individual},
      {"beta_spillover", beta_spillover}, {"beta_xy", beta_xy},
      {"beta_xny", beta_xny},         {"beta_eps", beta_eps}};
  for (const auto& [name, value] : betas) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw InvalidParameter(std::string(name) + ": must be a finite non-negative number");
    }
  }
  if (!(target_treated_rate > 0.0 && target_treated_rate < 1.0)) {
    throw InvalidParameter("target_treated_rate: must lie strictly between 0 and 1");
  }
}

WeightBank WeightBank::sample(int d, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x77656967);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto draw = [&] {
    Vector w(d);
    for (int i = 0; i < d; ++i) w[i] = unif(rng);
    return w;
  };
  WeightBank bank;
  bank.w_xt = draw();
  bank.w_xy = draw();
  bank.w_ty = draw();
  bank.w_xny = draw();
  bank.w_tny = draw();
  return bank;
}

SplitSeeds SplitSeeds::derive(std::uint64_t split_seed) {
  return {derive_seed(split_seed, kFeatureStream), derive_seed(split_seed, kGraphStream),
          derive_seed(split_seed, kTreatmentStream), derive_seed(split_seed, kNoiseStream)};
}

FeatureMatrix sample_features(std::size_t n, int d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw InvalidParameter("sample_features requires n >= 1 and d >= 1");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  FeatureMatrix x(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = normal(rng);
  }
  return x;
}

FeatureMatrix transform_features(const FeatureMatrix& features) {
  FeatureMatrix out = features;
  const Eigen::Index half = (features.cols() + 1) / 2;
  out.leftCols(half) = features.leftCols(half).unaryExpr([](double v) { return sigmoid(v); });
  return out;
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw InvalidParameter("quantile of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

TreatmentVector assign_treatments(const FeatureMatrix& features, const Vector& w_xt, double beta_xt,
                                  double target_treated_rate, std::uint64_t seed) {
  if (features.cols() != w_xt.size()) {
    throw ShapeError("assign_treatments: w_xt length does not match feature dimension");
  }
  const Vector nu = beta_xt * (features * w_xt);
  const double cut = quantile(std::span<const double>(nu.data(), static_cast<std::size_t>(nu.size())),
                              1.0 - target_treated_rate);
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  TreatmentVector t(static_cast<std::size_t>(nu.size()));
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    t[static_cast<std::size_t>(i)] = unif(rng) < sigmoid(nu[i] - cut) ? 1 : 0;
  }
  return t;
}

Vector exposure(ExposureKind kind, const UndirectedGraph& graph, std::span<const Treatment> t,
                const FeatureMatrix& transformed_features, const Vector& w_tny) {
  const std::size_t n = graph.node_count();
  if (t.size() != n || static_cast<std::size_t>(transformed_features.rows()) != n) {
    throw ShapeError("exposure: treatment/feature length does not match node count");
  }
  Vector weight;
  if (kind == ExposureKind::weighted_avg || kind == ExposureKind::squared_weighted_avg) {
    weight = transformed_features * w_tny;
    if (kind == ExposureKind::squared_weighted_avg) weight = weight.array().square();
  }
  Vector z = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto nb = graph.neighbors(i);
    if (nb.empty()) continue;
    const double deg = static_cast<double>(nb.size());
    double acc = 0.0;
    switch (kind) {
      case ExposureKind::weighted_avg:
      case ExposureKind::squared_weighted_avg:
        for (std::size_t j : nb) acc += t[j] ? weight[static_cast<Eigen::Index>(j)] : 0.0;
        z[static_cast<Eigen::Index>(i)] = acc / deg;
        break;
      case ExposureKind::sum:
        for (std::size_t j : nb) acc += t[j];
        z[static_cast<Eigen::Index>(i)] = acc;
        break;
      case ExposureKind::proportion:
        for (std::size_t j : nb) acc += t[j];
        z[static_cast<Eigen::Index>(i)] = acc / deg;
        break;
      case ExposureKind::entropy: {
        for (std::size_t j : nb) acc += t[j];
        const double p = acc / deg;
        auto plogp = [](double v) { return v > 0.0 ? v * std::log2(v) : 0.0; };
        z[static_cast<Eigen::Index>(i)] = -plogp(p) - plogp(1.0 - p) - 0.5;
        break;
      }
    }
  }
  return z;
}

Vector outcome(const OutcomeModel& model, std::span<const Treatment> t, std::span<const double> noise) {
  const std::size_t n = model.graph.node_count();
  if (t.size() != n) throw ShapeError("outcome: treatment vector length does not match node count");
  if (!noise.empty() && noise.size() != n) throw ShapeError("outcome: noise length does not match node count");
  const auto& p = model.params;
  const auto& xt = model.transformed_features;
  const auto& w = model.weights;

  const Vector h = xt * w.w_ty;
  const Vector u = xt * w.w_xy;
  const Vector u_self_neighbor = xt * w.w_xny;
  const Vector z = exposure(p.exposure_kind, model.graph, t, xt, w.w_tny);

  Vector y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto nb = model.graph.neighbors(i);
    double u_neighbors = 0.0;
    if (!nb.empty()) {
      for (std::size_t j : nb) u_neighbors += u_self_neighbor[static_cast<Eigen::Index>(j)];
      u_neighbors /= static_cast<double>(nb.size());
    }
    double yi = p.beta_individual * h[ii] * static_cast<double>(t[i]) + p.beta_spillover * z[ii] +
                p.beta_xy * u[ii] + p.beta_xny * u_neighbors;
    if (!noise.empty()) yi += p.beta_eps * noise[i];
    y[ii] = yi;
  }
  return y;
}

Vector Dataset::noise() const {
  Rng rng = make_rng(seeds.noise);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector eps(static_cast<Eigen::Index>(size()));
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = normal(rng);
  return eps;
}

Dataset generate_dataset(std::size_t n, const GraphSettings& graph_settings, const DgpParams& params,
                         std::uint64_t split_seed, SplitTag tag) {
  params.validate();
  Dataset ds;
  ds.params = params;
  ds.graph_settings = graph_settings;
  ds.split_tag = tag;
  ds.split_seed = split_seed;
  ds.seeds = SplitSeeds::derive(split_seed);
  ds.weights = WeightBank::sample(params.d, params.seed);
  ds.features = sample_features(n, params.d, ds.seeds.features);
  ds.transformed_features = transform_features(ds.features);
  ds.graph = graph_settings.kind == GraphKind::ba
                 ? generate_ba(n, graph_settings.ba_m, ds.seeds.graph)
                 : generate_homophily(ds.features, graph_settings.homophily, ds.seeds.graph);
  ds.treatments = assign_treatments(ds.features, ds.weights.w_xt, params.beta_xt,
                                    params.target_treated_rate, ds.seeds.treatments);
  const Vector eps = ds.noise();
  ds.outcomes = outcome({ds.graph, ds.transformed_features, ds.weights, ds.params}, ds.treatments,
                        std::span<const double>(eps.data(), static_cast<std::size_t>(eps.size())));
  return ds;
}

Vector potential_outcome_oracle(const Dataset& dataset, std::span<const Treatment> t_cf) {
  return outcome({dataset.graph, dataset.transformed_features, dataset.weights, dataset.params}, t_cf);
}

Vector oracle_itte(const Dataset& dataset, std::span<const Treatment> t_cf) {
  const TreatmentVector zeros(dataset.size(), 0);
  return potential_outcome_oracle(dataset, t_cf) - potential_outcome_oracle(dataset, zeros);
}

double treated_fraction(std::span<const Treatment> t) {
  if (t.empty()) return 0.0;
  return static_cast<double>(std::accumulate(t.begin(), t.end(), std::size_t{0})) /
         static_cast<double>(t.size());
}

}  // namespace hinet
