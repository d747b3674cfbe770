#include "hinet/metrics.hpp"

#include "hinet/error.hpp"
#include "hinet/rng.hpp"
#include "hinet/train.hpp"

namespace hinet {

namespace {

double mse(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("metric: prediction and oracle lengths differ");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

void check_args(int m, int replicates) {
  if (m < 1) throw InvalidParameter("m: must be >= 1");
  if (replicates < 1) throw InvalidParameter("replicates: must be >= 1");
}

template <class PerNetwork>
MetricSeries run_series(std::size_t n, int m, std::uint64_t seed, int replicates, PerNetwork per_network,
                        bool fill_pehne) {
  check_args(m, replicates);
  MetricSeries out;
  out.per_rate.reserve(static_cast<std::size_t>(m));
  for (int j = 1; j <= m; ++j) {
    const double p = static_cast<double>(j) / m;
    double acc = 0.0;
    for (int r = 0; r < replicates; ++r) {
      const TreatmentVector t = sample_counterfactual(n, p, counterfactual_seed(seed, j, r));
      acc += per_network(t);
    }
    RateError row;
    row.j = j;
    row.p = p;
    (fill_pehne ? row.mse_pehne : row.mse_cnee) = acc / replicates;
    out.value += acc / replicates;
    out.per_rate.push_back(row);
  }
  out.value /= m;
  return out;
}

}  // namespace

TreatmentVector sample_counterfactual(std::size_t n, double p, std::uint64_t seed) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidParameter("counterfactual treatment rate must lie in (0, 1]");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  TreatmentVector t(n);
  for (auto& ti : t) ti = unif(rng) < p ? 1 : 0;
  return t;
}

std::uint64_t counterfactual_seed(std::uint64_t seed, int j, int replicate) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(j)), static_cast<std::uint64_t>(replicate));
}

MetricSeries pehne(const NetworkFunction& predict_itte, const NetworkFunction& oracle_itte, std::size_t n, int m,
                   std::uint64_t seed, int replicates) {
  return run_series(
      n, m, seed, replicates, [&](const TreatmentVector& t) { return mse(oracle_itte(t), predict_itte(t)); },
      true);
}

MetricSeries cnee(const NetworkFunction& predict_outcome, const NetworkFunction& oracle_outcome, std::size_t n,
                  int m, std::uint64_t seed, int replicates) {
  return run_series(
      n, m, seed, replicates, [&](const TreatmentVector& t) { return mse(oracle_outcome(t), predict_outcome(t)); },
      false);
}

MetricReport counterfactual_report(const NetworkFunction& predict_outcome, const NetworkFunction& oracle_outcome,
                                   std::size_t n, int m, std::uint64_t seed, int replicates) {
  check_args(m, replicates);
  const TreatmentVector zeros(n, 0);
  const Vector predicted_zero = predict_outcome(zeros);
  const Vector oracle_zero = oracle_outcome(zeros);

  MetricReport report;
  report.m = m;
  report.replicates = replicates;
  report.seed = seed;
  report.per_rate.reserve(static_cast<std::size_t>(m));
  for (int j = 1; j <= m; ++j) {
    RateError row;
    row.j = j;
    row.p = static_cast<double>(j) / m;
    for (int r = 0; r < replicates; ++r) {
      const TreatmentVector t = sample_counterfactual(n, row.p, counterfactual_seed(seed, j, r));
      const Vector y_hat = predict_outcome(t);
      const Vector y = oracle_outcome(t);
      row.mse_cnee += mse(y, y_hat);
      row.mse_pehne += mse(y - oracle_zero, y_hat - predicted_zero);
    }
    row.mse_cnee /= replicates;
    row.mse_pehne /= replicates;
    report.pehne += row.mse_pehne;
    report.cnee += row.mse_cnee;
    report.per_rate.push_back(row);
  }
  report.pehne /= m;
  report.cnee /= m;
  return report;
}

double factual_mse(Model& model, const Dataset& dataset) { return factual_loss(model, dataset); }

NetworkFunction model_outcome_function(Model& model, const Dataset& dataset) {
  return [&model, &dataset](std::span<const Treatment> t) {
    return predict_potential(model, dataset.graph, dataset.features, t);
  };
}

NetworkFunction oracle_outcome_function(const Dataset& dataset) {
  return [&dataset](std::span<const Treatment> t) { return potential_outcome_oracle(dataset, t); };
}

MetricReport evaluate_model(Model& model, const Dataset& dataset, int m, std::uint64_t seed, int replicates) {
  MetricReport report = counterfactual_report(model_outcome_function(model, dataset),
                                              oracle_outcome_function(dataset), dataset.size(), m, seed, replicates);
  report.factual_mse = factual_mse(model, dataset);
  return report;
}

}  // namespace hinet
