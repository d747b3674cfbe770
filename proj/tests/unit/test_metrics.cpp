#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hinet/error.hpp"
#include "hinet/metrics.hpp"
#include "hinet/train.hpp"

using namespace hinet;

namespace {

Dataset small_dataset(std::size_t n, std::uint64_t seed) {
  DgpParams params;
  params.d = 4;
  return generate_dataset(n, {}, params, seed, SplitTag::test);
}

NetworkFunction scaled(const NetworkFunction& f, double s) {
  return [f, s](std::span<const Treatment> t) -> Vector { return s * f(t); };
}

double per_rate_mean(const std::vector<RateError>& rows, bool pehne_field) {
  double acc = 0.0;
  for (const auto& r : rows) acc += pehne_field ? r.mse_pehne : r.mse_cnee;
  return acc / static_cast<double>(rows.size());
}

double treated_fraction_of(const TreatmentVector& t) {
  return static_cast<double>(std::accumulate(t.begin(), t.end(), 0)) / static_cast<double>(t.size());
}

}  // namespace

TEST_CASE("sample_counterfactual: rate one treats everyone") {
  const TreatmentVector t = sample_counterfactual(257, 1.0, 9);
  for (auto v : t) CHECK(v == 1);
}

TEST_CASE("sample_counterfactual: half rate lands inside the binomial bound") {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const double f = treated_fraction_of(sample_counterfactual(10000, 0.5, seed));
    CHECK(f >= 0.47);
    CHECK(f <= 0.53);
  }
}

TEST_CASE("sample_counterfactual: fixed seed is reproducible, different seeds differ") {
  CHECK(sample_counterfactual(500, 0.3, 4) == sample_counterfactual(500, 0.3, 4));
  CHECK(sample_counterfactual(500, 0.3, 4) != sample_counterfactual(500, 0.3, 5));
  CHECK(counterfactual_seed(7, 3) == counterfactual_seed(7, 3));
  CHECK(counterfactual_seed(7, 3) != counterfactual_seed(7, 4));
  CHECK(counterfactual_seed(7, 3, 0) != counterfactual_seed(7, 3, 1));
}

TEST_CASE("sample_counterfactual: rates outside (0, 1] are rejected") {
  CHECK_THROWS_AS(sample_counterfactual(5, 0.0, 1), InvalidParameter);
  CHECK_THROWS_AS(sample_counterfactual(5, 1.5, 1), InvalidParameter);
}

TEST_CASE("pehne and cnee: the oracle scores exactly zero") {
  const Dataset ds = small_dataset(200, 3);
  const NetworkFunction oracle = oracle_outcome_function(ds);
  const NetworkFunction itte = [&ds](std::span<const Treatment> t) { return oracle_itte(ds, t); };
  CHECK(pehne(itte, itte, ds.size()).value == 0.0);
  CHECK(cnee(oracle, oracle, ds.size()).value == 0.0);
  const MetricReport r = counterfactual_report(oracle, oracle, ds.size());
  CHECK(r.pehne == 0.0);
  CHECK(r.cnee == 0.0);
  CHECK(r.per_rate.size() == 50);
}

TEST_CASE("pehne: a constant ITTE offset c scores c squared") {
  const Dataset ds = small_dataset(150, 5);
  const NetworkFunction itte = [&ds](std::span<const Treatment> t) { return oracle_itte(ds, t); };
  for (double c : {0.5, -1.25, 3.0}) {
    const NetworkFunction shifted = [&itte, c](std::span<const Treatment> t) -> Vector {
      return itte(t).array() + c;
    };
    CHECK(pehne(shifted, itte, ds.size()).value == doctest::Approx(c * c).epsilon(1e-12));
  }
}

TEST_CASE("pehne: three-node path with a zero predictor at m = 2") {
  // omega_i = 2 t_i + sum of neighbour treatments on the path 0-1-2.
  const NetworkFunction oracle = [](std::span<const Treatment> t) {
    Vector w(3);
    w << 2.0 * t[0] + t[1], 2.0 * t[1] + t[0] + t[2], 2.0 * t[2] + t[1];
    return w;
  };
  const NetworkFunction zero = [](std::span<const Treatment>) -> Vector { return Vector::Zero(3); };
  const std::uint64_t seed = 11;

  double expected = 0.0;
  for (int j = 1; j <= 2; ++j) {
    const TreatmentVector t = sample_counterfactual(3, j / 2.0, counterfactual_seed(seed, j));
    const double w0 = 2.0 * t[0] + t[1];
    const double w1 = 2.0 * t[1] + t[0] + t[2];
    const double w2 = 2.0 * t[2] + t[1];
    expected += (w0 * w0 + w1 * w1 + w2 * w2) / 3.0;
  }
  expected /= 2.0;
  const MetricSeries s = pehne(zero, oracle, 3, 2, seed);
  CHECK(s.value == doctest::Approx(expected).epsilon(1e-15));
  // The p = 1 network is all ones: omega = (3, 4, 3).
  CHECK(s.per_rate[1].p == 1.0);
  CHECK(s.per_rate[1].mse_pehne == doctest::Approx(34.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("pehne and cnee: an error only on the all-zeros network hits pehne, not cnee") {
  const Dataset ds = small_dataset(300, 8);
  const NetworkFunction oracle = oracle_outcome_function(ds);
  const double delta = 0.7;
  const NetworkFunction corrupted = [&oracle, delta](std::span<const Treatment> t) -> Vector {
    Vector y = oracle(t);
    if (std::all_of(t.begin(), t.end(), [](Treatment v) { return v == 0; })) y.array() += delta;
    return y;
  };
  const MetricReport r = counterfactual_report(corrupted, oracle, ds.size());
  CHECK(r.pehne == doctest::Approx(delta * delta).epsilon(1e-12));
  CHECK(r.cnee == 0.0);
  CHECK(r.cnee < r.pehne);
}

TEST_CASE("pehne and cnee: standalone and combined runs score the same networks") {
  const Dataset ds = small_dataset(120, 12);
  const NetworkFunction oracle = oracle_outcome_function(ds);
  const NetworkFunction pred = scaled(oracle, 0.8);
  const TreatmentVector zeros(ds.size(), 0);
  const Vector pred_zero = pred(zeros);
  const NetworkFunction pred_itte = [&](std::span<const Treatment> t) -> Vector { return pred(t) - pred_zero; };
  const NetworkFunction true_itte = [&ds](std::span<const Treatment> t) { return oracle_itte(ds, t); };

  const MetricReport r = counterfactual_report(pred, oracle, ds.size(), 20, 99);
  const MetricSeries p = pehne(pred_itte, true_itte, ds.size(), 20, 99);
  const MetricSeries c = cnee(pred, oracle, ds.size(), 20, 99);
  CHECK(r.pehne == doctest::Approx(p.value).epsilon(1e-12));
  CHECK(r.cnee == doctest::Approx(c.value).epsilon(1e-12));
  for (int j = 0; j < 20; ++j) {
    CHECK(r.per_rate[j].mse_pehne == doctest::Approx(p.per_rate[j].mse_pehne).epsilon(1e-12));
    CHECK(r.per_rate[j].mse_cnee == doctest::Approx(c.per_rate[j].mse_cnee).epsilon(1e-12));
  }
}

TEST_CASE("metric reports: headline values are the mean of the per-rate rows") {
  const Dataset ds = small_dataset(100, 13);
  auto model = make_model(EstimatorKind::gin_baseline, ds.dim(), HiNetConfig{});
  for (int replicates : {1, 3}) {
    const MetricReport r = evaluate_model(*model, ds, 50, 4, replicates);
    CHECK(r.pehne == doctest::Approx(per_rate_mean(r.per_rate, true)).epsilon(1e-12));
    CHECK(r.cnee == doctest::Approx(per_rate_mean(r.per_rate, false)).epsilon(1e-12));
    for (std::size_t j = 0; j < r.per_rate.size(); ++j) {
      CHECK(r.per_rate[j].j == static_cast<int>(j) + 1);
      CHECK(r.per_rate[j].p == static_cast<double>(j + 1) / 50.0);
      CHECK(r.per_rate[j].mse_pehne >= 0.0);
      CHECK(r.per_rate[j].mse_cnee >= 0.0);
    }
  }
}

TEST_CASE("metrics: invalid sample counts and mismatched lengths are rejected") {
  const NetworkFunction two = [](std::span<const Treatment>) -> Vector { return Vector::Zero(2); };
  const NetworkFunction three = [](std::span<const Treatment>) -> Vector { return Vector::Zero(3); };
  CHECK_THROWS_AS(pehne(three, three, 3, 0), InvalidParameter);
  CHECK_THROWS_AS(cnee(three, three, 3, 5, 0, 0), InvalidParameter);
  CHECK_THROWS_AS(cnee(two, three, 3), ShapeError);
}

TEST_CASE("factual_mse: a zero model scores the mean squared outcome") {
  const Dataset ds = small_dataset(80, 14);
  auto model = make_model(EstimatorKind::gin_baseline, ds.dim(), HiNetConfig{});
  for (auto* p : model->parameters()) p->value.setZero();
  CHECK(factual_mse(*model, ds) == doctest::Approx(ds.outcomes.squaredNorm() / 80.0).epsilon(1e-14));
}

TEST_CASE("factual_mse: matches a hand sum over the model's factual predictions") {
  const Dataset ds = small_dataset(60, 15);
  auto model = make_model(EstimatorKind::hinet, ds.dim(), HiNetConfig{});
  const Vector y_hat = predict_potential(*model, ds.graph, ds.features, ds.treatments);
  double acc = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) acc += (y_hat(i) - ds.outcomes(i)) * (y_hat(i) - ds.outcomes(i));
  CHECK(factual_mse(*model, ds) == doctest::Approx(acc / 60.0).epsilon(1e-12));
}

TEST_CASE("property: per-network errors are invariant to relabelling the nodes") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const Dataset ds = small_dataset(60 + 10 * trial, 100 + trial);
    const std::size_t n = ds.size();
    std::vector<std::size_t> perm(n);  // node i becomes perm[i]
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    Dataset moved = ds;
    std::vector<Edge> edges;
    for (auto [a, b] : ds.graph.edges()) edges.emplace_back(perm[a], perm[b]);
    moved.graph = UndirectedGraph::from_edges(n, edges);
    for (std::size_t i = 0; i < n; ++i) {
      moved.features.row(perm[i]) = ds.features.row(i);
      moved.transformed_features.row(perm[i]) = ds.transformed_features.row(i);
      moved.treatments[perm[i]] = ds.treatments[i];
      moved.outcomes(perm[i]) = ds.outcomes(i);
    }

    HiNetConfig cfg;
    cfg.seed = 5;
    auto model = make_model(EstimatorKind::hinet, ds.dim(), cfg);
    const NetworkFunction pred = model_outcome_function(*model, ds);
    const NetworkFunction pred_moved = model_outcome_function(*model, moved);
    const NetworkFunction oracle = oracle_outcome_function(ds);
    const NetworkFunction oracle_moved = oracle_outcome_function(moved);
    const TreatmentVector zeros(n, 0);

    const auto network_errors = [&](const NetworkFunction& p, const NetworkFunction& o,
                                    std::span<const Treatment> t) {
      const Vector yp = p(t), yo = o(t);
      const Vector ip = yp - p(zeros), io = yo - o(zeros);
      return std::pair{(yp - yo).squaredNorm() / n, (ip - io).squaredNorm() / n};
    };
    for (int j = 1; j <= 10; ++j) {
      const TreatmentVector t = sample_counterfactual(n, j / 10.0, counterfactual_seed(1, j));
      TreatmentVector t_moved(n);
      for (std::size_t i = 0; i < n; ++i) t_moved[perm[i]] = t[i];
      const auto [c0, p0] = network_errors(pred, oracle, t);
      const auto [c1, p1] = network_errors(pred_moved, oracle_moved, t_moved);
      CHECK(c1 == doctest::Approx(c0).epsilon(1e-10));
      CHECK(p1 == doctest::Approx(p0).epsilon(1e-10));
    }
    CHECK(factual_mse(*model, moved) == doctest::Approx(factual_mse(*model, ds)).epsilon(1e-10));
  }
}

TEST_CASE("property: metrics are non-negative and vanish only for exact predictions") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  for (int trial = 0; trial < 8; ++trial) {
    const Dataset ds = small_dataset(50, 200 + trial);
    const NetworkFunction oracle = oracle_outcome_function(ds);
    const double s = scale(rng);
    const MetricReport r = counterfactual_report(scaled(oracle, s), oracle, ds.size(), 10, trial);
    CHECK(r.pehne >= 0.0);
    CHECK(r.cnee > 0.0);
    for (const auto& row : r.per_rate) CHECK(row.mse_cnee >= 0.0);
  }
}

TEST_CASE("property: m = 50 and m = 500 agree within three standard errors") {
  const Dataset ds = small_dataset(300, 31);
  auto model = make_model(EstimatorKind::hinet, ds.dim(), HiNetConfig{});
  const MetricReport small = evaluate_model(*model, ds, 50, 6);
  const MetricReport large = evaluate_model(*model, ds, 500, 6);
  for (bool pehne_field : {true, false}) {
    const double mean = per_rate_mean(small.per_rate, pehne_field);
    double var = 0.0;
    for (const auto& r : small.per_rate) {
      const double v = (pehne_field ? r.mse_pehne : r.mse_cnee) - mean;
      var += v * v;
    }
    const double se = std::sqrt(var / 49.0) / std::sqrt(50.0);
    const double a = pehne_field ? small.pehne : small.cnee;
    const double b = pehne_field ? large.pehne : large.cnee;
    INFO("pehne field: ", pehne_field, " m50 ", a, " m500 ", b, " se ", se);
    CHECK(std::abs(a - b) < 3.0 * se);
  }
}
