#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hinet/dgp.hpp"
#include "hinet/error.hpp"

using namespace hinet;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Three-node path 0-1-2 with d = 1 and hand-picked weights. The feature
// values map to transformed values (0.5, 0.75, 0.25).
Dataset path_fixture() {
  Dataset ds;
  ds.features = FeatureMatrix(3, 1);
  ds.features << 0.0, std::log(3.0), -std::log(3.0);
  ds.transformed_features = transform_features(ds.features);
  std::vector<Edge> edges{{0, 1}, {1, 2}};
  ds.graph = UndirectedGraph::from_edges(3, edges);
  ds.params.d = 1;
  auto one = [](double v) { Vector w(1); w(0) = v; return w; };
  ds.weights.w_xt = one(0.3);
  ds.weights.w_xy = one(0.4);
  ds.weights.w_ty = one(1.0);
  ds.weights.w_xny = one(-0.6);
  ds.weights.w_tny = one(0.8);
  ds.treatments = {1, 0, 1};
  return ds;
}

OutcomeModel model_of(const Dataset& ds) {
  return OutcomeModel{ds.graph, ds.transformed_features, ds.weights, ds.params};
}

Dataset small_dataset(GraphKind kind, std::uint64_t seed, std::size_t n = 300) {
  GraphSettings gs;
  gs.kind = kind;
  DgpParams p;
  p.seed = seed;
  return generate_dataset(n, gs, p, seed + 100);
}

}  // namespace

TEST_CASE("enum names round-trip") {
  for (auto k : {ExposureKind::weighted_avg, ExposureKind::sum, ExposureKind::proportion, ExposureKind::entropy,
                 ExposureKind::squared_weighted_avg}) {
    CHECK(parse_exposure_kind(to_string(k)) == k);
  }
  CHECK(parse_graph_kind("homophily") == GraphKind::homophily);
  CHECK(parse_split_tag("validation") == SplitTag::validation);
  CHECK_THROWS_AS(parse_exposure_kind("median"), InvalidParameter);
}

TEST_CASE("DgpParams validation names the field") {
  DgpParams p;
  p.beta_spillover = -1.0;
  try {
    p.validate();
    FAIL("expected InvalidParameter");
  } catch (const InvalidParameter& e) {
    CHECK(std::string(e.what()).find("beta_spillover") != std::string::npos);
  }
  DgpParams q;
  q.target_treated_rate = 1.0;
  CHECK_THROWS_AS(q.validate(), InvalidParameter);
  DgpParams r;
  r.d = 0;
  CHECK_THROWS_AS(r.validate(), InvalidParameter);
}

TEST_CASE("sample_features is deterministic and standard normal") {
  CHECK(sample_features(2, 2, 4) == sample_features(2, 2, 4));
  auto one = sample_features(1, 1, 9);
  CHECK(std::isfinite(one(0, 0)));
  auto x = sample_features(10000, 10, 1);
  for (int k = 0; k < 10; ++k) {
    const double mean = x.col(k).mean();
    const double var = (x.col(k).array() - mean).square().sum() / (x.rows() - 1);
    CHECK(std::abs(mean) < 0.05);
    CHECK(var > 0.9);
    CHECK(var < 1.1);
  }
}

TEST_CASE("transform_features squashes the first half of the columns") {
  FeatureMatrix a(1, 2);
  a << 0.0, 0.0;
  auto ta = transform_features(a);
  CHECK(ta(0, 0) == 0.5);
  CHECK(ta(0, 1) == 0.0);

  FeatureMatrix b(1, 1);
  b << -3.0;
  CHECK(transform_features(b)(0, 0) == doctest::Approx(0.0474258731775668));

  FeatureMatrix c(1, 4);
  c << 0.3, -1.2, 2.5, -0.7;
  auto tc = transform_features(c);
  CHECK(tc(0, 0) == doctest::Approx(logistic(0.3)));
  CHECK(tc(0, 1) == doctest::Approx(logistic(-1.2)));
  CHECK(tc(0, 2) == 2.5);
  CHECK(tc(0, 3) == -0.7);

  FeatureMatrix e(1, 5);
  e << 1, 1, 1, 1, 1;
  auto te = transform_features(e);
  CHECK(te(0, 2) == doctest::Approx(logistic(1.0)));
  CHECK(te(0, 3) == 1.0);
}

TEST_CASE("quantile uses linear interpolation") {
  std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(quantile(v, 0.75) == doctest::Approx(3.25));
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
}

TEST_CASE("assign_treatments rates") {
  const auto x = sample_features(5000, 10, 3);
  const auto w = WeightBank::sample(10, 3).w_xt;
  SUBCASE("beta_xt = 0 treats about half") {
    const double f = treated_fraction(assign_treatments(x, w, 0.0, 0.25, 5));
    CHECK(f >= 0.47);
    CHECK(f <= 0.53);
  }
  SUBCASE("beta_xt = 6 treats about a quarter") {
    const double f = treated_fraction(assign_treatments(x, w, 6.0, 0.25, 5));
    CHECK(f >= 0.20);
    CHECK(f <= 0.30);
  }
  SUBCASE("saturated assignment is the top quarter of nu") {
    const auto t = assign_treatments(x, w, 1e6, 0.25, 5);
    std::vector<double> nu(5000);
    for (int i = 0; i < 5000; ++i) nu[i] = x.row(i).dot(w);
    const double cut = quantile(nu, 0.75);
    int mismatches = 0;
    for (int i = 0; i < 5000; ++i) mismatches += (t[i] == 1) != (nu[i] > cut);
    CHECK(mismatches <= 1);
    CHECK(std::abs(treated_fraction(t) - 0.25) < 0.001);
  }
  CHECK(assign_treatments(x, w, 6.0, 0.25, 5) == assign_treatments(x, w, 6.0, 0.25, 5));
}

TEST_CASE("treated fraction concentrates as n grows") {
  auto spread = [](std::size_t n) {
    std::vector<double> f;
    for (std::uint64_t s = 0; s < 12; ++s) {
      const auto x = sample_features(n, 10, 1000 + s);
      f.push_back(treated_fraction(assign_treatments(x, WeightBank::sample(10, 7).w_xt, 6.0, 0.25, s)));
    }
    double mean = 0;
    for (double v : f) mean += v / f.size();
    double var = 0;
    for (double v : f) var += (v - mean) * (v - mean) / (f.size() - 1);
    return var;
  };
  CHECK(spread(5000) < spread(500));
}

TEST_CASE("exposure mappings") {
  std::vector<Edge> star{{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  auto g = UndirectedGraph::from_edges(6, star);  // node 5 is isolated
  FeatureMatrix xt = FeatureMatrix::Ones(6, 1);
  Vector w(1);
  w << 0.8;
  TreatmentVector t{0, 1, 0, 0, 1, 1};

  auto prop = exposure(ExposureKind::proportion, g, t, xt, w);
  CHECK(prop(0) == 0.5);
  CHECK(prop(1) == 0.0);
  CHECK(prop(5) == 0.0);

  auto sum = exposure(ExposureKind::sum, g, t, xt, w);
  CHECK(sum(0) == 2.0);
  CHECK(sum(5) == 0.0);

  auto ent = exposure(ExposureKind::entropy, g, t, xt, w);
  CHECK(ent(0) == doctest::Approx(0.5));
  CHECK(ent(1) == doctest::Approx(-0.5));
  CHECK(ent(5) == 0.0);

  auto wavg = exposure(ExposureKind::weighted_avg, g, t, xt, w);
  CHECK(wavg(0) == doctest::Approx(0.4));
  CHECK(wavg(1) == 0.0);

  auto sq = exposure(ExposureKind::squared_weighted_avg, g, t, xt, w);
  CHECK(sq(0) == doctest::Approx(0.32));

  // One treated neighbor whose weighted feature is 0.8.
  std::vector<Edge> pair{{0, 1}};
  TreatmentVector t2{0, 1};
  FeatureMatrix x2 = FeatureMatrix::Ones(2, 1);
  CHECK(exposure(ExposureKind::weighted_avg, UndirectedGraph::from_edges(2, pair), t2, x2, w)(0) ==
        doctest::Approx(0.8));

  // Entropy at an unbalanced proportion, computed by hand.
  TreatmentVector t3{0, 1, 0, 0, 0, 0};
  const double p = 0.25;
  CHECK(exposure(ExposureKind::entropy, g, t3, xt, w)(0) ==
        doctest::Approx(-p * std::log2(p) - (1 - p) * std::log2(1 - p) - 0.5));
}

TEST_CASE("outcome on the hand-computed path fixture") {
  Dataset ds = path_fixture();
  const OutcomeModel om = model_of(ds);
  std::vector<double> eps{0.1, -0.2, 0.3};
  const Vector y = outcome(om, ds.treatments, eps);
  CHECK(y(0) == doctest::Approx(0.645).epsilon(1e-12));
  CHECK(y(1) == doctest::Approx(0.6725).epsilon(1e-12));
  CHECK(y(2) == doctest::Approx(0.035).epsilon(1e-12));

  // ITTE under all-ones: 2 h_i + 2 z_i with z = (0.6, 0.3, 0.6).
  ds.outcomes = y;
  const TreatmentVector ones(3, 1);
  const Vector itte = oracle_itte(ds, ones);
  CHECK(itte(0) == doctest::Approx(2.2));
  CHECK(itte(1) == doctest::Approx(2.1));
  CHECK(itte(2) == doctest::Approx(1.7));
}

TEST_CASE("outcome special cases") {
  Dataset ds = path_fixture();
  SUBCASE("all betas zero") {
    ds.params.beta_individual = ds.params.beta_spillover = ds.params.beta_xy = ds.params.beta_xny =
        ds.params.beta_eps = 0.0;
    std::vector<double> eps{1.0, 2.0, 3.0};
    CHECK(outcome(model_of(ds), ds.treatments, eps).isZero(0.0));
  }
  SUBCASE("individual effect only") {
    ds.params.beta_individual = 1.0;
    ds.params.beta_spillover = ds.params.beta_xy = ds.params.beta_xny = ds.params.beta_eps = 0.0;
    const Vector y = outcome(model_of(ds), ds.treatments);
    CHECK(y(0) == doctest::Approx(0.5));
    CHECK(y(1) == 0.0);
    CHECK(y(2) == doctest::Approx(0.25));
  }
  SUBCASE("all-zeros assignment keeps only the feature terms") {
    const TreatmentVector zeros(3, 0);
    const Vector y = potential_outcome_oracle(ds, zeros);
    CHECK(y(0) == doctest::Approx(1.5 * 0.2 + 1.5 * -0.45));
    CHECK(y(1) == doctest::Approx(1.5 * 0.3 + 1.5 * -0.225));
  }
}

TEST_CASE("generated datasets are self-consistent and reproducible") {
  for (auto kind : {GraphKind::ba, GraphKind::homophily}) {
    const Dataset ds = small_dataset(kind, 4);
    CHECK(ds.size() == 300);
    CHECK(ds.dim() == 10);
    CHECK(ds.graph.node_count() == 300);
    for (auto t : ds.treatments) CHECK((t == 0 || t == 1));
    CHECK(ds.transformed_features == transform_features(ds.features));
    const Vector noise = ds.noise();
    CHECK(outcome(model_of(ds), ds.treatments, std::span<const double>(noise.data(), noise.size())) == ds.outcomes);
    const Vector noiseless = potential_outcome_oracle(ds, ds.treatments);
    CHECK((noiseless - (ds.outcomes - ds.params.beta_eps * noise)).cwiseAbs().maxCoeff() < 1e-12);

    const Dataset again = small_dataset(kind, 4);
    CHECK(again.features == ds.features);
    CHECK(again.outcomes == ds.outcomes);
    CHECK(again.treatments == ds.treatments);
    CHECK(again.graph == ds.graph);
  }
}

TEST_CASE("splits share the weight bank but not the draws") {
  DgpParams p;
  p.seed = 3;
  const Dataset a = generate_dataset(100, {}, p, 1, SplitTag::train);
  const Dataset b = generate_dataset(100, {}, p, 2, SplitTag::test);
  CHECK(a.weights == b.weights);
  CHECK_FALSE(a.features == b.features);
  CHECK(b.split_tag == SplitTag::test);
}

TEST_CASE("property: oracle locality and additivity") {
  std::mt19937_64 rng(17);
  for (auto kind : {ExposureKind::weighted_avg, ExposureKind::sum, ExposureKind::proportion, ExposureKind::entropy,
                    ExposureKind::squared_weighted_avg}) {
    GraphSettings gs;
    DgpParams p;
    p.exposure_kind = kind;
    const Dataset ds = generate_dataset(60, gs, p, 5);
    for (int trial = 0; trial < 20; ++trial) {
      TreatmentVector t(60);
      for (auto& v : t) v = rng() % 2;
      const std::size_t i = rng() % 60;
      // Toggling nodes outside {i} and N(i) leaves y_i alone.
      TreatmentVector far = t;
      for (std::size_t k = 0; k < 60; ++k) {
        if (k != i && !ds.graph.has_edge(i, k) && rng() % 2) far[k] ^= 1;
      }
      CHECK(potential_outcome_oracle(ds, far)(i) == potential_outcome_oracle(ds, t)(i));

      const bool linear = kind == ExposureKind::weighted_avg || kind == ExposureKind::sum ||
                          kind == ExposureKind::proportion || kind == ExposureKind::squared_weighted_avg;
      auto nb = ds.graph.neighbors(i);
      if (!linear || nb.size() < 2) continue;
      // Effects of toggling disjoint neighbor sets add up.
      TreatmentVector ta = t, tb = t, tab = t;
      ta[nb[0]] ^= 1;
      tb[nb[1]] ^= 1;
      tab[nb[0]] ^= 1;
      tab[nb[1]] ^= 1;
      const double y0 = potential_outcome_oracle(ds, t)(i);
      const double da = potential_outcome_oracle(ds, ta)(i) - y0;
      const double db = potential_outcome_oracle(ds, tb)(i) - y0;
      const double dab = potential_outcome_oracle(ds, tab)(i) - y0;
      CHECK(dab == doctest::Approx(da + db).epsilon(1e-9));
    }
  }
}

TEST_CASE("property: isolated nodes and switched-off effects") {
  Dataset ds = path_fixture();
  ds.graph = ds.graph.with_isolated_nodes(1);
  ds.features.conservativeResize(4, 1);
  ds.features(3, 0) = 0.9;
  ds.transformed_features = transform_features(ds.features);
  ds.treatments = {1, 0, 1, 0};
  const double base = potential_outcome_oracle(ds, ds.treatments)(3);
  for (int mask = 0; mask < 8; ++mask) {
    TreatmentVector t{static_cast<Treatment>(mask & 1), static_cast<Treatment>((mask >> 1) & 1),
                      static_cast<Treatment>((mask >> 2) & 1), 0};
    CHECK(potential_outcome_oracle(ds, t)(3) == base);
  }

  GraphSettings gs;
  DgpParams no_spill;
  no_spill.beta_spillover = 0.0;
  const Dataset a = generate_dataset(50, gs, no_spill, 8);
  DgpParams no_ind;
  no_ind.beta_individual = 0.0;
  const Dataset b = generate_dataset(50, gs, no_ind, 8);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    TreatmentVector t(50);
    for (auto& v : t) v = rng() % 2;
    const std::size_t i = rng() % 50;
    TreatmentVector others = t;
    for (std::size_t k = 0; k < 50; ++k) {
      if (k != i) others[k] = rng() % 2;
    }
    CHECK(potential_outcome_oracle(a, others)(i) == potential_outcome_oracle(a, t)(i));
    TreatmentVector self = t;
    self[i] ^= 1;
    CHECK(potential_outcome_oracle(b, self)(i) == potential_outcome_oracle(b, t)(i));
  }
}
