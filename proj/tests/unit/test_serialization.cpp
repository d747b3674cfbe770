#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "hinet/error.hpp"
#include "hinet/serialization.hpp"

using namespace hinet;

namespace {

Dataset sample_dataset(GraphKind kind = GraphKind::ba) {
  DgpParams params;
  params.d = 3;
  params.exposure_kind = ExposureKind::entropy;
  GraphSettings gs;
  gs.kind = kind;
  return generate_dataset(40, gs, params, 77, SplitTag::validation);
}

std::filesystem::path scratch_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "hinet_serialization_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("format_double: shortest text that parses back exactly") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(-1e-300) == "-1e-300");
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1e3);
  for (int i = 0; i < 2000; ++i) {
    const double v = nd(rng);
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("dataset: JSON round trip is exact and redumps byte-identically") {
  for (auto kind : {GraphKind::ba, GraphKind::homophily}) {
    const Dataset ds = sample_dataset(kind);
    const Json j = to_json(ds);
    const Dataset back = dataset_from_json(j);
    CHECK(back.features == ds.features);
    CHECK(back.transformed_features == ds.transformed_features);
    CHECK(back.treatments == ds.treatments);
    CHECK(back.outcomes == ds.outcomes);
    CHECK(back.graph == ds.graph);
    CHECK(back.weights.w_xy == ds.weights.w_xy);
    CHECK(back.weights.w_tny == ds.weights.w_tny);
    CHECK(back.params == ds.params);
    CHECK(back.graph_settings == ds.graph_settings);
    CHECK(back.split_tag == ds.split_tag);
    CHECK(back.split_seed == ds.split_seed);
    CHECK(back.seeds.noise == ds.seeds.noise);
    CHECK(to_json(back).dump() == j.dump());
    // The stored noise seed regenerates the same noise.
    CHECK(back.noise() == ds.noise());
  }
}

TEST_CASE("dataset: file round trip through disk") {
  const auto dir = scratch_dir("dataset");
  const Dataset ds = sample_dataset();
  write_json_file(dir / "ds.json", to_json(ds));
  const std::string first = read_text_file(dir / "ds.json");
  const Dataset back = dataset_from_json(read_json_file(dir / "ds.json"));
  write_json_file(dir / "again.json", to_json(back));
  CHECK(read_text_file(dir / "again.json") == first);
  CHECK(first.back() == '\n');
}

TEST_CASE("dataset: malformed documents are rejected with a format error") {
  const Json good = to_json(sample_dataset());
  auto broken = [&](auto mutate) {
    Json j = good;
    mutate(j);
    return j;
  };
  CHECK_THROWS_AS(dataset_from_json(broken([](Json& j) { j["format"] = "something-else"; })), FormatError);
  CHECK_THROWS_AS(dataset_from_json(broken([](Json& j) { j["version"] = 99; })), FormatError);
  CHECK_THROWS_AS(dataset_from_json(broken([](Json& j) { j.erase("outcomes"); })), FormatError);
  CHECK_THROWS_AS(dataset_from_json(broken([](Json& j) { j["treatments"][0] = 2; })), FormatError);
  CHECK_THROWS_AS(dataset_from_json(broken([](Json& j) { j["treatments"].erase(0); })), FormatError);
  CHECK_THROWS_AS(dataset_from_json(broken([](Json& j) { j["features"].erase(0); })), FormatError);
  CHECK_THROWS_AS(dataset_from_json(broken([](Json& j) { j["transformed_features"][0][0] = 5.0; })), FormatError);
  CHECK_THROWS_AS(dataset_from_json(broken([](Json& j) { j["edges"].push_back(Json::array({3, 1})); })),
                  FormatError);
  CHECK_THROWS_AS(dataset_from_json(broken([](Json& j) { j["edges"].push_back(j["edges"][0]); })), FormatError);
  CHECK_THROWS_AS(dataset_from_json(broken([](Json& j) { j["edges"].push_back(Json::array({0, 400})); })),
                  FormatError);
  CHECK_THROWS_AS(dataset_from_json(broken([](Json& j) { j["weight_bank"]["w_xy"].erase(0); })), FormatError);
  CHECK_THROWS_AS(dataset_from_json(Json::array()), FormatError);
}

TEST_CASE("read_json_file: invalid JSON and missing files are reported") {
  const auto dir = scratch_dir("badjson");
  write_text_file(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(read_json_file(dir / "bad.json"), FormatError);
  CHECK_THROWS(read_json_file(dir / "missing.json"));
}

TEST_CASE("configs: parameter, graph, model and grid settings round trip") {
  DgpParams p;
  p.beta_xt = 4.5;
  p.exposure_kind = ExposureKind::squared_weighted_avg;
  p.target_treated_rate = 0.3;
  CHECK(dgp_params_from_json(to_json(p)) == p);

  GraphSettings g;
  g.kind = GraphKind::homophily;
  g.homophily.noise_sd = 0.25;
  CHECK(graph_settings_from_json(to_json(g)) == g);

  HiNetConfig c;
  c.hidden_size = 16;
  c.alpha = 0.025;
  c.use_gin_t = false;
  c.seed = std::numeric_limits<std::uint64_t>::max();
  CHECK(hinet_config_from_json(to_json(c)) == c);

  HyperparameterGrid grid;
  grid.learning_rates = {0.0005};
  CHECK(grid_from_json(to_json(grid)) == grid);
}

TEST_CASE("metric report: JSON round trip and per-rate CSV") {
  MetricReport r;
  r.pehne = 0.5;
  r.cnee = 0.25;
  r.factual_mse = 0.125;
  r.m = 2;
  r.seed = 9;
  r.per_rate = {{1, 0.5, 0.75, 0.5}, {2, 1.0, 0.25, 0.0}};
  const MetricReport back = metric_report_from_json(to_json(r));
  CHECK(back.pehne == r.pehne);
  CHECK(back.cnee == r.cnee);
  CHECK(back.m == 2);
  CHECK(back.seed == 9);
  REQUIRE(back.per_rate.size() == 2);
  CHECK(back.per_rate[0].mse_pehne == 0.75);
  CHECK(per_rate_csv(r) == "j,p_j,mse_pehne_j,mse_cnee_j\n1,0.5,0.75,0.5\n2,1,0.25,0\n");
}

TEST_CASE("history CSV leaves the treatment loss blank when it was not computed") {
  std::vector<EpochRecord> h{{1, 0.5, std::nan(""), 0.25}, {2, 0.25, 0.75, 0.125}};
  CHECK(history_csv(h) == "epoch,train_loss,treatment_loss,validation_loss\n1,0.5,,0.25\n2,0.25,0.75,0.125\n");
}

TEST_CASE("checkpoint: restored models reproduce predictions bit for bit") {
  const Dataset ds = sample_dataset();
  for (auto k : {EstimatorKind::hinet, EstimatorKind::hinet_alpha0, EstimatorKind::hinet_no_gin_t,
                 EstimatorKind::gin_baseline, EstimatorKind::no_network_baseline}) {
    INFO(to_string(k));
    HiNetConfig cfg;
    cfg.hidden_size = 8;
    cfg.epochs = 15;
    cfg.learning_rate = 0.01;
    cfg.alpha = 0.1;
    cfg.seed = 4;
    auto trained = train(k, ds, ds, cfg);
    const Json j = checkpoint_to_json(*trained.model);
    auto restored = checkpoint_from_json(Json::parse(j.dump()));
    CHECK(restored->kind() == k);
    CHECK(restored->config() == trained.model->config());
    const TreatmentVector ones(ds.size(), 1);
    CHECK(predict_potential(*restored, ds.graph, ds.features, ds.treatments) ==
          predict_potential(*trained.model, ds.graph, ds.features, ds.treatments));
    CHECK(estimate_itte(*restored, ds.graph, ds.features, ones) ==
          estimate_itte(*trained.model, ds.graph, ds.features, ones));
    CHECK(checkpoint_to_json(*restored).dump() == j.dump());
  }
}

TEST_CASE("checkpoint: mismatched or damaged records are rejected") {
  auto model = make_model(EstimatorKind::gin_baseline, 3, HiNetConfig{});
  const Json good = checkpoint_to_json(*model);
  Json j = good;
  j["format"] = "hinet-dataset";
  CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
  j = good;
  j["version"] = 2;
  CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
  j = good;
  j["input_dim"] = 4;
  CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
  j = good;
  j["estimator"] = "no_network_baseline";
  CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
  j = good;
  j["parameters"].erase(0);
  CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
}

TEST_CASE("loss table CSV lists grid points then the alpha sweep") {
  TuningResult r;
  HiNetConfig a;
  a.hidden_size = 16;
  a.epochs = 500;
  a.learning_rate = 0.001;
  HiNetConfig b = a;
  b.learning_rate = 10.0;
  r.loss_table = {{a, 0.5, false}, {b, std::nan(""), true}};
  r.selected_config = a;
  r.alpha_table = {{0.0, 0.5}, {0.1, 0.625}, {0.3, std::nan("")}};
  CHECK(loss_table_csv(r) ==
        "stage,hidden_size,epochs,learning_rate,dropout,alpha,validation_loss\n"
        "grid,16,500,0.001,0,0,0.5\n"
        "grid,16,500,10,0,0,\n"
        "alpha,16,500,0.001,0,0,0.5\n"
        "alpha,16,500,0.001,0,0.1,0.625\n"
        "alpha,16,500,0.001,0,0.3,\n");
}
