#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hinet/graph.hpp"

namespace hinet {

using Vector = Eigen::VectorXd;
using Treatment = std::uint8_t;
using TreatmentVector = std::vector<Treatment>;

enum class ExposureKind { weighted_avg, sum, proportion, entropy, squared_weighted_avg };
enum class GraphKind { ba, homophily };
enum class SplitTag { train, validation, test };

std::string_view to_string(ExposureKind kind);
std::string_view to_string(GraphKind kind);
std::string_view to_string(SplitTag tag);
ExposureKind parse_exposure_kind(std::string_view text);
GraphKind parse_graph_kind(std::string_view text);
SplitTag parse_split_tag(std::string_view text);

/// Knobs of the synthetic outcome model. `seed` fixes the weight bank, which
/// is shared by every split drawn from the same parameters.
struct DgpParams {
  int d = 10;
  double beta_xt = 6.0;
  double beta_individual = 2.0;
  double beta_spillover = 2.0;
  double beta_xy = 1.5;
  double beta_xny = 1.5;
  double beta_eps = 0.2;
  ExposureKind exposure_kind = ExposureKind::weighted_avg;
  double target_treated_rate = 0.25;
  std::uint64_t seed = 0;

  /// Throws InvalidParameter naming the first offending field.
  void validate() const;

  friend bool operator==(const DgpParams&, const DgpParams&) = default;
};

/// Graph construction settings used by generate_dataset.
struct GraphSettings {
  GraphKind kind = GraphKind::ba;
  std::size_t ba_m = 2;
  HomophilyOptions homophily{};

  friend bool operator==(const GraphSettings& a, const GraphSettings& b) {
    return a.kind == b.kind && a.ba_m == b.ba_m &&
           a.homophily.target_avg_degree == b.homophily.target_avg_degree &&
           a.homophily.noise_sd == b.homophily.noise_sd;
  }
};

struct WeightBank {
  Vector w_xt;
  Vector w_xy;
  Vector w_ty;
  Vector w_xny;
  Vector w_tny;

  /// Every entry i.i.d. Unif(-1, 1).
  static WeightBank sample(int d, std::uint64_t seed);

  friend bool operator==(const WeightBank&, const WeightBank&) = default;
};

/// Seeds of every random stream consumed while drawing one split.
struct SplitSeeds {
  std::uint64_t features = 0;
  std::uint64_t graph = 0;
  std::uint64_t treatments = 0;
  std::uint64_t noise = 0;

  static SplitSeeds derive(std::uint64_t split_seed);
  friend bool operator==(const SplitSeeds&, const SplitSeeds&) = default;
};

struct Dataset {
  FeatureMatrix features;
  FeatureMatrix transformed_features;
  TreatmentVector treatments;
  Vector outcomes;
  UndirectedGraph graph;
  WeightBank weights;
  DgpParams params;
  GraphSettings graph_settings;
  SplitTag split_tag = SplitTag::train;
  std::uint64_t split_seed = 0;
  SplitSeeds seeds;

  std::size_t size() const { return treatments.size(); }
  int dim() const { return static_cast<int>(features.cols()); }

  /// The standard-normal outcome noise of the factual outcomes, regenerated
  /// from the stored noise seed.
  Vector noise() const;
};

FeatureMatrix sample_features(std::size_t n, int d, std::uint64_t seed);

/// Applies the logistic sigmoid to the first ceil(d/2) columns.
FeatureMatrix transform_features(const FeatureMatrix& features);

/// nu = beta_xt * X w_xt, shifted by its (1 - rate) quantile (linear
/// interpolation), then t_i ~ Bernoulli(sigmoid(nu_i)).
TreatmentVector assign_treatments(const FeatureMatrix& features, const Vector& w_xt, double beta_xt,
                                  double target_treated_rate, std::uint64_t seed);

/// Linear-interpolation quantile, q in [0, 1].
double quantile(std::span<const double> values, double q);

/// Exposure z_i of every node. Isolated nodes receive 0.
Vector exposure(ExposureKind kind, const UndirectedGraph& graph, std::span<const Treatment> t,
                const FeatureMatrix& transformed_features, const Vector& w_tny);

/// Everything the outcome equation reads besides the treatment vector.
struct OutcomeModel {
  const UndirectedGraph& graph;
  const FeatureMatrix& transformed_features;
  const WeightBank& weights;
  const DgpParams& params;
};

/// Evaluates y = b_ind*h*t + b_sp*z + b_xy*u + b_xny*u_N + b_eps*eps.
/// An empty `noise` span means eps = 0.
Vector outcome(const OutcomeModel& model, std::span<const Treatment> t,
               std::span<const double> noise = {});

/// Draws one split. The weight bank comes from params.seed; features, graph,
/// treatments and noise come from streams derived from `split_seed`.
Dataset generate_dataset(std::size_t n, const GraphSettings& graph_settings, const DgpParams& params,
                         std::uint64_t split_seed, SplitTag tag = SplitTag::train);

/// Noise-free potential outcomes of every node under the assignment t_cf.
Vector potential_outcome_oracle(const Dataset& dataset, std::span<const Treatment> t_cf);

/// True ITTE: oracle(t_cf) - oracle(all zeros).
Vector oracle_itte(const Dataset& dataset, std::span<const Treatment> t_cf);

double treated_fraction(std::span<const Treatment> t);

}  // namespace hinet
