#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hinet/dgp.hpp"
#include "hinet/metrics.hpp"
#include "hinet/model.hpp"
#include "hinet/serialization.hpp"
#include "hinet/tuning.hpp"

namespace hinet {

enum class DgpVariant { only_individual, only_spillover, both };
enum class SweepAxis { beta_xt_grid, exposure_kinds, dgp_variant };

std::string_view to_string(DgpVariant variant);
std::string_view to_string(SweepAxis axis);
DgpVariant parse_dgp_variant(std::string_view text);
SweepAxis parse_sweep_axis(std::string_view text);

/// only_individual zeroes beta_spillover, only_spillover zeroes
/// beta_individual, both leaves the parameters unchanged.
DgpParams apply_variant(DgpParams params, DgpVariant variant);

/// Everything one experiment needs. The JSON form is flat and its keys are
/// the field names below (DGP and graph settings are spelled out).
struct ExperimentConfig {
  DgpParams dgp;
  GraphSettings graph;
  std::size_t n_per_split = 5000;
  HyperparameterGrid grid;
  double alpha_threshold = 0.10;
  std::vector<EstimatorKind> estimators{EstimatorKind::hinet, EstimatorKind::hinet_alpha0,
                                        EstimatorKind::hinet_no_gin_t, EstimatorKind::gin_baseline,
                                        EstimatorKind::no_network_baseline};
  // Model initialisation seeds; one trained model per estimator and seed.
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  // Root of the three split seeds.
  std::uint64_t data_seed = 0;
  int m = 50;
  int replicates = 1;
  std::uint64_t metric_seed = 0;
  std::string output_dir = "hinet_output";
  int jobs = 1;
  SweepAxis sweep_axis = SweepAxis::beta_xt_grid;
  std::vector<double> beta_xt_grid{0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
  std::vector<ExposureKind> exposure_kinds{ExposureKind::weighted_avg, ExposureKind::sum,
                                           ExposureKind::proportion, ExposureKind::entropy,
                                           ExposureKind::squared_weighted_avg};
  std::vector<DgpVariant> dgp_variants{DgpVariant::only_individual, DgpVariant::only_spillover,
                                       DgpVariant::both};

  /// Throws InvalidParameter naming the first offending key.
  void validate() const;
};

Json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys and invalid values are
/// rejected.
ExperimentConfig experiment_config_from_json(const Json& j);

/// Replaces keys of a flat config document with command-line text. Lists
/// are comma separated; the value type follows the existing entry.
Json apply_overrides(Json document, const std::map<std::string, std::string>& overrides);

/// output_dir, placed under $HINET_OUTPUT_ROOT when that is set and the
/// directory is relative.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

/// Split seeds derived from data_seed, in train/validation/test order.
std::array<std::uint64_t, 3> split_seeds(std::uint64_t data_seed);

/// Draws the three independent splits (each with its own graph).
std::array<Dataset, 3> generate_splits(const ExperimentConfig& config);

struct Aggregate {
  double mean = 0.0;
  // Sample (n - 1) standard deviation; 0 for a single value.
  double sd = 0.0;
  std::size_t count = 0;
};

Aggregate aggregate(const std::vector<double>& values);

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitPartialFailure = 2;

struct CommandOptions {
  bool force = false;
  // evaluate: also score the DGP oracle as a debug estimator.
  bool include_oracle = false;
};

/// Subcommands. Each writes into its own subdirectory of the output
/// directory (data, runs, eval, sweep, report) and refuses to touch an
/// existing one unless `force` is set. Return an exit code.
int cmd_generate(const ExperimentConfig& config, const CommandOptions& options);
int cmd_train(const ExperimentConfig& config, const CommandOptions& options);
int cmd_evaluate(const ExperimentConfig& config, const CommandOptions& options);
int cmd_sweep(const ExperimentConfig& config, const CommandOptions& options);
int cmd_report(const ExperimentConfig& config, const CommandOptions& options);

}  // namespace hinet
