#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "hinet/dgp.hpp"
#include "hinet/model.hpp"
#include "hinet/train.hpp"

namespace hinet {

struct HyperparameterGrid {
  std::vector<int> hidden_sizes{16, 32};
  std::vector<int> epochs{500, 1000, 2000};
  std::vector<double> learning_rates{0.001, 0.0005, 0.0001};
  std::vector<double> dropouts{0.0, 0.1, 0.2};
  std::vector<double> alphas{0.0, 0.025, 0.05, 0.1, 0.2, 0.3};

  void validate() const;
  friend bool operator==(const HyperparameterGrid&, const HyperparameterGrid&) = default;
};

struct ConfigLoss {
  HiNetConfig config;
  double validation_loss = 0.0;
  bool failed = false;
};

struct TuningResult {
  HiNetConfig selected_config;
  std::vector<ConfigLoss> loss_table;
  // (alpha, validation loss); empty for estimators without a treatment head.
  std::vector<std::pair<double, double>> alpha_table;
  double loss_at_alpha_zero = 0.0;
};

/// Largest alpha whose loss is strictly below (1 + p) * loss(0). Throws
/// InvalidParameter when the table has no alpha = 0 entry.
double select_alpha(const std::map<double, double>& losses, double p = 0.10);

/// Trains one model per grid point with alpha = 0 and keeps the lowest
/// validation loss; ties go to the smaller hidden size, then the smaller
/// learning rate. Throws TuningFailure if every run diverged.
TuningResult grid_search(EstimatorKind kind, const Dataset& train_split, const Dataset& validation_split,
                         const HyperparameterGrid& grid, std::uint64_t seed);

struct TunedModel {
  TuningResult tuning;
  TrainedModel trained;
};

/// Grid search followed, for estimators that use alpha, by an alpha sweep
/// on the selected base configuration and the (1 + p) threshold rule.
/// Returns the model trained at the selected configuration.
TunedModel tune_and_train(EstimatorKind kind, const Dataset& train_split, const Dataset& validation_split,
                          const HyperparameterGrid& grid, std::uint64_t seed, double p = 0.10);

}  // namespace hinet
