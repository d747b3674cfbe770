#include "hinet/tuning.hpp"

#include <cmath>
#include <string>

#include "hinet/error.hpp"

namespace hinet {

void HyperparameterGrid::validate() const {
  if (hidden_sizes.empty() || epochs.empty() || learning_rates.empty() || dropouts.empty() || alphas.empty()) {
    throw InvalidParameter("hyperparameter grid: every axis needs at least one value");
  }
  for (double a : alphas) {
    if (!(a >= 0.0)) throw InvalidParameter("alphas: values must be non-negative");
  }
}

double select_alpha(const std::map<double, double>& losses, double p) {
  const auto base = losses.find(0.0);
  if (base == losses.end()) throw InvalidParameter("select_alpha: loss table has no alpha = 0 entry");
  const double threshold = (1.0 + p) * base->second;
  double best = 0.0;
  for (const auto& [alpha, loss] : losses) {
    if (alpha > best && loss < threshold) best = alpha;
  }
  return best;
}

namespace {

// Strict preference used to rank grid points.
bool preferred(const ConfigLoss& a, const ConfigLoss& b) {
  if (a.validation_loss != b.validation_loss) return a.validation_loss < b.validation_loss;
  if (a.config.hidden_size != b.config.hidden_size) return a.config.hidden_size < b.config.hidden_size;
  return a.config.learning_rate < b.config.learning_rate;
}

struct GridRun {
  ConfigLoss entry;
  std::optional<TrainedModel> trained;
};

GridRun run_point(EstimatorKind kind, const Dataset& train_split, const Dataset& validation_split,
                  const HiNetConfig& config) {
  GridRun run;
  run.entry.config = effective_config(kind, config);
  try {
    run.trained = train(kind, train_split, validation_split, config);
    run.entry.validation_loss = run.trained->final_validation_loss();
  } catch (const TrainingFailure&) {
    run.entry.failed = true;
    run.entry.validation_loss = std::nan("");
  }
  return run;
}

TuningResult search(EstimatorKind kind, const Dataset& train_split, const Dataset& validation_split,
                    const HyperparameterGrid& grid, std::uint64_t seed, std::optional<TrainedModel>* best_model) {
  grid.validate();
  TuningResult result;
  std::optional<ConfigLoss> best;
  for (int hidden : grid.hidden_sizes) {
    for (int epochs : grid.epochs) {
      for (double lr : grid.learning_rates) {
        for (double dropout : grid.dropouts) {
          HiNetConfig cfg;
          cfg.hidden_size = hidden;
          cfg.epochs = epochs;
          cfg.learning_rate = lr;
          cfg.dropout = dropout;
          cfg.alpha = 0.0;
          cfg.seed = seed;
          GridRun run = run_point(kind, train_split, validation_split, cfg);
          result.loss_table.push_back(run.entry);
          if (run.entry.failed) continue;
          if (!best || preferred(run.entry, *best)) {
            best = run.entry;
            if (best_model) *best_model = std::move(run.trained);
          }
        }
      }
    }
  }
  if (!best) throw TuningFailure("grid search: every configuration diverged");
  result.selected_config = best->config;
  result.loss_at_alpha_zero = best->validation_loss;
  return result;
}

}  // namespace

TuningResult grid_search(EstimatorKind kind, const Dataset& train_split, const Dataset& validation_split,
                         const HyperparameterGrid& grid, std::uint64_t seed) {
  return search(kind, train_split, validation_split, grid, seed, nullptr);
}

TunedModel tune_and_train(EstimatorKind kind, const Dataset& train_split, const Dataset& validation_split,
                          const HyperparameterGrid& grid, std::uint64_t seed, double p) {
  std::optional<TrainedModel> base_model;
  TunedModel out;
  out.tuning = search(kind, train_split, validation_split, grid, seed, &base_model);
  if (!uses_alpha(kind)) {
    out.trained = std::move(*base_model);
    return out;
  }

  std::map<double, double> losses{{0.0, out.tuning.loss_at_alpha_zero}};
  std::map<double, TrainedModel> models;
  models.emplace(0.0, std::move(*base_model));
  out.tuning.alpha_table.emplace_back(0.0, out.tuning.loss_at_alpha_zero);
  for (double alpha : grid.alphas) {
    if (alpha == 0.0 || losses.count(alpha)) continue;
    HiNetConfig cfg = out.tuning.selected_config;
    cfg.alpha = alpha;
    GridRun run = run_point(kind, train_split, validation_split, cfg);
    out.tuning.alpha_table.emplace_back(alpha, run.entry.validation_loss);
    if (run.entry.failed) continue;
    losses.emplace(alpha, run.entry.validation_loss);
    models.emplace(alpha, std::move(*run.trained));
  }
  const double chosen = select_alpha(losses, p);
  out.tuning.selected_config.alpha = chosen;
  out.trained = std::move(models.at(chosen));
  return out;
}

}  // namespace hinet
