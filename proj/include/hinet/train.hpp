#pragma once

#include <memory>
#include <vector>

#include "hinet/dgp.hpp"
#include "hinet/model.hpp"

namespace hinet {

struct EpochRecord {
  int epoch = 0;
  // Factual outcome loss on the training split (training-mode forward).
  double train_loss = 0.0;
  // Treatment prediction loss; NaN when the treatment branch was not run.
  double treatment_loss = 0.0;
  // Factual outcome loss on the validation split after this epoch's update.
  double validation_loss = 0.0;
};

struct TrainedModel {
  std::unique_ptr<Model> model;
  std::vector<EpochRecord> history;

  double final_validation_loss() const { return history.empty() ? 0.0 : history.back().validation_loss; }
};

/// Full-batch Adam training of `kind` on the training split; the validation
/// split is only scored. Throws TrainingFailure naming the first epoch with
/// a non-finite loss.
TrainedModel train(EstimatorKind kind, const Dataset& train_split, const Dataset& validation_split,
                   const HiNetConfig& config);

/// Eval-mode MSE of the model's factual predictions against stored outcomes.
double factual_loss(Model& model, const Dataset& dataset);

}  // namespace hinet
