#include "hinet/train.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "hinet/adam.hpp"
#include "hinet/error.hpp"

namespace hinet {

double factual_loss(Model& model, const Dataset& dataset) {
  const Vector pred = predict_potential(model, dataset.graph, dataset.features, dataset.treatments);
  return (pred - dataset.outcomes).squaredNorm() / static_cast<double>(dataset.size());
}

TrainedModel train(EstimatorKind kind, const Dataset& train_split, const Dataset& validation_split,
                   const HiNetConfig& config) {
  if (train_split.dim() != validation_split.dim()) {
    throw ShapeError("train: training and validation splits have different feature dimensions");
  }
  TrainedModel result;
  result.model = make_model(kind, train_split.dim(), config);
  Model& model = *result.model;
  const HiNetConfig& cfg = model.config();

  auto params = model.parameters();
  ad::AdamOptions adam_options;
  adam_options.learning_rate = cfg.learning_rate;
  adam_options.weight_decay = cfg.weight_decay;
  ad::Adam adam(params, adam_options);

  const bool adversarial = model.has_treatment_head() && cfg.alpha > 0.0;
  ForwardOptions options;
  options.mode = Mode::train;
  options.treatment_branch = adversarial;

  result.history.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    ad::Tape tape;
    const ForwardPass pass =
        model.forward(tape, train_split.graph, train_split.features, train_split.treatments, options);
    const LossTerms terms = combined_loss(tape, pass.y_hat, train_split.outcomes, pass.t_logits,
                                          train_split.treatments, cfg.alpha);
    const ad::Var loss = terms.total;
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = tape.value(terms.outcome)(0, 0);
    record.treatment_loss =
        terms.treatment ? tape.value(*terms.treatment)(0, 0) : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(tape.value(loss)(0, 0))) {
      throw TrainingFailure(std::string(to_string(kind)) + " training diverged: non-finite loss at epoch " +
                                std::to_string(epoch),
                            epoch);
    }
    tape.backward(loss);
    adam.step();

    record.validation_loss = factual_loss(model, validation_split);
    if (!std::isfinite(record.validation_loss)) {
      throw TrainingFailure(std::string(to_string(kind)) +
                                " training diverged: non-finite validation loss at epoch " + std::to_string(epoch),
                            epoch);
    }
    result.history.push_back(record);
  }
  return result;
}

}  // namespace hinet
