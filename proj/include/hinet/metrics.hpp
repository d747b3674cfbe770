#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hinet/dgp.hpp"
#include "hinet/model.hpp"

namespace hinet {

/// Maps a full treatment assignment to one value per node (an outcome or an
/// ITTE, depending on context).
using NetworkFunction = std::function<Vector(std::span<const Treatment>)>;

struct RateError {
  int j = 0;
  double p = 0.0;
  double mse_pehne = 0.0;
  double mse_cnee = 0.0;
};

struct MetricReport {
  double pehne = 0.0;
  double cnee = 0.0;
  double factual_mse = 0.0;
  std::vector<RateError> per_rate;
  int m = 50;
  int replicates = 1;
  std::uint64_t seed = 0;
};

/// i.i.d. Bernoulli(p) treatment of n nodes, fixed by `seed`.
TreatmentVector sample_counterfactual(std::size_t n, double p, std::uint64_t seed);

/// Seed of the r-th draw at rate index j; shared by both metrics so they
/// score the same networks.
std::uint64_t counterfactual_seed(std::uint64_t seed, int j, int replicate = 0);

struct MetricSeries {
  double value = 0.0;
  std::vector<RateError> per_rate;  // only the matching mse_* field is filled
};

/// Mean over j = 1..m of the per-node MSE between true and estimated ITTEs,
/// where network j treats each node with probability j/m.
MetricSeries pehne(const NetworkFunction& predict_itte, const NetworkFunction& oracle_itte, std::size_t n,
                   int m = 50, std::uint64_t seed = 0, int replicates = 1);

/// Same loop over counterfactual outcomes instead of ITTEs.
MetricSeries cnee(const NetworkFunction& predict_outcome, const NetworkFunction& oracle_outcome, std::size_t n,
                  int m = 50, std::uint64_t seed = 0, int replicates = 1);

/// PEHNE and CNEE from one pass over the sampled networks. ITTEs are formed
/// from the outcome functions with their own all-zeros prediction.
MetricReport counterfactual_report(const NetworkFunction& predict_outcome, const NetworkFunction& oracle_outcome,
                                   std::size_t n, int m = 50, std::uint64_t seed = 0, int replicates = 1);

double factual_mse(Model& model, const Dataset& dataset);

/// Full report for a trained model on a dataset against the noise-free oracle.
MetricReport evaluate_model(Model& model, const Dataset& dataset, int m = 50, std::uint64_t seed = 0,
                            int replicates = 1);

NetworkFunction model_outcome_function(Model& model, const Dataset& dataset);
NetworkFunction oracle_outcome_function(const Dataset& dataset);

}  // namespace hinet
