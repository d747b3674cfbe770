#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hinet/autodiff.hpp"
#include "hinet/dgp.hpp"
#include "hinet/graph.hpp"

namespace hinet {

enum class EstimatorKind { hinet, hinet_alpha0, hinet_no_gin_t, gin_baseline, no_network_baseline };

std::string_view to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(std::string_view text);
/// True for the estimators whose treatment head is trained with weight alpha.
bool uses_alpha(EstimatorKind kind);

enum class Mode { train, eval };

struct HiNetConfig {
  int hidden_size = 32;
  int epochs = 1000;
  double learning_rate = 0.001;
  double dropout = 0.0;
  double alpha = 0.0;
  bool use_gin_t = true;
  std::uint64_t seed = 0;
  double weight_decay = 0.001;

  void validate() const;
  friend bool operator==(const HiNetConfig&, const HiNetConfig&) = default;
};

/// Fully connected layer y = x W + b, initialised U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
class Linear {
 public:
  Linear(const std::string& name, int in, int out, std::uint64_t seed);
  ad::Var apply(ad::Tape& tape, ad::Var x);
  void collect(std::vector<ad::Parameter*>& out) { out.push_back(&weight_); out.push_back(&bias_); }

 private:
  ad::Parameter weight_;
  ad::Parameter bias_;
};

/// Stack of Linear layers with ReLU (and training-mode dropout) after every
/// hidden layer. With `linear_output` the final layer has no activation.
class Mlp {
 public:
  Mlp(const std::string& name, std::vector<int> widths, bool linear_output, double dropout,
      std::uint64_t seed);
  ad::Var forward(ad::Tape& tape, ad::Var x, Mode mode);
  void collect(std::vector<ad::Parameter*>& out);
  int output_width() const { return widths_.back(); }

 private:
  std::vector<int> widths_;
  std::vector<Linear> layers_;
  bool linear_output_;
  double dropout_;
  Rng rng_;
};

struct ForwardOptions {
  Mode mode = Mode::eval;
  // Skip the treatment branch entirely (outputs without t_logits).
  bool treatment_branch = true;
  // Diagnostics only: replace gradient reversal layers by identities.
  bool reverse_gradients = true;
};

struct ForwardPass {
  ad::Var y_hat;
  std::optional<ad::Var> t_logits;
  // Node representation fed to the outcome branch (phi for HINet).
  ad::Var representation;
};

class Model {
 public:
  Model(EstimatorKind kind, int input_dim, HiNetConfig config)
      : kind_(kind), input_dim_(input_dim), config_(config) {}
  virtual ~Model() = default;

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  virtual ForwardPass forward(ad::Tape& tape, const UndirectedGraph& graph, const FeatureMatrix& features,
                              std::span<const Treatment> treatments, const ForwardOptions& options) = 0;
  virtual bool has_treatment_head() const { return false; }

  /// Parameters in a fixed order with unique names.
  std::vector<ad::Parameter*> parameters();

  EstimatorKind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  const HiNetConfig& config() const { return config_; }

 protected:
  virtual void collect(std::vector<ad::Parameter*>& out) = 0;
  void check_inputs(const UndirectedGraph& graph, const FeatureMatrix& features,
                    std::span<const Treatment> treatments) const;

 private:
  EstimatorKind kind_;
  int input_dim_;
  HiNetConfig config_;
};

/// Encoder e_phi, outcome branch GIN_Y -> p_Y and the adversarial treatment
/// branch GRL -> GIN_T -> d_T.
class HiNetModel final : public Model {
 public:
  HiNetModel(EstimatorKind kind, int input_dim, HiNetConfig config);
  ForwardPass forward(ad::Tape& tape, const UndirectedGraph& graph, const FeatureMatrix& features,
                      std::span<const Treatment> treatments, const ForwardOptions& options) override;
  bool has_treatment_head() const override { return true; }
  bool uses_gin_t() const { return gin_t_.has_value(); }

 protected:
  void collect(std::vector<ad::Parameter*>& out) override;

 private:
  Mlp encoder_;
  ad::Parameter gin_y_epsilon_;
  Mlp gin_y_;
  Mlp p_y_;
  std::optional<ad::Parameter> gin_t_epsilon_;
  std::optional<Mlp> gin_t_;
  Mlp d_t_;
};

/// GIN over raw features and treatments followed by an MLP head.
class GinBaseline final : public Model {
 public:
  GinBaseline(int input_dim, HiNetConfig config);
  ForwardPass forward(ad::Tape& tape, const UndirectedGraph& graph, const FeatureMatrix& features,
                      std::span<const Treatment> treatments, const ForwardOptions& options) override;

 protected:
  void collect(std::vector<ad::Parameter*>& out) override;

 private:
  ad::Parameter epsilon_;
  Mlp gin_;
  Mlp head_;
};

/// Shared feature MLP with one outcome head per own-treatment value. Ignores
/// the graph and every other node's treatment.
class NoNetworkBaseline final : public Model {
 public:
  NoNetworkBaseline(int input_dim, HiNetConfig config);
  ForwardPass forward(ad::Tape& tape, const UndirectedGraph& graph, const FeatureMatrix& features,
                      std::span<const Treatment> treatments, const ForwardOptions& options) override;

 protected:
  void collect(std::vector<ad::Parameter*>& out) override;

 private:
  Mlp shared_;
  Mlp head_control_;
  Mlp head_treated_;
};

/// Builds an untrained model. hinet_alpha0 forces alpha = 0 and
/// hinet_no_gin_t forces use_gin_t = false.
std::unique_ptr<Model> make_model(EstimatorKind kind, int input_dim, HiNetConfig config);

/// Effective configuration after the estimator's forced settings.
HiNetConfig effective_config(EstimatorKind kind, HiNetConfig config);

struct LossTerms {
  ad::Var total;
  ad::Var outcome;
  std::optional<ad::Var> treatment;
};

/// L_y + alpha * L_t. With alpha == 0 or no logits the total is L_y itself
/// and the treatment term is not recorded.
LossTerms combined_loss(ad::Tape& tape, ad::Var y_hat, const Vector& outcomes, std::optional<ad::Var> t_logits,
                        std::span<const Treatment> treatments, double alpha);

/// Eval-mode outcome predictions under the assignment t_cf.
Vector predict_potential(Model& model, const UndirectedGraph& graph, const FeatureMatrix& features,
                         std::span<const Treatment> t_cf);

/// prediction(t_cf) - prediction(all zeros).
Vector estimate_itte(Model& model, const UndirectedGraph& graph, const FeatureMatrix& features,
                     std::span<const Treatment> t_cf);

/// Eval-mode node representations.
ad::Matrix representations(Model& model, const UndirectedGraph& graph, const FeatureMatrix& features,
                           std::span<const Treatment> treatments);

/// Biased (V-statistic) squared MMD with kernel exp(-|a-b|^2 / (2 bw^2)).
double mmd_squared(const ad::Matrix& a, const ad::Matrix& b, double bandwidth = 1.0);

struct BalancingReport {
  // Representations grouped by the node's own treatment.
  double own_treatment = 0.0;
  // Grouped by the treatment of one uniformly sampled neighbor.
  double neighbor_treatment = 0.0;
};

/// Squared MMD between treated and control representation sets, each group
/// capped at `max_group` nodes by seeded subsampling.
BalancingReport balancing_diagnostic(Model& model, const Dataset& dataset, std::uint64_t seed,
                                     std::size_t max_group = 1000);

Vector to_vector(std::span<const Treatment> t);

}  // namespace hinet
