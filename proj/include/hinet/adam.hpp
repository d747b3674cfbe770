#pragma once

#include <span>
#include <vector>

#include "hinet/autodiff.hpp"

namespace hinet::ad {

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Coupled L2: added to the gradient before the moment updates.
  double weight_decay = 0.0;
};

/// Adam with bias-corrected moments.
class Adam {
 public:
  Adam(std::span<Parameter* const> parameters, AdamOptions options);

  /// One update of every parameter from its accumulated gradient; gradients
  /// are zeroed afterwards.
  void step();

  long long step_count() const noexcept { return step_; }
  const AdamOptions& options() const noexcept { return options_; }
  const Matrix& first_moment(std::size_t k) const { return m_[k]; }
  const Matrix& second_moment(std::size_t k) const { return v_[k]; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions options_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long long step_ = 0;
};

}  // namespace hinet::ad
