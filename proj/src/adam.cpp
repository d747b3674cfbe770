#include "hinet/adam.hpp"

#include <cmath>

namespace hinet::ad {

Adam::Adam(std::span<Parameter* const> parameters, AdamOptions options)
    : params_(parameters.begin(), parameters.end()), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    Matrix g = p.grad;
    if (options_.weight_decay != 0.0) g += options_.weight_decay * p.value;
    m_[k] = b1 * m_[k] + (1.0 - b1) * g;
    v_[k] = b2 * v_[k] + (1.0 - b2) * g.cwiseProduct(g);
    const auto m_hat = m_[k].array() / correction1;
    const auto v_hat = v_[k].array() / correction2;
    p.value.array() -= options_.learning_rate * m_hat / (v_hat.sqrt() + options_.epsilon);
    p.zero_grad();
  }
}

}  // namespace hinet::ad
