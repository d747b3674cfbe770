#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hinet/graph.hpp"
#include "hinet/rng.hpp"

namespace hinet::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A trainable array that outlives individual tapes. Backward passes
/// accumulate into `grad`; the optimizer consumes and clears it.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter(std::string name, Matrix initial)
      : name(std::move(name)), value(std::move(initial)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
};

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Linear record of a forward computation. Operations are appended in
/// evaluation order, so every input precedes its consumers and `backward`
/// simply walks the record in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  /// With track_gradients = false parameters are recorded as constants and
  /// no backward closures are kept (inference).
  explicit Tape(bool track_gradients = true) : track_gradients_(track_gradients) {}

  Var constant(Matrix value);
  /// A differentiable input whose gradient is read back with grad().
  Var leaf(Matrix value);
  /// Records the current parameter value; backward adds into parameter.grad.
  Var parameter(Parameter& parameter);

  /// Appends an operation output. `fn` may be empty when no input needs a
  /// gradient.
  Var record(Matrix value, bool requires_grad, BackwardFn fn);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  /// Gradient of the last backward() target with respect to v (zeros when v
  /// was not reached).
  Matrix grad(Var v) const;

  /// Adds `g` into the gradient slot of v. No-op for constants.
  template <class Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& node = nodes_[v.id];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }

  /// Zero-initialized gradient slot of v for in-place accumulation. Only
  /// valid when requires_grad(v).
  Matrix& grad_slot(Var v) {
    Node& node = nodes_[v.id];
    if (node.grad.size() == 0) node.grad.setZero(node.value.rows(), node.value.cols());
    return node.grad;
  }

  /// Reverse sweep from a 1x1 loss. Throws ShapeError on a non-scalar.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Parameter* parameter = nullptr;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool track_gradients_ = true;
  bool backward_done_ = false;
};

// Operators. Shapes follow the n x features convention: one row per node.

Var matmul(Tape& tape, Var a, Var b);
/// Elementwise sum. `b` may also be a 1 x cols row broadcast over a's rows.
Var add(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);
Var relu(Tape& tape, Var a);
Var sigmoid(Tape& tape, Var a);
/// Side-by-side concatenation of blocks with equal row counts.
Var concat_cols(Tape& tape, std::span<const Var> blocks);
Var sum(Tape& tape, Var a);

/// GIN neighborhood aggregation: out_i = (1 + eps) * x_i + sum_{j in N(i)} x_j.
/// `epsilon` is a 1x1 value.
Var gin_aggregate(Tape& tape, const UndirectedGraph& graph, Var x, Var epsilon);

/// Identity forward; multiplies the incoming gradient by -1.
Var gradient_reversal(Tape& tape, Var x);

/// Inverted dropout with drop probability `rate`. Identity when rate == 0.
Var dropout(Tape& tape, Var x, double rate, Rng& rng);

/// Mean squared error against a fixed target column.
Var mse_loss(Tape& tape, Var prediction, const Eigen::VectorXd& target);
/// Mean binary cross-entropy on logits, evaluated in the overflow-free form
/// max(z, 0) - z*y + log(1 + exp(-|z|)).
Var bce_with_logits_loss(Tape& tape, Var logits, const Eigen::VectorXd& labels);

}  // namespace hinet::ad
