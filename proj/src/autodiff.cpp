#include "hinet/autodiff.hpp"

#include <cmath>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "hinet/error.hpp"

namespace hinet::ad {

namespace {

#if defined(__GLIBC__)
// Tapes allocate and free many n x h buffers per epoch. Above glibc's mmap
// threshold every one of them is a fresh mapping and a round of page faults,
// which costs about as much as the arithmetic. Keep them on the heap instead.
const bool kHeapTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
#endif

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Var Tape::constant(Matrix value) { return record(std::move(value), false, {}); }

Var Tape::leaf(Matrix value) { return record(std::move(value), track_gradients_, {}); }

Var Tape::parameter(Parameter& parameter) {
  if (!track_gradients_) return constant(parameter.value);
  Var v = record(parameter.value, true, {});
  nodes_[v.id].parameter = &parameter;
  return v;
}

Var Tape::record(Matrix value, bool requires_grad, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Matrix Tape::grad(Var v) const {
  const Node& node = nodes_[v.id];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var loss) {
  if (nodes_[loss.id].value.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + shape_of(nodes_[loss.id].value));
  }
  if (backward_done_) throw std::logic_error("backward called twice on the same tape");
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad = Matrix::Ones(1, 1);
  for (std::size_t k = loss.id + 1; k-- > 0;) {
    Node& node = nodes_[k];
    if (!node.requires_grad || node.grad.size() == 0) continue;
    if (node.backward) node.backward(*this, node.grad);
    if (node.parameter != nullptr) node.parameter->grad += node.grad;
  }
}

Var matmul(Tape& tape, Var a, Var b) {
  const Matrix& av = tape.value(a);
  const Matrix& bv = tape.value(b);
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: " + shape_of(av) + " times " + shape_of(bv));
  }
  Matrix out = av * bv;
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(std::move(out), rg, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_slot(a).noalias() += g * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad_slot(b).noalias() += t.value(a).transpose() * g;
  });
}

Var add(Tape& tape, Var a, Var b) {
  const Matrix& av = tape.value(a);
  const Matrix& bv = tape.value(b);
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    return tape.record(av + bv, rg, [a, b](Tape& t, const Matrix& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }
  if (bv.rows() == 1 && bv.cols() == av.cols()) {
    Matrix out = av.rowwise() + bv.row(0);
    return tape.record(std::move(out), rg, [a, b](Tape& t, const Matrix& g) {
      t.accumulate(a, g);
      if (t.requires_grad(b)) t.accumulate(b, g.colwise().sum());
    });
  }
  throw ShapeError("add: " + shape_of(av) + " plus " + shape_of(bv));
}

Var mul(Tape& tape, Var a, Var b) {
  const Matrix& av = tape.value(a);
  const Matrix& bv = tape.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw ShapeError("mul: " + shape_of(av) + " times " + shape_of(bv));
  }
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(av.cwiseProduct(bv), rg, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

Var scale(Tape& tape, Var a, double factor) {
  return tape.record(tape.value(a) * factor, tape.requires_grad(a),
                     [a, factor](Tape& t, const Matrix& g) { t.accumulate(a, g * factor); });
}

Var relu(Tape& tape, Var a) {
  Matrix out = tape.value(a).cwiseMax(0.0);
  return tape.record(std::move(out), tape.requires_grad(a), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (t.value(a).array() > 0.0).select(g.array(), 0.0).matrix());
  });
}

Var sigmoid(Tape& tape, Var a) {
  auto logistic = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  Matrix out = tape.value(a).unaryExpr(logistic);
  return tape.record(std::move(out), tape.requires_grad(a), [a, logistic](Tape& t, const Matrix& g) {
    const Matrix s = t.value(a).unaryExpr(logistic);
    t.accumulate(a, g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
  });
}

Var concat_cols(Tape& tape, std::span<const Var> blocks) {
  if (blocks.empty()) throw ShapeError("concat_cols: no blocks");
  const Eigen::Index rows = tape.value(blocks[0]).rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (Var v : blocks) {
    if (tape.value(v).rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += tape.value(v).cols();
    rg = rg || tape.requires_grad(v);
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (Var v : blocks) {
    const Matrix& bv = tape.value(v);
    out.middleCols(offset, bv.cols()) = bv;
    offset += bv.cols();
  }
  std::vector<Var> inputs(blocks.begin(), blocks.end());
  return tape.record(std::move(out), rg, [inputs](Tape& t, const Matrix& g) {
    Eigen::Index off = 0;
    for (Var v : inputs) {
      const Eigen::Index c = t.value(v).cols();
      if (t.requires_grad(v)) t.accumulate(v, g.middleCols(off, c));
      off += c;
    }
  });
}

Var sum(Tape& tape, Var a) {
  Matrix out(1, 1);
  out(0, 0) = tape.value(a).sum();
  return tape.record(std::move(out), tape.requires_grad(a), [a](Tape& t, const Matrix& g) {
    const Matrix& av = t.value(a);
    t.accumulate(a, Matrix::Constant(av.rows(), av.cols(), g(0, 0)));
  });
}

Var gin_aggregate(Tape& tape, const UndirectedGraph& graph, Var x, Var epsilon) {
  const Matrix& xv = tape.value(x);
  if (static_cast<std::size_t>(xv.rows()) != graph.node_count()) {
    throw ShapeError("gin_aggregate: " + std::to_string(xv.rows()) + " rows for a graph of " +
                     std::to_string(graph.node_count()) + " nodes");
  }
  if (tape.value(epsilon).size() != 1) throw ShapeError("gin_aggregate: epsilon must be 1x1");
  const double self_weight = 1.0 + tape.value(epsilon)(0, 0);
  Matrix out = self_weight * xv;
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    for (std::size_t j : graph.neighbors(i)) {
      out.row(static_cast<Eigen::Index>(i)) += xv.row(static_cast<Eigen::Index>(j));
    }
  }
  const bool rg = tape.requires_grad(x) || tape.requires_grad(epsilon);
  const UndirectedGraph* g_ptr = &graph;
  return tape.record(std::move(out), rg, [x, epsilon, g_ptr, self_weight](Tape& t, const Matrix& g) {
    if (t.requires_grad(x)) {
      // The neighbor relation is symmetric, so the adjoint has the same form.
      Matrix dx = self_weight * g;
      for (std::size_t i = 0; i < g_ptr->node_count(); ++i) {
        for (std::size_t j : g_ptr->neighbors(i)) {
          dx.row(static_cast<Eigen::Index>(i)) += g.row(static_cast<Eigen::Index>(j));
        }
      }
      t.accumulate(x, dx);
    }
    if (t.requires_grad(epsilon)) {
      Matrix de(1, 1);
      de(0, 0) = t.value(x).cwiseProduct(g).sum();
      t.accumulate(epsilon, de);
    }
  });
}

Var gradient_reversal(Tape& tape, Var x) {
  return tape.record(tape.value(x), tape.requires_grad(x),
                     [x](Tape& t, const Matrix& g) { t.accumulate(x, -g); });
}

Var dropout(Tape& tape, Var x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be below 1");
  const Matrix& xv = tape.value(x);
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  Matrix mask(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? inv : 0.0;
  Var m = tape.constant(std::move(mask));
  return mul(tape, x, m);
}

Var mse_loss(Tape& tape, Var prediction, const Eigen::VectorXd& target) {
  const Matrix& p = tape.value(prediction);
  if (p.cols() != 1 || p.rows() != target.size()) {
    throw ShapeError("mse_loss: prediction " + shape_of(p) + " vs target of length " +
                     std::to_string(target.size()));
  }
  const Eigen::VectorXd diff = p.col(0) - target;
  const double n = static_cast<double>(target.size());
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  return tape.record(std::move(out), tape.requires_grad(prediction),
                     [prediction, diff, n](Tape& t, const Matrix& g) {
                       t.accumulate(prediction, (2.0 * g(0, 0) / n) * diff);
                     });
}

Var bce_with_logits_loss(Tape& tape, Var logits, const Eigen::VectorXd& labels) {
  const Matrix& z = tape.value(logits);
  if (z.cols() != 1 || z.rows() != labels.size()) {
    throw ShapeError("bce_with_logits_loss: logits " + shape_of(z) + " vs labels of length " +
                     std::to_string(labels.size()));
  }
  const double n = static_cast<double>(labels.size());
  double total = 0.0;
  Eigen::VectorXd dz(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double zi = z(i, 0);
    const double yi = labels[i];
    total += std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
    dz[i] = 1.0 / (1.0 + std::exp(-zi)) - yi;
  }
  Matrix out(1, 1);
  out(0, 0) = total / n;
  return tape.record(std::move(out), tape.requires_grad(logits), [logits, dz, n](Tape& t, const Matrix& g) {
    t.accumulate(logits, (g(0, 0) / n) * dz);
  });
}

}  // namespace hinet::ad
