#pragma once

#include <cstdint>
#include <vector>

#include "simo/tensor.hpp"

namespace simo {

enum class OpKind : std::uint8_t {
  leaf,
  constant,
  add,
  sub,
  mul,
  matmul,
  sum,
  mean,
  square,
  dot,
  sigmoid,
  relu,
  layer_norm,
  reciprocal_eps,
  ratio_eps,
  scale,
  div_by,
  gather_rows,
  stack_rows,
  pairwise_sqdist_sum,
  pairwise_sqdot_sum,
  softmax_cross_entropy,
};

const char* op_name(OpKind kind);

/// Handle to a node on a Tape.
struct Value {
  std::uint32_t id = 0;
};

/// Per-node gradients produced by Tape::backward.
class Gradients {
 public:
  explicit Gradients(std::vector<Tensor> grads) : grads_(std::move(grads)) {}

  const Tensor& at(Value v) const { return grads_[v.id]; }
  std::size_t size() const { return grads_.size(); }

 private:
  std::vector<Tensor> grads_;
};

/// Append-only computation graph over dense tensors. Node inputs always have
/// smaller ids, so the node order is a topological order; backward walks it
/// once in reverse. Single-threaded per graph.
class Tape {
 public:
  /// Differentiable input. Rejects non-finite entries.
  Value leaf(Tensor t);
  /// Non-differentiable input (its gradient stays zero).
  Value constant(Tensor t);

  const Tensor& value(Value v) const { return nodes_[v.id].val; }
  OpKind kind(Value v) const { return nodes_[v.id].kind; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Elementwise a + b; also (RxC) + (C) row broadcast for bias terms.
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  /// (RxK) x (KxC) -> (RxC).
  Value matmul(Value a, Value b);
  /// Full reduction to a scalar.
  Value sum(Value x);
  /// Column means of a matrix (RxC -> C); mean of a vector's entries.
  Value mean(Value x);
  Value square(Value x);
  /// Vector dot product -> scalar.
  Value dot(Value a, Value b);
  Value sigmoid(Value x);
  Value relu(Value x);
  /// Per-row normalization with learned scale/shift: x (RxC) or (C),
  /// gamma (C), beta (C).
  Value layer_norm(Value x, Value gamma, Value beta, double eps = 1e-5);
  /// Elementwise 1 / (eps + x); eps is a baked-in strictly positive constant.
  Value reciprocal_eps(Value x, double eps);
  /// Elementwise num / (eps + den); eps baked in, strictly positive.
  Value ratio_eps(Value num, Value den, double eps);
  /// c * x with baked constant c.
  Value scale(Value x, double c);
  /// x / c with baked constant c != 0.
  Value div_by(Value x, double c);
  /// Select rows of a matrix by index (duplicates allowed).
  Value gather_rows(Value x, std::vector<std::size_t> rows);
  /// Stack equal-length vectors into a matrix, one per row.
  Value stack_rows(const std::vector<Value>& rows);
  /// sum over pairs i<j of ||row_i - row_j||^2 -> scalar.
  Value pairwise_sqdist_sum(Value x);
  /// sum over pairs i<j of (row_i . row_j)^2 -> scalar.
  Value pairwise_sqdot_sum(Value x);
  /// Mean negative log softmax likelihood: logits (RxC), targets (RxC)
  /// one-hot (any distribution works). Numerically stable.
  Value softmax_cross_entropy(Value logits, Value targets);

  /// d(root)/d(node) for every node; root must be scalar-shaped. Gradients
  /// of nodes unreachable from root are zero. Deterministic: identical tapes
  /// give bit-identical gradients.
  Gradients backward(Value root) const;

 private:
  struct Node {
    OpKind kind;
    std::vector<std::uint32_t> inputs;
    Tensor val;
    double c0 = 0.0;                 // eps / scale factor / divisor
    std::vector<std::size_t> rows;   // gather_rows payload
  };

  Value push(Node node);
  const Tensor& in(const Node& n, std::size_t i) const { return nodes_[n.inputs[i]].val; }

  std::vector<Node> nodes_;
};

}  // namespace simo
