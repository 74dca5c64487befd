#pragma once

#include <functional>
#include <string>
#include <vector>

#include "srender/tensor.hpp"

namespace srender {

/// A trainable array with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.dims()) {}

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  bool requires_grad() const;
  const std::vector<int>& dims() const { return value().dims(); }
};

/// Records a computation so gradients can be pulled back through it. One tape
/// per forward pass; nodes are appended in evaluation order, so reverse index
/// order is a valid topological order for backward.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf referencing storage owned elsewhere; must outlive the tape.
  Var constant_ref(const Tensor& value);
  /// Leaf whose gradient is accumulated into `p.grad` on backward.
  Var parameter(Parameter& p);
  /// Parameter as a constant when `track` is false (frozen network).
  Var parameter(Parameter& p, bool track) { return track ? parameter(p) : constant_ref(p.value); }
  /// Leaf whose gradient is kept on the tape (readable via grad()).
  Var variable(Tensor value);

  Var record(Tensor value, bool requires_grad, Backward backward);

  const Tensor& value(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  /// Gradient of the last backward() root with respect to node `id`; empty if
  /// no gradient reached it.
  const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  /// Gradient buffer of `id`, allocated (zeroed) on first use. For Backward
  /// implementations.
  Tensor& grad_buffer(int id);

  /// Seeds d(root)/d(root) = 1 for every element of root and propagates.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// Tensor operations on the tape. Activations are (channels, rows, cols).

/// Value copy with no gradient path back to x.
Var detach(Var x);

Var conv2d(Var x, Var weight, Var bias, int stride, int pad);
Var conv_transpose2d(Var x, Var weight, Var bias, int stride, int pad, int output_pad);
Var instance_norm(Var x, double eps = 1e-5);
Var relu(Var x);
Var leaky_relu(Var x, double slope);
Var tanh(Var x);
Var sigmoid(Var x);
/// scale * x + shift, elementwise.
Var affine(Var x, double scale, double shift);
Var add(Var a, Var b);
Var concat_channels(Var a, Var b);
/// Mean over non-overlapping 2x2 blocks.
Var avg_pool2(Var x);
Var global_avg_pool(Var x);
/// Crop of rows [row, row+rows) and cols [col, col+cols).
Var crop(Var x, int row, int col, int rows, int cols);
/// weight (out, in) times flattened x, plus bias; result (out, 1, 1).
Var linear(Var x, Var weight, Var bias);
/// Scalar sum of all elements.
Var sum(Var x);
/// Scalar mean of all elements.
Var mean(Var x);
/// log(max(x, floor)); zero gradient where clamped.
Var log_clamped(Var x, double floor);
/// Scalar Euclidean norm of (a - b). Gradient taken as zero where the norm is zero.
Var l2_distance(Var a, Var b);
/// Scalar cross-entropy of softmax(logits) against class `label`.
Var softmax_cross_entropy(Var logits, int label);

Tensor softmax(const Tensor& logits);

int conv_output_size(int in, int kernel, int stride, int pad);
int conv_transpose_output_size(int in, int kernel, int stride, int pad, int output_pad);

}  // namespace srender
