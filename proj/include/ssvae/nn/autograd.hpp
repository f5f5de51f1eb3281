#pragma once

// Minimal tape-free reverse-mode autodiff. Every op returns a Var that owns
// its value and keeps shared references to its inputs; backward() walks the
// graph in reverse topological order from a scalar loss.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ssvae/tensor.hpp"

namespace ssvae::nn {

struct ParamEntry;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  ParamEntry* param = nullptr;  // set for leaves bound to a ParamStore entry

  /// Zero-initialized gradient buffer matching value's shape.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  /// Gradient after backward(); empty tensor if none reached this node.
  const Tensor& grad() const { return node_->grad; }
  bool defined() const noexcept { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Value that takes no gradient.
Var constant(Tensor value);
/// Free leaf that accumulates a gradient (used by checks and tests).
Var leaf(Tensor value);
/// Leaf bound to a parameter; backward() adds into entry.grad.
Var param(ParamEntry& entry);

/// Builds an op node. backward_fn receives the node after its grad has been
/// filled and must accumulate into inputs[i]->grad_buffer() for inputs that
/// require grad. Dropped entirely if no input requires grad.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

/// Reverse pass from a single-element loss. Parameter leaves have their
/// gradients added into their ParamStore entries.
void backward(const Var& loss);

/// Throws NumericError naming `where` if the value has NaN/Inf entries.
void check_finite(const Var& v, const std::string& where);

}  // namespace ssvae::nn
