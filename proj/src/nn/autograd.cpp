#include "ssvae/nn/autograd.hpp"

#include <unordered_set>

#include "ssvae/error.hpp"
#include "ssvae/nn/param_store.hpp"
#include "ssvae/simd/kernels.hpp"

namespace ssvae::nn {

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor::zeros_like(value);
  return grad;
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var leaf(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var param(ParamEntry& entry) {
  auto node = std::make_shared<Node>();
  node->value = entry.value;
  node->requires_grad = entry.trainable;
  node->param = &entry;
  return Var(std::move(node));
}

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const Var& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (const Var& in : inputs) node->inputs.push_back(in.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss.defined() || loss.value().size() != 1) {
    throw ConfigError("backward() needs a single-element loss");
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  for (Node* node : order) {
    if (node->param == nullptr || node->grad.empty()) continue;
    ParamEntry& entry = *node->param;
    if (entry.grad.empty()) entry.grad = Tensor::zeros_like(entry.value);
    simd::axpy(entry.grad.size(), 1.0f, node->grad.data(), entry.grad.data());
  }
}

void check_finite(const Var& v, const std::string& where) {
  if (!v.value().all_finite()) {
    throw NumericError("non-finite values in " + where + " output " + shape_str(v.shape()));
  }
}

}  // namespace ssvae::nn
