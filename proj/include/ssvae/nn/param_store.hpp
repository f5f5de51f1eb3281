#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ssvae/rng.hpp"
#include "ssvae/tensor.hpp"

namespace ssvae::nn {

/// One named tensor with its gradient and RMSprop accumulator. Non-trainable
/// entries hold state such as batch-norm running statistics; they are saved
/// in checkpoints but never updated by the optimizer.
struct ParamEntry {
  Tensor value;
  Tensor grad;
  Tensor accumulator;
  bool trainable = true;
};

/// Ordered by name so iteration, optimizer updates and checkpoints are
/// deterministic. Entry addresses are stable for the store's lifetime.
class ParamStore {
 public:
  ParamEntry& add(const std::string& name, Tensor value, bool trainable = true);
  ParamEntry& get(const std::string& name);
  const ParamEntry& get(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  void zero_grad();
  std::size_t num_trainable_values() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }

  /// Copies every value (not grads/accumulators) from a store with the same layout.
  void copy_values_from(const ParamStore& other);

 private:
  std::map<std::string, ParamEntry> entries_;
};

/// Values and optimizer accumulators of every entry, in store order.
struct StoreSnapshot {
  std::vector<std::pair<Tensor, Tensor>> state;
};
StoreSnapshot take_snapshot(const ParamStore& store);
/// Restores a snapshot taken from the same store; gradients are zeroed.
void restore_snapshot(ParamStore& store, const StoreSnapshot& snapshot);

/// Uniform in +-sqrt(3 / fan_in), i.e. unit-variance-preserving for linear maps.
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, RngStream& rng);

}  // namespace ssvae::nn
