#include "ssvae/nn/param_store.hpp"

#include <cmath>

#include "ssvae/error.hpp"

namespace ssvae::nn {

ParamEntry& ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  if (entries_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  ParamEntry entry;
  entry.grad = Tensor::zeros_like(value);
  entry.accumulator = Tensor::zeros_like(value);
  entry.value = std::move(value);
  entry.trainable = trainable;
  return entries_.emplace(name, std::move(entry)).first->second;
}

ParamEntry& ParamStore::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const ParamEntry& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, entry] : entries_) entry.grad.fill(0.0f);
}

std::size_t ParamStore::num_trainable_values() const {
  std::size_t n = 0;
  for (const auto& [name, entry] : entries_) {
    if (entry.trainable) n += entry.value.size();
  }
  return n;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  for (auto& [name, entry] : entries_) {
    const ParamEntry& src = other.get(name);
    if (src.value.shape() != entry.value.shape()) {
      throw ConfigError("shape mismatch copying parameter " + name);
    }
    entry.value = src.value;
  }
}

StoreSnapshot take_snapshot(const ParamStore& store) {
  StoreSnapshot snap;
  snap.state.reserve(store.size());
  for (const auto& [name, e] : store) snap.state.emplace_back(e.value, e.accumulator);
  return snap;
}

void restore_snapshot(ParamStore& store, const StoreSnapshot& snapshot) {
  if (snapshot.state.size() != store.size()) throw ConfigError("snapshot does not belong to this store");
  std::size_t i = 0;
  for (auto& [name, e] : store) {
    e.value = snapshot.state[i].first;
    e.accumulator = snapshot.state[i].second;
    e.grad.fill(0.0f);
    ++i;
  }
}

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, RngStream& rng) {
  Tensor t(std::move(shape));
  const float bound = static_cast<float>(std::sqrt(3.0 / static_cast<double>(fan_in)));
  for (float& v : t.values()) v = (2.0f * rng.uniform_float() - 1.0f) * bound;
  return t;
}

}  // namespace ssvae::nn
