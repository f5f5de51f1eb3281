#pragma once

// On-disk layout:
//
//   SSVAE01\n
//   kind <tag>\n
//   meta <key> <value>\n          (zero or more)
//   entry <name> f32 <rank> <d0> ... <dn>\n   (one per tensor)
//   end\n
//   <payload of each entry in header order, raw little-endian float32>

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ssvae/nn/param_store.hpp"
#include "ssvae/tensor.hpp"

namespace ssvae::nn {

inline constexpr char kCheckpointMagic[] = "SSVAE01\n";

struct Checkpoint {
  std::string kind;
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> entries;

  const Tensor& entry(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;
  std::size_t meta_size(const std::string& key) const;
  double meta_double(const std::string& key) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Appends every entry of the store (values only), in name order.
void append_store(Checkpoint& checkpoint, const ParamStore& store);
/// Restores values for every store entry; shapes must match exactly.
void restore_store(const Checkpoint& checkpoint, ParamStore& store);

}  // namespace ssvae::nn
