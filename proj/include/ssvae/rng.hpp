#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ssvae {

/// Portable seeded random stream (xoshiro256** seeded through splitmix64).
///
/// The integer sequence is fully specified, so the same seed yields the same
/// draws on every platform. Normal variates use the Marsaglia polar method,
/// which needs only sqrt and log, instead of std::normal_distribution whose
/// output differs between standard library implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform float in [0, 1) with 24 random bits.
  float uniform_float() noexcept;
  /// Uniform integer in [0, n). Unbiased (rejection sampling). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  double normal() noexcept;
  void fill_normal(std::span<float> out) noexcept;

  /// Independent child stream; deterministic in (seed, stream_id).
  RngStream split(std::uint64_t stream_id) const noexcept;

  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Random permutation of [0, n).
  std::vector<std::size_t> permutation(std::size_t n) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ssvae
