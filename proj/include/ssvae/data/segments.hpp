#pragma once

// Recordings, fixed-length windows cut from them, and per-window
// normalization.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssvae/tensor.hpp"

namespace ssvae::data {

inline constexpr int kUnlabeled = -1;
inline constexpr std::size_t kDefaultWindow = 1024;
inline constexpr double kDefaultSlidingRatio = 0.2;

struct Recording {
  std::vector<float> samples;
  int sample_rate_hz = 0;
  std::string source_id;
  int class_label = 0;
  /// Chronological position (IMS file number); 0 when not meaningful.
  std::int64_t sequence = 0;
  /// Shaft speed when known, 0 otherwise.
  int rpm = 0;
};

struct Origin {
  std::string source_id;
  std::size_t offset = 0;
  std::int64_t sequence = 0;
  friend bool operator==(const Origin&, const Origin&) = default;
};

/// Windows stored row-wise: values [N,W] (empty tensor when N == 0).
struct SegmentSet {
  Tensor values;
  std::vector<int> labels;
  std::vector<Origin> origins;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t window() const { return values.rank() == 2 ? values.dim(1) : 0; }
};

/// max(1, floor(window * ratio)). Throws ConfigError unless 0 < ratio <= 1.
std::size_t segment_stride(std::size_t window, double sliding_ratio);
/// floor((length - window) / stride) + 1, or 0 when length < window.
std::size_t segment_count(std::size_t length, std::size_t window, std::size_t stride);

/// Sliding windows over samples [begin, end) of the recording; every window
/// inherits the recording label. Throws DataError when the range is shorter
/// than one window.
SegmentSet segment(const Recording& rec, std::size_t window = kDefaultWindow,
                   double sliding_ratio = kDefaultSlidingRatio);
SegmentSet segment_range(const Recording& rec, std::size_t begin, std::size_t end, std::size_t window,
                         std::size_t stride, std::size_t max_count = SIZE_MAX);

/// Per-row (x - mean) / max(std, 1e-8), population std, in place.
void znorm(Tensor& segments);
void znorm(SegmentSet& set);

/// Rows in the given order.
SegmentSet subset(const SegmentSet& set, std::span<const std::size_t> indices);
/// Concatenation; all non-empty parts must share the window length.
SegmentSet concat(std::span<const SegmentSet> parts);
void append(SegmentSet& into, const SegmentSet& part);

/// Deterministic permutation of the set's rows.
std::vector<std::size_t> shuffle_order(std::size_t n, std::uint64_t seed);
SegmentSet shuffle_split(const SegmentSet& set, std::uint64_t seed);

}  // namespace ssvae::data
