#include "ssvae/data/segments.hpp"

#include <algorithm>
#include <cmath>

#include "ssvae/error.hpp"
#include "ssvae/rng.hpp"

namespace ssvae::data {

std::size_t segment_stride(std::size_t window, double sliding_ratio) {
  if (window == 0) throw ConfigError("window must be positive");
  if (!(sliding_ratio > 0.0 && sliding_ratio <= 1.0)) {
    throw ConfigError("sliding ratio must lie in (0, 1], got " + std::to_string(sliding_ratio));
  }
  const auto stride = static_cast<std::size_t>(std::floor(static_cast<double>(window) * sliding_ratio));
  return std::max<std::size_t>(1, stride);
}

std::size_t segment_count(std::size_t length, std::size_t window, std::size_t stride) {
  if (stride == 0) throw ConfigError("stride must be positive");
  if (length < window || window == 0) return 0;
  return (length - window) / stride + 1;
}

SegmentSet segment(const Recording& rec, std::size_t window, double sliding_ratio) {
  return segment_range(rec, 0, rec.samples.size(), window, segment_stride(window, sliding_ratio));
}

SegmentSet segment_range(const Recording& rec, std::size_t begin, std::size_t end, std::size_t window,
                         std::size_t stride, std::size_t max_count) {
  if (end > rec.samples.size() || begin > end) throw ConfigError("segment range outside the recording");
  const std::size_t count = std::min(max_count, segment_count(end - begin, window, stride));
  if (window == 0 || end - begin < window) {
    throw DataError("recording " + rec.source_id + " has " + std::to_string(end - begin) +
                    " samples in range, shorter than the window " + std::to_string(window));
  }
  SegmentSet out;
  out.values = Tensor::uninitialized({count, window});
  out.labels.assign(count, rec.class_label);
  out.origins.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t offset = begin + i * stride;
    std::copy_n(rec.samples.data() + offset, window, out.values.data() + i * window);
    out.origins.push_back({rec.source_id, offset, rec.sequence});
  }
  return out;
}

void znorm(Tensor& segments) {
  if (segments.empty()) return;
  if (segments.rank() != 2) throw ConfigError("znorm expects [N,W], got " + shape_str(segments.shape()));
  const std::size_t w = segments.dim(1);
  for (std::size_t r = 0; r < segments.dim(0); ++r) {
    float* row = segments.data() + r * w;
    double mean = 0.0;
    for (std::size_t i = 0; i < w; ++i) mean += row[i];
    mean /= static_cast<double>(w);
    double var = 0.0;
    for (std::size_t i = 0; i < w; ++i) var += (row[i] - mean) * (row[i] - mean);
    const double sd = std::max(std::sqrt(var / static_cast<double>(w)), 1e-8);
    for (std::size_t i = 0; i < w; ++i) row[i] = static_cast<float>((row[i] - mean) / sd);
  }
}

void znorm(SegmentSet& set) { znorm(set.values); }

SegmentSet subset(const SegmentSet& set, std::span<const std::size_t> indices) {
  SegmentSet out;
  if (indices.empty()) return out;
  for (auto i : indices) {
    if (i >= set.size()) throw ConfigError("segment index out of range");
  }
  out.values = gather_rows(set.values, indices);
  out.labels.reserve(indices.size());
  out.origins.reserve(indices.size());
  for (auto i : indices) {
    out.labels.push_back(set.labels[i]);
    out.origins.push_back(set.origins[i]);
  }
  return out;
}

void append(SegmentSet& into, const SegmentSet& part) {
  if (part.empty()) return;
  if (into.empty()) {
    into = part;
    return;
  }
  if (part.window() != into.window()) throw ConfigError("cannot concatenate segments of different lengths");
  Tensor values = Tensor::uninitialized({into.size() + part.size(), into.window()});
  std::copy_n(into.values.data(), into.values.size(), values.data());
  std::copy_n(part.values.data(), part.values.size(), values.data() + into.values.size());
  into.values = std::move(values);
  into.labels.insert(into.labels.end(), part.labels.begin(), part.labels.end());
  into.origins.insert(into.origins.end(), part.origins.begin(), part.origins.end());
}

SegmentSet concat(std::span<const SegmentSet> parts) {
  std::size_t n = 0, w = 0;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (w != 0 && p.window() != w) throw ConfigError("cannot concatenate segments of different lengths");
    w = p.window();
    n += p.size();
  }
  SegmentSet out;
  if (n == 0) return out;
  out.values = Tensor::uninitialized({n, w});
  out.labels.reserve(n);
  out.origins.reserve(n);
  std::size_t at = 0;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    std::copy_n(p.values.data(), p.values.size(), out.values.data() + at);
    at += p.values.size();
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    out.origins.insert(out.origins.end(), p.origins.begin(), p.origins.end());
  }
  return out;
}

std::vector<std::size_t> shuffle_order(std::size_t n, std::uint64_t seed) { return RngStream(seed).permutation(n); }

SegmentSet shuffle_split(const SegmentSet& set, std::uint64_t seed) {
  const auto order = shuffle_order(set.size(), seed);
  return subset(set, order);
}

}  // namespace ssvae::data
