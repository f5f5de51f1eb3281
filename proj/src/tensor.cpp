#include "ssvae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "ssvae/error.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ssvae {

namespace {

#if defined(__GLIBC__)
// Activations are allocated and freed at the same sizes every step. Keeping
// large blocks on the heap instead of fresh mmap()s avoids re-faulting and
// re-zeroing pages on every allocation.
const bool kMallocTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  return true;
}();
#endif

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ConfigError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw ConfigError("tensor dimensions must be positive, got " + shape_str(shape));
  }
}
}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  validate_shape(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw ConfigError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                      shape_str(shape_));
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ConfigError("axis out of range for shape " + shape_str(shape_));
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ConfigError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

Tensor Tensor::uninitialized(Shape shape) {
  validate_shape(shape);
  Tensor out;
  out.data_.resize(shape_numel(shape));
  out.shape_ = std::move(shape);
  return out;
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor Tensor::rows(std::size_t begin, std::size_t end) const {
  if (shape_.empty() || begin >= end || end > shape_[0]) {
    throw ConfigError("row range out of bounds for shape " + shape_str(shape_));
  }
  Shape s = shape_;
  s[0] = end - begin;
  const std::size_t stride = data_.size() / shape_[0];
  Tensor out = uninitialized(std::move(s));
  std::copy_n(data_.data() + begin * stride, out.size(), out.data());
  return out;
}

Tensor gather_rows(const Tensor& source, std::span<const std::size_t> indices) {
  if (source.rank() == 0 || indices.empty()) throw ConfigError("gather_rows: need a tensor and at least one index");
  const std::size_t row = source.size() / source.dim(0);
  Shape shape = source.shape();
  shape[0] = indices.size();
  Tensor out = Tensor::uninitialized(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= source.dim(0)) throw ConfigError("gather_rows: index out of range");
    std::copy_n(source.data() + indices[i] * row, row, out.data() + i * row);
  }
  return out;
}

bool bit_identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace ssvae
