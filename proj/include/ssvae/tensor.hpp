#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>
#include <memory>

namespace ssvae {

/// Allocator whose value-less construct() leaves floats uninitialized, so
/// buffers that are about to be overwritten skip the zero fill.
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  template <typename U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

using FloatStorage = std::vector<float, DefaultInitAllocator<float>>;

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major float32 array. Every dimension is positive and
/// product(shape) == size() at all times.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }
  /// Contents are indeterminate; the caller must write every element.
  static Tensor uninitialized(Shape shape);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  float& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  float at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  float& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  float at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  void fill(float value);
  bool all_finite() const noexcept;

  /// Rows [begin, end) along axis 0.
  Tensor rows(std::size_t begin, std::size_t end) const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  FloatStorage data_;
};

/// Rows of a tensor (indexed along axis 0) gathered in the given order.
Tensor gather_rows(const Tensor& source, std::span<const std::size_t> indices);

/// Bitwise comparison (distinguishes -0/+0 and compares NaN payloads).
bool bit_identical(const Tensor& a, const Tensor& b);

}  // namespace ssvae
