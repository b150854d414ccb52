#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tfq/error.hpp"

namespace tfq::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

// Eigen's vectorized kernels pick their loop split from the buffer address,
// so results only reproduce bit for bit if every buffer has the same alignment.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <class U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major tensor of doubles.
struct Tensor {
  Shape shape;
  Buffer data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(shape_size(shape), fill) {}
  Tensor(Shape s, const std::vector<double>& values) : shape(std::move(s)), data(values.begin(), values.end()) {
    if (data.size() != shape_size(shape)) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                           shape_string(shape));
    }
  }

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  /// (c, y, x) accessor for rank-3 tensors.
  double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * shape[1] + y) * shape[2] + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * shape[1] + y) * shape[2] + x];
  }

  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }

  bool all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline void require_shape(const Tensor& t, const Shape& expected, const std::string& where) {
  if (t.shape != expected) {
    throw DimensionError(where + ": expected shape " + shape_string(expected) + ", got " + shape_string(t.shape));
  }
}

}  // namespace tfq::nn
