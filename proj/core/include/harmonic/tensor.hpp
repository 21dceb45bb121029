#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "harmonic/errors.hpp"

namespace harmonic {

using Shape = std::vector<std::size_t>;

// 64-byte aligned so vectorized kernels take the same path (and summation
// order) regardless of where the heap placed a buffer.
template <class T>
struct CacheAlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  CacheAlignedAllocator() noexcept = default;
  template <class U>
  CacheAlignedAllocator(const CacheAlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), alignment));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <class U>
  bool operator==(const CacheAlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using AlignedBuffer = std::vector<double, CacheAlignedAllocator<double>>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// The value type owns its storage; copies are deep. Graph primitives work on
/// rank-2 tensors, so a vector of length n is usually stored as 1 x n.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor filled(std::size_t rows, std::size_t cols, double value);
  static Tensor scalar(double value);
  /// 1 x n row vector.
  static Tensor row(std::span<const double> values);
  static Tensor row(std::initializer_list<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Rows and columns of a rank-2 tensor; throws DimensionError otherwise.
  std::size_t rows() const {
    if (shape_.size() != 2) not_matrix("rows()");
    return shape_[0];
  }
  std::size_t cols() const {
    if (shape_.size() != 2) not_matrix("cols()");
    return shape_[1];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * shape_[1] + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * shape_[1] + c];
  }

  std::span<double> row_span(std::size_t r) {
    const std::size_t c = cols();
    return std::span<double>(data_).subspan(r * c, c);
  }
  std::span<const double> row_span(std::size_t r) const {
    const std::size_t c = cols();
    return std::span<const double>(data_).subspan(r * c, c);
  }

  /// The single value of a one-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;
  Tensor transposed() const;

  bool all_finite() const noexcept;
  double squared_norm() const noexcept;
  double norm() const noexcept;

  void fill(double value) noexcept;
  /// this += scale * other (shapes must match).
  void add_scaled(const Tensor& other, double scale = 1.0);

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  [[noreturn]] void not_matrix(const char* what) const;
  Shape shape_;
  AlignedBuffer data_;
};

/// Throws DimensionError unless both tensors have the same shape.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
/// Throws DimensionError unless the tensor has rank 2.
void require_matrix(const Tensor& t, const char* what);

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace harmonic
