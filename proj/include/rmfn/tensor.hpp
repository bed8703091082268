#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace rmfn {

using Shape = std::vector<std::size_t>;

// Eigen picks its vectorized path from each buffer's address, so buffers at
// differently aligned addresses can round differently. A fixed alignment
// keeps repeated runs bit-identical.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. Feature maps are C x H x W.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // Rank-3 accessors (channel, row, column).
  double& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  void fill(double value);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double scale);

  /// Same data, new shape of equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;
  double sum() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  AlignedBuffer data_;
};

/// Throws a shape error naming `what` unless `t` has exactly `expected`.
void expect_shape(const Tensor& t, const Shape& expected, const std::string& what);

double dot(const Tensor& a, const Tensor& b);

}  // namespace rmfn
