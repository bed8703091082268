#include "rmfn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rmfn/error.hpp"

namespace rmfn {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out.empty() ? "scalar" : out;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto e : shape_)
    if (e == 0) throw_shape("tensor extents must be positive, got " + shape_str(shape_));
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  for (auto e : shape_)
    if (e == 0) throw_shape("tensor extents must be positive, got " + shape_str(shape_));
  if (data_.size() != shape_numel(shape_))
    throw_shape("data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) throw_shape("cannot add " + shape_str(other.shape_) + " to " + shape_str(shape_));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double scale) {
  for (auto& v : data_) v *= scale;
  return *this;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size())
    throw_shape("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::sum() const noexcept { return std::accumulate(data_.begin(), data_.end(), 0.0); }

void expect_shape(const Tensor& t, const Shape& expected, const std::string& what) {
  if (t.shape() != expected)
    throw_shape(what + ": expected shape " + shape_str(expected) + ", got " + shape_str(t.shape()));
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw_shape("dot: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace rmfn
