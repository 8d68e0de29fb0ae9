#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lwf/error.hpp"

namespace lwf {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Enables the NaN/Inf contract check in check_finite(). Off by default.
void set_finite_validation(bool enabled) noexcept;
bool finite_validation_enabled() noexcept;

/// Dense row-major array. A default-constructed tensor is the null tensor (rank 0, no data).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    require(data_.size() == shape_size(shape_), ErrorKind::shape,
            "data length " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
  }

  static Tensor zeros_like(const Tensor& other) {
    Tensor t;
    t.shape_ = other.shape_;
    t.data_.assign(other.data_.size(), T{0});
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * shape_[1] + j]; }

  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  Tensor reshaped(Shape shape) const& {
    Tensor t = *this;
    t.reshape(std::move(shape));
    return t;
  }
  Tensor reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
  }

  void reshape(Shape shape) {
    validate_shape(shape);
    require(shape_size(shape) == data_.size(), ErrorKind::shape,
            "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    shape_ = std::move(shape);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  Tensor& operator+=(const Tensor& other) {
    require(shape_ == other.shape_, ErrorKind::shape,
            "cannot add " + shape_string(other.shape_) + " to " + shape_string(shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Tensor& operator*=(T scale) {
    for (auto& v : data_) v *= scale;
    return *this;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  static void validate_shape(const Shape& shape) {
    require(!shape.empty(), ErrorKind::shape, "empty shape list");
    for (auto d : shape) require(d >= 1, ErrorKind::shape, "zero dimension in shape " + shape_string(shape));
  }

  Shape shape_;
  std::vector<T> data_;
};

/// Tensor of the given shape with every element equal to fill.
template <typename T>
Tensor<T> tensor_new(const Shape& shape, T fill) {
  return Tensor<T>(shape, fill);
}

/// Throws a numeric error when validation is enabled and the tensor holds NaN/Inf.
template <typename T>
void check_finite(const Tensor<T>& t, const char* where) {
  if (finite_validation_enabled() && !t.all_finite()) fail(ErrorKind::numeric, std::string("non-finite values in ") + where);
}

}  // namespace lwf
