#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedecg/error.hpp"

namespace fedecg {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array of rank 1..3. Signals are laid out channels x length.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_size(shape_), fill);
  }

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    require(shape_size(shape_) == data_.size(), ErrorCode::kShapeMismatch,
            "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_to_string(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Element (c, t) of a rank-2 tensor.
  T& at(std::size_t c, std::size_t t) { return data_[c * shape_[1] + t]; }
  const T& at(std::size_t c, std::size_t t) const { return data_[c * shape_[1] + t]; }

  std::span<T> row(std::size_t c) { return std::span<T>(data_).subspan(c * shape_[1], shape_[1]); }
  std::span<const T> row(std::size_t c) const {
    return std::span<const T>(data_).subspan(c * shape_[1], shape_[1]);
  }

  void reshape(Shape shape) {
    check_shape(shape);
    require(shape_size(shape) == data_.size(), ErrorCode::kShapeMismatch,
            "cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    shape_ = std::move(shape);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  static void check_shape(const Shape& shape) {
    require(!shape.empty() && shape.size() <= 3, ErrorCode::kShapeMismatch,
            "tensor rank must be 1..3, got " + std::to_string(shape.size()));
    for (std::size_t d : shape) {
      require(d > 0, ErrorCode::kShapeMismatch, "tensor dimensions must be positive");
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

}  // namespace fedecg
