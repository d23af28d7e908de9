// Copyright 2026 The xmodal Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XMODAL_NUMERICS_TENSOR_HPP_
#define XMODAL_NUMERICS_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "xmodal/errors.hpp"

namespace xmodal::numerics {

using Shape = std::vector<size_t>;

inline size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

// Row-major dense array. A tensor of rank 0 is a scalar with one value.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : values_(1, T(0)) {}
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_)) {
      throw ShapeError("tensor: " + std::to_string(values_.size()) +
                       " values for shape " + shape_string(shape_));
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }
  static Tensor vector(std::vector<T> v) {
    const size_t n = v.size();
    return Tensor(Shape{n}, std::move(v));
  }

  const Shape& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return values_.size(); }
  // Leading extent; a rank-1 tensor is a single row.
  size_t rows() const { return rank() >= 2 ? shape_[0] : 1; }
  size_t cols() const { return rank() == 0 ? 1 : shape_.back(); }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::span<T> row(size_t r) { return {values_.data() + r * cols(), cols()}; }
  std::span<const T> row(size_t r) const { return {values_.data() + r * cols(), cols()}; }

  T& operator[](size_t i) { return values_[i]; }
  const T& operator[](size_t i) const { return values_[i]; }
  T& at(size_t r, size_t c) { return values_[r * cols() + c]; }
  const T& at(size_t r, size_t c) const { return values_[r * cols() + c]; }
  T item() const {
    if (size() != 1) throw ShapeError("item: tensor is not a scalar");
    return values_[0];
  }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }
  bool all_finite() const {
    for (T v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(values_.begin(), values_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<T> values_;
};

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace xmodal::numerics

#endif  // XMODAL_NUMERICS_TENSOR_HPP_
