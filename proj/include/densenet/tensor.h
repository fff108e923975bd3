// include/densenet/tensor.h

// Copyright 2026  The densenet-am authors

// See ../../COPYING for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DENSENET_TENSOR_H_
#define DENSENET_TENSOR_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "densenet/errors.h"

namespace densenet {

using Shape = std::vector<int>;

std::size_t ShapeSize(const Shape& shape);
std::string ShapeString(const Shape& shape);

/// Dense row-major array. Activations are laid out N x C x H x W; parameters
/// use whatever rank their layer needs. float is used for training and
/// inference, double for gradient checking.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(CheckedSize(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (CheckedSize(shape_) != data_.size())
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + ShapeString(shape_));
  }

  const Shape& shape() const { return shape_; }
  int dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// 4-D accessor for N x C x H x W tensors.
  T& at(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) *
                     shape_[3] + w];
  }
  const T& at(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) *
                     shape_[3] + w];
  }

  Tensor Reshaped(Shape shape) const {
    if (CheckedSize(shape) != data_.size())
      throw ShapeError("cannot reshape " + ShapeString(shape_) + " to " +
                       ShapeString(shape));
    return Tensor(std::move(shape), data_);
  }

  void Fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool AllFinite() const {
    for (T v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <typename U>
  Tensor<U> Cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static std::size_t CheckedSize(const Shape& shape) {
    for (int extent : shape)
      if (extent <= 0)
        throw ShapeError("non-positive extent in shape " + ShapeString(shape));
    return ShapeSize(shape);
  }

  Shape shape_;
  std::vector<T> data_;
};

/// Throws NumericError naming `what` if any value is NaN or Inf.
template <typename T>
void RequireFinite(const Tensor<T>& t, const std::string& what) {
  if (!t.AllFinite()) throw NumericError("non-finite value in " + what);
}

}  // namespace densenet

#endif  // DENSENET_TENSOR_H_
