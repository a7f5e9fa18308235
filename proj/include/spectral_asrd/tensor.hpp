// Copyright 2026 The spectral-asrd Authors.
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

#ifndef SPECTRAL_ASRD_TENSOR_HPP
#define SPECTRAL_ASRD_TENSOR_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spectral_asrd/errors.hpp"

namespace spectral_asrd {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major array. The leading dimension is the batch axis for
/// images (B, C, H, W), feature maps and logits (B, K).
template <typename Scalar>
class BasicTensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;
  using MatrixMap = Eigen::Map<RowMajorMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;
  // Fixed alignment keeps Eigen's vectorized reductions bit-reproducible.
  using Storage = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    check_dims();
  }

  BasicTensor(Shape shape, const std::vector<Scalar>& data)
      : BasicTensor(std::move(shape), Storage(data.begin(), data.end())) {}

  BasicTensor(Shape shape, std::initializer_list<Scalar> data)
      : BasicTensor(std::move(shape), Storage(data.begin(), data.end())) {}

  BasicTensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != shape_size(shape_)) {
      throw ContractError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Scalar> data() noexcept { return data_; }
  std::span<const Scalar> data() const noexcept { return data_; }
  const Storage& storage() const noexcept { return data_; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  const Scalar& operator[](std::size_t i) const { return data_[i]; }

  VectorMap vec() { return VectorMap(data_.data(), static_cast<Eigen::Index>(data_.size())); }
  ConstVectorMap vec() const { return ConstVectorMap(data_.data(), static_cast<Eigen::Index>(data_.size())); }

  /// View as (dim0, product of remaining dims).
  MatrixMap matrix() { return MatrixMap(data_.data(), rows(), cols()); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(data_.data(), rows(), cols()); }

  /// Number of elements per leading-axis slice.
  std::size_t stride0() const { return shape_.empty() ? 0 : data_.size() / std::max<std::size_t>(shape_[0], 1); }

  std::span<Scalar> slice(std::size_t i) { return std::span<Scalar>(data_).subspan(i * stride0(), stride0()); }
  std::span<const Scalar> slice(std::size_t i) const {
    return std::span<const Scalar>(data_).subspan(i * stride0(), stride0());
  }

  /// Copy of leading-axis slice i with the leading axis dropped.
  BasicTensor item(std::size_t i) const {
    Shape sub(shape_.begin() + 1, shape_.end());
    auto s = slice(i);
    return BasicTensor(std::move(sub), Storage(s.begin(), s.end()));
  }

  /// Gather leading-axis slices into a new tensor.
  BasicTensor gather(std::span<const std::size_t> indices) const {
    Shape out_shape = shape_;
    out_shape[0] = indices.size();
    BasicTensor out(out_shape);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      auto src = slice(indices[k]);
      std::copy(src.begin(), src.end(), out.slice(k).begin());
    }
    return out;
  }

  void reshape(Shape shape) {
    if (shape_size(shape) != data_.size()) {
      throw ContractError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    shape_ = std::move(shape);
  }

  template <typename Other>
  BasicTensor<Other> cast() const {
    return BasicTensor<Other>(shape_, typename BasicTensor<Other>::Storage(data_.begin(), data_.end()));
  }

  bool operator==(const BasicTensor& other) const = default;

 private:
  Eigen::Index rows() const { return shape_.empty() ? 0 : static_cast<Eigen::Index>(shape_[0]); }
  Eigen::Index cols() const { return shape_.empty() || shape_[0] == 0 ? 0 : static_cast<Eigen::Index>(stride0()); }

  void check_dims() const {
    for (std::size_t d : shape_) {
      if (d == 0) throw ContractError("tensor dims must be positive, got " + shape_string(shape_));
    }
  }

  Shape shape_;
  Storage data_;
};

using Tensor = BasicTensor<float>;

/// Stack equally shaped tensors along a new leading axis.
template <typename Scalar>
BasicTensor<Scalar> stack(std::span<const BasicTensor<Scalar>> items) {
  if (items.empty()) throw ContractError("stack of zero tensors");
  Shape shape{items.size()};
  shape.insert(shape.end(), items.front().shape().begin(), items.front().shape().end());
  BasicTensor<Scalar> out(shape);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != items.front().shape()) throw ContractError("stack of mismatched shapes");
    std::copy(items[i].data().begin(), items[i].data().end(), out.slice(i).begin());
  }
  return out;
}

/// Elementwise clamp into [lo, hi].
template <typename Scalar>
void clip_inplace(BasicTensor<Scalar>& t, Scalar lo, Scalar hi) {
  for (Scalar& v : t.data()) v = std::clamp(v, lo, hi);
}

/// Largest absolute elementwise difference.
template <typename Scalar>
Scalar max_abs_diff(std::span<const Scalar> a, std::span<const Scalar> b) {
  Scalar m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_TENSOR_HPP
