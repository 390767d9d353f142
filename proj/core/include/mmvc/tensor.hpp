// Copyright 2026 The mmvc Authors.
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

#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "mmvc/common.hpp"

namespace mmvc {

enum class DType { kF32, kF64 };

template <class T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::kF32; }
template <>
constexpr DType dtype_of<double>() { return DType::kF64; }

// Where (if anywhere) a tensor lives on a recording tape. Shared across
// copies of the same logical tensor so that parameters handed to an op by
// value still pick up their leaf node.
struct TapeSlot {
  uint64_t tape_id = 0;
  int32_t node = -1;
};

// Dense row-major N-d array. The buffer is shared and treated as immutable
// after construction; "mutation" means swapping in a fresh buffer. The one
// sanctioned exception is the optimizer, which owns all parameters on the
// single training thread and updates them through mutable_data().
template <class T>
class Tensor {
 public:
  Tensor() : data_(std::make_shared<std::vector<T>>()), slot_(std::make_shared<TapeSlot>()) {}

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<T>>(static_cast<size_t>(numel_checked(shape_)))),
        slot_(std::make_shared<TapeSlot>()) {}

  Tensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<T>>(std::move(values))),
        slot_(std::make_shared<TapeSlot>()) {
    check_shape(static_cast<int64_t>(data_->size()) == numel(shape_),
                "Tensor: data length " + std::to_string(data_->size()) +
                    " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    for (auto& x : *t.data_) x = value;
    return t;
  }

  static Tensor scalar(T value) { return Tensor({}, {value}); }

  const Shape& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_->size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape_.size()); }
  DType dtype() const { return dtype_of<T>(); }

  const T* ptr() const { return data_->data(); }
  const std::vector<T>& values() const { return *data_; }

  // Raw write access, for construction-time fills and the optimizer only.
  T* mutable_data() { return data_->data(); }
  std::vector<T>& mutable_values() { return *data_; }

  T item() const {
    check_shape(size() == 1, "item(): tensor is not a scalar, shape " + shape_str(shape_));
    return (*data_)[0];
  }

  T at(int64_t flat) const { return (*data_)[static_cast<size_t>(flat)]; }

  bool requires_grad() const { return requires_grad_; }
  Tensor& set_requires_grad(bool v) {
    requires_grad_ = v;
    return *this;
  }

  const std::shared_ptr<TapeSlot>& slot() const { return slot_; }
  const std::shared_ptr<std::vector<T>>& buffer() const { return data_; }

  // Deep copy with a fresh identity (not tracked anywhere).
  Tensor clone() const { return Tensor(shape_, *data_); }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(data_->size());
    for (size_t i = 0; i < data_->size(); ++i) out[i] = static_cast<U>((*data_)[i]);
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  static int64_t numel_checked(const Shape& s) {
    for (int64_t d : s) check_shape(d >= 0, "Tensor: negative extent in shape " + shape_str(s));
    return numel(s);
  }

  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
  bool requires_grad_ = false;
  std::shared_ptr<TapeSlot> slot_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// Row-major strides for a shape.
std::vector<int64_t> strides_of(const Shape& shape);

template <class T>
void check_finite(const std::vector<T>& v, const char* op);

}  // namespace mmvc
