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

#include <vector>

#include "mmvc/tape.hpp"
#include "mmvc/tensor.hpp"

namespace mmvc {

// Differentiable tensor ops. Every op records itself on the active tape when
// one of its inputs is tracked, validates shapes up front, and raises
// NonFiniteError if the output contains a NaN/Inf. Elementwise binary ops
// broadcast numpy-style (right-aligned, extent 1 stretches).

template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <class T> Tensor<T> neg(const Tensor<T>& a);
template <class T> Tensor<T> relu(const Tensor<T>& a);
template <class T> Tensor<T> exp(const Tensor<T>& a);
template <class T> Tensor<T> log(const Tensor<T>& a);
template <class T> Tensor<T> sqrt(const Tensor<T>& a);
template <class T> Tensor<T> abs(const Tensor<T>& a);
template <class T> Tensor<T> sigmoid(const Tensor<T>& a);

template <class T> Tensor<T> add_scalar(const Tensor<T>& a, double c);
template <class T> Tensor<T> mul_scalar(const Tensor<T>& a, double c);

// [m,k] x [k,n] -> [m,n]
template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <class T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <class T> Tensor<T> transpose(const Tensor<T>& a);  // 2-d
template <class T> Tensor<T> permute(const Tensor<T>& a, const std::vector<int>& axes);
template <class T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <class T> Tensor<T> slice(const Tensor<T>& a, int axis, int64_t start, int64_t len);

template <class T> Tensor<T> sum_all(const Tensor<T>& a);
template <class T> Tensor<T> mean_all(const Tensor<T>& a);
template <class T> Tensor<T> sum_axes(const Tensor<T>& a, const std::vector<int>& axes, bool keepdim = false);
template <class T> Tensor<T> mean_axes(const Tensor<T>& a, const std::vector<int>& axes, bool keepdim = false);
// Ties resolve to the lowest index, the subgradient goes there too.
template <class T> Tensor<T> max_axis(const Tensor<T>& a, int axis, bool keepdim = false);
// Stable log-sum-exp along one axis (max-subtracted).
template <class T> Tensor<T> lse_axis(const Tensor<T>& a, int axis, bool keepdim = false);

template <class T> Tensor<T> take_diag(const Tensor<T>& a);  // [n,n] -> [n]
template <class T> Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<int64_t>& rows);
// One element per row: out[i] = a[i, cols[i]].
template <class T> Tensor<T> gather_elems(const Tensor<T>& a, const std::vector<int64_t>& cols);

// x / ||x||_2 over the whole tensor (1-d vectors).
template <class T> Tensor<T> l2_normalize(const Tensor<T>& a);
// Per-row normalization of [n,d].
template <class T> Tensor<T> l2_normalize_rows(const Tensor<T>& a);

}  // namespace mmvc
