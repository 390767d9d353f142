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

#include "mmvc/ops.hpp"
#include "mmvc/tensor.hpp"

namespace mmvc {

// Zero padding keeps ceil(extent / stride) positions (TF "SAME" arithmetic:
// the left pad is floor((pad_total)/2)); valid padding keeps only fully
// covered positions.
enum class Pad { kZero, kValid };

int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, Pad pad);
int64_t conv_pad_begin(int64_t in, int64_t k, int64_t stride, Pad pad);

// Cross-correlation (no kernel flip).
// input [N,H,W,C_in], weights [K_h,K_w,C_in,C_out] -> [N,H',W',C_out].
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights, int64_t stride, Pad pad);

// input [N,T,H,W,C_in], weights [K_t,K_h,K_w,C_in,C_out] -> [N,T',H',W',C_out].
// The temporal stride is fixed at 1; spatial stride and padding are shared
// between H and W.
template <class T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& weights, int64_t spatial_stride,
                 Pad spatial_pad, Pad temporal_pad);

// Channel groups of size floor(shift_fraction * C): the first is shifted +1
// in time (out[t] = in[t-1]), the second -1, the rest pass through. Temporal
// boundaries fill with zero. input [N,T,H,W,C].
template <class T>
Tensor<T> temporal_shift(const Tensor<T>& input, double shift_fraction, bool enabled);

}  // namespace mmvc
