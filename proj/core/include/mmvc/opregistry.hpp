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
#include <string>
#include <vector>

#include "mmvc/conv.hpp"
#include "mmvc/nn.hpp"
#include "mmvc/tensor.hpp"

namespace mmvc {

// Attribute bag for forward_op; each op reads only the fields it needs.
struct OpAttrs {
  int axis = 0;
  std::vector<int> axes;        // sum_axes / mean_axes
  bool keepdim = false;
  Shape shape;                  // reshape target
  std::vector<int> perm;        // permute order
  int64_t start = 0, len = 0;   // slice window
  double scalar = 0.0;          // add_scalar / mul_scalar constant
  std::vector<int64_t> index;   // gather_rows / gather_elems
  int64_t stride = 1;           // conv spatial stride
  Pad spatial_pad = Pad::kZero;
  Pad temporal_pad = Pad::kZero;
  PoolKind pool_kind = PoolKind::kSpatiotemporalAvg;
  double shift_fraction = 0.125;
  bool shift_enabled = true;
  double bn_epsilon = 1e-5;
  bool train = true;            // batch_norm mode
};

// String-keyed dispatch over the differentiable op set, for data-driven
// checking and tooling. Input conventions follow the underlying functions;
// multi-input ops take them in declaration order. "batch_norm" takes
// {x, gamma, beta, moving_mean, moving_var}; in train mode it folds batch
// statistics into the supplied moving tensors in place, like BatchNorm.
// Unknown names raise UnknownOpError; bad arity raises ShapeError.
template <class T>
Tensor<T> forward_op(const std::string& name, const std::vector<Tensor<T>>& inputs,
                     const OpAttrs& attrs = {});

// Canonical list of names forward_op accepts.
const std::vector<std::string>& registered_ops();

}  // namespace mmvc
