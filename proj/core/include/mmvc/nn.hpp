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

#include <string>
#include <utility>
#include <vector>

#include "mmvc/conv.hpp"
#include "mmvc/ops.hpp"
#include "mmvc/rng.hpp"
#include "mmvc/tensor.hpp"

namespace mmvc {

// Ordered name -> tensor registry. Iteration order is registration order, so
// optimizer updates and checkpoint layout are deterministic. Non-trainable
// entries (BN moving stats) are checkpointed but skipped by the optimizer.
template <class T>
class ParamMap {
 public:
  struct Entry {
    std::string name;
    Tensor<T>* tensor;
    bool trainable;
  };

  void add(const std::string& name, Tensor<T>* t, bool trainable = true);
  const std::vector<Entry>& entries() const { return entries_; }
  Tensor<T>* find(const std::string& name) const;
  int64_t total_size() const;

 private:
  std::vector<Entry> entries_;
};

template <class T>
Tensor<T> glorot_uniform(Shape shape, int64_t fan_in, int64_t fan_out, Rng& rng);
template <class T>
Tensor<T> he_normal(Shape shape, int64_t fan_in, Rng& rng);

template <class T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]

  Linear() = default;
  Linear(int64_t in, int64_t out, Rng& rng);

  // x [N, in] -> [N, out]
  Tensor<T> forward(const Tensor<T>& x) const;
  void register_params(ParamMap<T>& pm, const std::string& prefix);
};

// Channels-last batch norm over all non-channel dims. Train mode normalizes
// by batch statistics (population variance) and folds them into the moving
// averages; eval mode is a fixed affine map from the stored statistics.
template <class T>
struct BatchNorm {
  Tensor<T> gamma, beta;
  Tensor<T> moving_mean, moving_var;
  double decay = 0.9;
  double epsilon = 1e-5;

  BatchNorm() = default;
  explicit BatchNorm(int64_t channels);

  Tensor<T> forward(const Tensor<T>& x, bool train);
  void register_params(ParamMap<T>& pm, const std::string& prefix);

  int64_t channels() const { return gamma.size(); }
};

template <class T>
struct Conv2dLayer {
  Tensor<T> weights;  // [Kh, Kw, Ci, Co]
  Tensor<T> bias;     // [Co]
  int64_t stride = 1;
  Pad pad = Pad::kZero;

  Conv2dLayer() = default;
  Conv2dLayer(int64_t kh, int64_t kw, int64_t ci, int64_t co, int64_t stride, Pad pad, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const;
  void register_params(ParamMap<T>& pm, const std::string& prefix);
};

template <class T>
struct Conv3dLayer {
  Tensor<T> weights;  // [Kt, Kh, Kw, Ci, Co]
  Tensor<T> bias;     // [Co]
  int64_t stride = 1;  // spatial only; temporal stride is 1
  Pad spatial_pad = Pad::kZero;
  Pad temporal_pad = Pad::kZero;

  Conv3dLayer() = default;
  Conv3dLayer(int64_t kt, int64_t kh, int64_t kw, int64_t ci, int64_t co, int64_t stride,
              Pad spatial_pad, Pad temporal_pad, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const;
  void register_params(ParamMap<T>& pm, const std::string& prefix);
};

enum class PoolKind { kSpatialAvg, kTemporalAvg, kSpatiotemporalAvg, kMaxOverAxis };

// Rank-dependent reductions: spatial-avg takes [N,T,H,W,C] -> [N,T,C] or
// [N,H,W,C] -> [N,C]; temporal-avg drops axis 1; spatiotemporal-avg takes
// [N,T,H,W,C] -> [N,C]; max-over-axis reduces the given axis.
template <class T>
Tensor<T> pool(const Tensor<T>& x, PoolKind kind, int axis = 0);

}  // namespace mmvc
