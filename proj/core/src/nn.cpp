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

#include "mmvc/nn.hpp"

#include <cmath>

namespace mmvc {

template <class T>
void ParamMap<T>::add(const std::string& name, Tensor<T>* t, bool trainable) {
  check(t != nullptr, "ParamMap: null tensor for " + name);
  for (const auto& e : entries_) {
    check(e.name != name, "ParamMap: duplicate parameter name " + name);
  }
  entries_.push_back({name, t, trainable});
}

template <class T>
Tensor<T>* ParamMap<T>::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  return nullptr;
}

template <class T>
int64_t ParamMap<T>::total_size() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.tensor->size();
  return n;
}

template <class T>
Tensor<T> glorot_uniform(Shape shape, int64_t fan_in, int64_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> t(std::move(shape));
  for (auto& x : t.mutable_values()) x = static_cast<T>(rng.uniform(-limit, limit));
  return t;
}

template <class T>
Tensor<T> he_normal(Shape shape, int64_t fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  Tensor<T> t(std::move(shape));
  for (auto& x : t.mutable_values()) x = static_cast<T>(rng.normal(0.0, stddev));
  return t;
}

template <class T>
Linear<T>::Linear(int64_t in, int64_t out, Rng& rng) {
  weight = glorot_uniform<T>(Shape{in, out}, in, out, rng);
  bias = Tensor<T>::zeros(Shape{out});
  weight.set_requires_grad(true);
  bias.set_requires_grad(true);
}

template <class T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
  return add(matmul(x, weight), bias);
}

template <class T>
void Linear<T>::register_params(ParamMap<T>& pm, const std::string& prefix) {
  pm.add(prefix + ".weight", &weight);
  pm.add(prefix + ".bias", &bias);
}

template <class T>
BatchNorm<T>::BatchNorm(int64_t channels) {
  gamma = Tensor<T>::full(Shape{channels}, T(1));
  beta = Tensor<T>::zeros(Shape{channels});
  moving_mean = Tensor<T>::zeros(Shape{channels});
  moving_var = Tensor<T>::full(Shape{channels}, T(1));
  gamma.set_requires_grad(true);
  beta.set_requires_grad(true);
}

template <class T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, bool train) {
  const int r = x.rank();
  check_shape(r >= 2, "batch_norm: input must have a leading batch dim and trailing channels");
  check_shape(x.dim(r - 1) == channels(),
              "batch_norm: channel dim " + std::to_string(x.dim(r - 1)) + " vs params " +
                  std::to_string(channels()));
  std::vector<int> nonchan;
  for (int d = 0; d < r - 1; ++d) nonchan.push_back(d);

  if (train) {
    check_shape(x.size() > 0, "batch_norm: empty batch in train mode");
    Tensor<T> mu = mean_axes(x, nonchan, /*keepdim=*/true);
    Tensor<T> centered = sub(x, mu);
    Tensor<T> var = mean_axes(mul(centered, centered), nonchan, /*keepdim=*/true);
    Tensor<T> xhat = div(centered, sqrt(add_scalar(var, epsilon)));
    Tensor<T> out = add(mul(xhat, gamma), beta);
    // Moving-average update is plain state, never on the tape.
    const T d = static_cast<T>(decay);
    T* mm = moving_mean.mutable_data();
    T* mv = moving_var.mutable_data();
    const T* bm = mu.ptr();
    const T* bv = var.ptr();
    for (int64_t c = 0; c < channels(); ++c) {
      mm[c] = d * mm[c] + (T(1) - d) * bm[c];
      mv[c] = d * mv[c] + (T(1) - d) * bv[c];
    }
    return out;
  }
  Tensor<T> xhat = div(sub(x, moving_mean), sqrt(add_scalar(moving_var, epsilon)));
  return add(mul(xhat, gamma), beta);
}

template <class T>
void BatchNorm<T>::register_params(ParamMap<T>& pm, const std::string& prefix) {
  pm.add(prefix + ".gamma", &gamma);
  pm.add(prefix + ".beta", &beta);
  pm.add(prefix + ".moving_mean", &moving_mean, /*trainable=*/false);
  pm.add(prefix + ".moving_var", &moving_var, /*trainable=*/false);
}

template <class T>
Conv2dLayer<T>::Conv2dLayer(int64_t kh, int64_t kw, int64_t ci, int64_t co, int64_t stride_,
                            Pad pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
  weights = he_normal<T>(Shape{kh, kw, ci, co}, kh * kw * ci, rng);
  bias = Tensor<T>::zeros(Shape{co});
  weights.set_requires_grad(true);
  bias.set_requires_grad(true);
}

template <class T>
Tensor<T> Conv2dLayer<T>::forward(const Tensor<T>& x) const {
  return add(conv2d(x, weights, stride, pad), bias);
}

template <class T>
void Conv2dLayer<T>::register_params(ParamMap<T>& pm, const std::string& prefix) {
  pm.add(prefix + ".weights", &weights);
  pm.add(prefix + ".bias", &bias);
}

template <class T>
Conv3dLayer<T>::Conv3dLayer(int64_t kt, int64_t kh, int64_t kw, int64_t ci, int64_t co,
                            int64_t stride_, Pad spatial_pad_, Pad temporal_pad_, Rng& rng)
    : stride(stride_), spatial_pad(spatial_pad_), temporal_pad(temporal_pad_) {
  weights = he_normal<T>(Shape{kt, kh, kw, ci, co}, kt * kh * kw * ci, rng);
  bias = Tensor<T>::zeros(Shape{co});
  weights.set_requires_grad(true);
  bias.set_requires_grad(true);
}

template <class T>
Tensor<T> Conv3dLayer<T>::forward(const Tensor<T>& x) const {
  return add(conv3d(x, weights, stride, spatial_pad, temporal_pad), bias);
}

template <class T>
void Conv3dLayer<T>::register_params(ParamMap<T>& pm, const std::string& prefix) {
  pm.add(prefix + ".weights", &weights);
  pm.add(prefix + ".bias", &bias);
}

template <class T>
Tensor<T> pool(const Tensor<T>& x, PoolKind kind, int axis) {
  switch (kind) {
    case PoolKind::kSpatialAvg:
      if (x.rank() == 5) return mean_axes(x, {2, 3});
      check_shape(x.rank() == 4, "pool(spatial-avg): expected rank 4 or 5, got " +
                                     shape_str(x.shape()));
      return mean_axes(x, {1, 2});
    case PoolKind::kTemporalAvg:
      check_shape(x.rank() >= 3, "pool(temporal-avg): expected rank >= 3, got " +
                                     shape_str(x.shape()));
      return mean_axes(x, {1});
    case PoolKind::kSpatiotemporalAvg:
      check_shape(x.rank() == 5, "pool(spatiotemporal-avg): expected rank 5, got " +
                                     shape_str(x.shape()));
      return mean_axes(x, {1, 2, 3});
    case PoolKind::kMaxOverAxis:
      return max_axis(x, axis);
  }
  throw Error("pool: unknown kind");
}

#define MMVC_INSTANTIATE_NN(T)                                                             \
  template class ParamMap<T>;                                                              \
  template Tensor<T> glorot_uniform<T>(Shape, int64_t, int64_t, Rng&);                     \
  template Tensor<T> he_normal<T>(Shape, int64_t, Rng&);                                   \
  template struct Linear<T>;                                                               \
  template struct BatchNorm<T>;                                                            \
  template struct Conv2dLayer<T>;                                                          \
  template struct Conv3dLayer<T>;                                                          \
  template Tensor<T> pool<T>(const Tensor<T>&, PoolKind, int);

MMVC_INSTANTIATE_NN(float)
MMVC_INSTANTIATE_NN(double)

#undef MMVC_INSTANTIATE_NN

}  // namespace mmvc
