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

#include "mmvc/adam.hpp"

#include <cmath>

namespace mmvc {

template <class T>
Adam<T>::Adam(const ParamMap<T>& params, AdamConfig cfg) : cfg_(cfg) {
  check(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0 &&
            cfg_.eps > 0.0,
        "Adam: invalid hyperparameters");
  for (const auto& e : params.entries()) {
    if (!e.trainable) continue;
    Slot s;
    s.name = e.name;
    s.m.assign(static_cast<size_t>(e.tensor->size()), T(0));
    s.v.assign(static_cast<size_t>(e.tensor->size()), T(0));
    slots_.push_back(std::move(s));
  }
}

template <class T>
void Adam<T>::apply(Tensor<T>& p, Slot& s, const T* g, double lr) {
  const int64_t n = p.size();
  check_shape(static_cast<int64_t>(s.m.size()) == n,
              "Adam: moment shape drifted for " + s.name);
  const T b1 = static_cast<T>(cfg_.beta1);
  const T b2 = static_cast<T>(cfg_.beta2);
  const T inv_bc1 = static_cast<T>(1.0 / (1.0 - std::pow(cfg_.beta1, static_cast<double>(t_))));
  const T inv_bc2 = static_cast<T>(1.0 / (1.0 - std::pow(cfg_.beta2, static_cast<double>(t_))));
  const T eps = static_cast<T>(cfg_.eps);
  const T step_size = static_cast<T>(lr);
  T* pv = p.mutable_data();
  for (int64_t i = 0; i < n; ++i) {
    s.m[static_cast<size_t>(i)] = b1 * s.m[static_cast<size_t>(i)] + (T(1) - b1) * g[i];
    s.v[static_cast<size_t>(i)] = b2 * s.v[static_cast<size_t>(i)] + (T(1) - b2) * g[i] * g[i];
    const T mhat = s.m[static_cast<size_t>(i)] * inv_bc1;
    const T vhat = s.v[static_cast<size_t>(i)] * inv_bc2;
    pv[i] -= step_size * mhat / (std::sqrt(vhat) + eps);
  }
}

template <class T>
void Adam<T>::step(const ParamMap<T>& params, Tape<T>& tape, double lr) {
  check(tape.has_backward_run(), "Adam: backward() has not run on this tape");
  ++t_;
  size_t si = 0;
  for (const auto& e : params.entries()) {
    if (!e.trainable) continue;
    check(si < slots_.size(), "Adam: more trainable params than optimizer slots");
    Tensor<T> g = tape.grad(*e.tensor);
    apply(*e.tensor, slots_[si], g.ptr(), lr);
    ++si;
  }
  check(si == slots_.size(), "Adam: trainable param count changed since construction");
}

template <class T>
void Adam<T>::step_with_grads(const ParamMap<T>& params, const std::vector<Tensor<T>>& grads,
                              double lr) {
  ++t_;
  size_t si = 0;
  for (const auto& e : params.entries()) {
    if (!e.trainable) continue;
    check(si < slots_.size() && si < grads.size(), "Adam: gradient list size mismatch");
    check_shape(grads[si].size() == e.tensor->size(),
                "Adam: gradient shape mismatch for " + e.name);
    apply(*e.tensor, slots_[si], grads[si].ptr(), lr);
    ++si;
  }
  check(si == slots_.size(), "Adam: trainable param count changed since construction");
}

template <class T>
void Adam<T>::restore(std::vector<Slot> slots, int64_t t) {
  check(slots.size() == slots_.size(), "Adam: restore slot count mismatch");
  for (size_t i = 0; i < slots.size(); ++i) {
    check(slots[i].name == slots_[i].name && slots[i].m.size() == slots_[i].m.size() &&
              slots[i].v.size() == slots_[i].v.size(),
          "Adam: restore slot layout mismatch at " + slots_[i].name);
  }
  check(t >= 0, "Adam: negative step counter");
  slots_ = std::move(slots);
  t_ = t;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace mmvc
