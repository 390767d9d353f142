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

#include "mmvc/nn.hpp"
#include "mmvc/tape.hpp"
#include "mmvc/tensor.hpp"

namespace mmvc {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over the trainable entries of a ParamMap. Moments are
// stored per parameter in registration order; updates run in that fixed
// order through mutable_data(), the one sanctioned in-place write path.
template <class T>
class Adam {
 public:
  struct Slot {
    std::string name;
    std::vector<T> m, v;
  };

  Adam() = default;
  explicit Adam(const ParamMap<T>& params, AdamConfig cfg = {});

  // Applies one update from the gradients recorded on tape. Parameters with
  // no gradient path get zero gradient (moments still decay).
  void step(const ParamMap<T>& params, Tape<T>& tape, double lr);

  // Update from explicit per-parameter gradients (trainable order).
  void step_with_grads(const ParamMap<T>& params, const std::vector<Tensor<T>>& grads, double lr);

  int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Slot>& slots() const { return slots_; }

  // Checkpoint restore: replaces moments and step counter.
  void restore(std::vector<Slot> slots, int64_t t);

 private:
  void apply(Tensor<T>& p, Slot& s, const T* g, double lr);

  AdamConfig cfg_;
  std::vector<Slot> slots_;
  int64_t t_ = 0;
};

}  // namespace mmvc
