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

#include "mmvc/tensor.hpp"

namespace mmvc {

// Which mismatched pairs count as negatives for anchor i:
//  - both-directions: {(v_i, x_j)} and {(v_j, x_i)} for j != i, 2(N-1) pairs;
//  - v-anchored: only {(v_i, x_j)}, N-1 pairs.
enum class NegativePolicy { kBothDirections, kVAnchored };
enum class LossKind { kNce, kLogistic };

const char* negative_policy_name(NegativePolicy p);
const char* loss_kind_name(LossKind k);
NegativePolicy parse_negative_policy(const std::string& s);
LossKind parse_loss_kind(const std::string& s);

struct LossConfig {
  double lambda_va = 1.0;
  double lambda_vt = 1.0;
  double tau = 0.07;
  LossKind loss_kind = LossKind::kNce;
  NegativePolicy policy = NegativePolicy::kBothDirections;

  void validate() const;
};

// One training batch of joint-space embeddings. Rows for absent modalities
// may hold anything; the presence flags decide what enters each component.
template <class T>
struct ContrastiveBatch {
  Tensor<T> zv_va, za_va;                  // [N, d] in the video-audio loss space
  Tensor<T> zv_txt;                        // [N, d'] video vectors in the text loss space
  std::vector<Tensor<T>> text_candidates;  // per sample [P_i, d']; empty when text absent
  std::vector<uint8_t> has_v, has_a, has_t;

  int64_t size() const { return static_cast<int64_t>(has_v.size()); }
  void validate() const;
};

// Temperature-scaled softmax contrast between matched and mismatched
// video-audio pairs. Inputs are unit rows [N, d]; output is the batch mean.
template <class T>
Tensor<T> nce_loss_per_sample(const Tensor<T>& zv, const Tensor<T>& za, double tau,
                              NegativePolicy policy);
template <class T>
Tensor<T> nce_loss(const Tensor<T>& zv, const Tensor<T>& za, double tau, NegativePolicy policy);

// Multiple-instance variant: the positive score for sample i is the sum over
// its candidate set, realized as log-sum-exp of candidate scores in the
// numerator. Negatives pair zv_i with candidates of other samples (and the
// reverse direction under both-directions).
template <class T>
Tensor<T> mil_nce_loss_per_sample(const Tensor<T>& zv, const std::vector<Tensor<T>>& candidates,
                                  double tau, NegativePolicy policy);
template <class T>
Tensor<T> mil_nce_loss(const Tensor<T>& zv, const std::vector<Tensor<T>>& candidates, double tau,
                       NegativePolicy policy);

template <class T>
struct CombinedLossResult {
  Tensor<T> total;  // scalar
  Tensor<T> va;     // scalar component value (0 when fewer than 2 samples have v+a)
  Tensor<T> vt;
  int64_t va_count = 0;  // samples entering each component
  int64_t vt_count = 0;
};

// lambda_va * mean-over-present NCE(v,a) + lambda_vt * mean-over-present
// MIL-NCE(v,text). Each component averages only over samples where both of
// its modalities are present, so absent-modality samples neither contribute
// nor dilute. A component with < 2 usable samples contributes 0.
template <class T>
CombinedLossResult<T> combined_loss(const ContrastiveBatch<T>& batch, const LossConfig& cfg);

// Binary cross-entropy on sigmoid(zv.za / tau) for labeled pairs; the
// baseline the contrastive losses are compared against.
template <class T>
Tensor<T> logistic_pair_loss(const Tensor<T>& zv, const Tensor<T>& za,
                             const std::vector<uint8_t>& positive, double tau);

// logistic_pair_loss over the full NxN pair grid of a batch: matched pairs
// labeled positive, every mismatched pair negative.
template <class T>
Tensor<T> logistic_grid_loss(const Tensor<T>& zv, const Tensor<T>& za, double tau);

}  // namespace mmvc
