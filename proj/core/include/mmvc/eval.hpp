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
#include <utility>
#include <vector>

#include "mmvc/encoders.hpp"
#include "mmvc/graphs.hpp"
#include "mmvc/tensor.hpp"

namespace mmvc {

// Linear-probe protocol: multinomial logistic regression with an L2 penalty
// on frozen features, standardized by train-split statistics; the penalty
// strength is swept and chosen on the validation split.
struct ProbeConfig {
  std::vector<double> l2_sweep = {1e-4, 1e-3, 1e-2, 1e-1};
  int64_t epochs = 200;
  double lr = 0.05;

  void validate() const;
};

template <class T>
struct ProbeData {
  Tensor<T> x_train;  // [N, d]
  Tensor<T> x_val;
  Tensor<T> x_test;
  std::vector<int64_t> y_train, y_val, y_test;

  void validate(int64_t num_classes) const;
};

struct ProbeResult {
  double accuracy = 0.0;  // test top-1 under the best regularizer
  double best_l2 = 0.0;
  std::vector<double> val_accuracies;  // one per sweep entry
};

template <class T>
ProbeResult linear_probe(const ProbeData<T>& data, int64_t num_classes, const ProbeConfig& cfg);

struct RetrievalResult {
  std::vector<std::pair<int64_t, double>> recall_at;  // (K, fraction), in input order
  double median_rank = 0.0;

  double recall(int64_t k) const;
};

// Rank of the ground-truth item under descending dot product; score ties
// break toward the lower corpus index, so results are reproducible. queries
// [Q,d], corpus [M,d], ground_truth[q] in [0,M).
template <class T>
RetrievalResult zero_shot_retrieval(const Tensor<T>& queries, const Tensor<T>& corpus,
                                    const std::vector<int64_t>& ground_truth,
                                    const std::vector<int64_t>& ks);

// Same, refusing mismatched embedding spaces.
template <class T>
RetrievalResult zero_shot_retrieval(const Tensor<T>& queries, SpaceId query_space,
                                    const Tensor<T>& corpus, SpaceId corpus_space,
                                    const std::vector<int64_t>& ground_truth,
                                    const std::vector<int64_t>& ks);

// Mean of backbone vectors over n_clips windows of clip_len frames whose
// starts are linearly spaced across the sample, eval mode.
template <class T>
Tensor<T> clip_averaged_embedding(const Tensor<T>& frames, int64_t clip_len, int64_t n_clips,
                                  Encoders<T>& enc);

// Central spatial crop of a [T,H,W,3] clip, the test-time counterpart of the
// random training crop.
template <class T>
Tensor<T> center_crop_clip(const Tensor<T>& frames, int64_t size);

// Two-column CSV: header "metric,value", one row per entry.
void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<std::string, double>>& rows);

}  // namespace mmvc
