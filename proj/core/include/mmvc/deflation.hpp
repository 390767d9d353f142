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

#include "mmvc/encoders.hpp"
#include "mmvc/nn.hpp"
#include "mmvc/tensor.hpp"

namespace mmvc {

enum class DeflationMethod { kNaive, kRecalibrated };

const char* deflation_method_name(DeflationMethod m);
DeflationMethod parse_deflation_method(const std::string& s);

// Collapse a video filter [Kt,Kh,Kw,Ci,Co] to an image filter [Kh,Kw,Ci,Co]
// by summing over the temporal axis: w'[h,w,i,o] = sum_t w[t,h,w,i,o].
template <class T>
Tensor<T> deflate_filters(const Tensor<T>& f);

// Repeat each image along a new time axis: [M,H,W,3] -> [M,t,H,W,3].
template <class T>
Tensor<T> tile_static_video(const Tensor<T>& images, int64_t t);

// Image-input twin of a trained video encoder. For a conv3d net the filters
// are temporally summed into a conv2d stack; for a shift net the blocks are
// copied and run with the channel shift disabled on a single frame. All
// parameters are deep copies; only gamma/beta carry gradients.
template <class T>
struct DeflatedEncoder {
  VideoArch arch = VideoArch::kConv3dMini;
  std::vector<Conv2dLayer<T>> convs;  // conv3d path
  std::vector<BatchNorm<T>> bns;
  bool use_bn = true;
  ShiftMini<T> shift;  // shift path, always run with shift off

  // x [N,H,W,3] -> [N, d_v]
  Tensor<T> forward(const Tensor<T>& x, bool train);
  void register_params(ParamMap<T>& pm, const std::string& prefix);
  // Batch norms in deterministic order, for recalibration and snapshots.
  std::vector<BatchNorm<T>*> bn_layers();
};

template <class T>
DeflatedEncoder<T> deflate(const Encoders<T>& src);

template <class T>
struct DeflationJob {
  DeflationMethod method = DeflationMethod::kRecalibrated;
  Tensor<T> calibration_images;  // [M,H,W,3], values in [0,1]
  int64_t static_video_length = 8;
  double lr = 1e-2;
  int64_t epochs = 100;
  std::vector<int64_t> decay_epochs = {30, 60, 90};
  double decay_factor = 0.1;
  int64_t batch_size = 32;
  double holdout_fraction = 0.25;
  uint64_t seed = 0;

  void validate() const;
};

template <class T>
struct RecalibrationResult {
  DeflatedEncoder<T> encoder;
  // Mean |deflated - source| per output element on the held-out split,
  // before and after the gamma/beta fit.
  double naive_l1 = 0.0;
  double final_l1 = 0.0;
};

// Fit gamma/beta of the deflated net by L1 regression against the source
// video net evaluated on static videos built from the calibration images.
// Every non-BN parameter stays bit-identical; the returned encoder carries
// the gamma/beta with the best held-out L1 seen (initial state included), so
// final_l1 <= naive_l1 always holds.
template <class T>
RecalibrationResult<T> recalibrate(Encoders<T>& src, const DeflationJob<T>& job);

}  // namespace mmvc
