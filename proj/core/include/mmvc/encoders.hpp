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

#include "mmvc/audio.hpp"
#include "mmvc/nn.hpp"
#include "mmvc/rng.hpp"
#include "mmvc/tensor.hpp"

namespace mmvc {

template <class T>
struct VideoClip {
  Tensor<T> frames;  // [T,H,W,3], values in [0,1]
  double fps = 8.0;
};

template <class T>
struct AudioWave {
  Tensor<T> samples;  // [L], values in [-1,1]
  double sample_rate = 8000.0;
};

// Fixed-length token window: truncate to 16 ids or pad with id 0.
struct TokenSeq {
  static constexpr int kLen = 16;
  static constexpr int64_t kPadId = 0;

  std::vector<int64_t> ids;

  static TokenSeq from_words(const std::vector<int64_t>& word_ids);
  void validate(int64_t vocab_size) const;
};

enum class VideoArch { kConv3dMini, kShiftMini };

struct EncoderConfig {
  VideoArch video_arch = VideoArch::kConv3dMini;
  int64_t d_v = 64, d_a = 64, d_t = 64;
  // Per-block output channels; the last entry must equal d_v / d_a.
  std::vector<int64_t> video_widths = {8, 16, 32, 64};
  std::vector<int64_t> audio_widths = {8, 16, 32, 64};
  int64_t video_kernel_t = 3;
  Pad video_temporal_pad = Pad::kZero;
  bool video_use_bn = true;
  double shift_fraction = 1.0 / 8.0;
  int64_t vocab_size = 64;
  int64_t word_dim = 32;
  uint64_t embedding_seed = 1234;  // frozen word-table init
  // Expected input geometry for training batches; 0 disables the check.
  int64_t clip_t = 8, clip_h = 28, clip_w = 28;
  int64_t audio_samples = 8000;
  double sample_rate = 8000.0;
  LogMelConfig mel;

  void validate() const;
};

// 4 blocks of conv3d -> BN -> ReLU with stride-2 spatial downsampling, then
// spatiotemporal average pooling. Kernel is video_kernel_t x 3 x 3.
template <class T>
struct Conv3dMini {
  std::vector<Conv3dLayer<T>> convs;
  std::vector<BatchNorm<T>> bns;
  bool use_bn = true;

  Conv3dMini() = default;
  Conv3dMini(const EncoderConfig& cfg, Rng& rng);

  // x [N,T,H,W,3] -> [N, d_v]
  Tensor<T> forward(const Tensor<T>& x, bool train);
  // Feature map before pooling, for the deflation equivalence analysis.
  Tensor<T> forward_features(const Tensor<T>& x, bool train);
  void register_params(ParamMap<T>& pm, const std::string& prefix);
};

// Residual 2-conv block applied per frame, with the channel shift inserted
// before the first conv.
template <class T>
struct ShiftBlock {
  Conv2dLayer<T> conv1, conv2;
  Conv2dLayer<T> proj;  // 1x1 shortcut when shape changes
  bool has_proj = false;
  BatchNorm<T> bn1, bn2;
  double shift_fraction = 1.0 / 8.0;

  ShiftBlock() = default;
  ShiftBlock(int64_t ci, int64_t co, int64_t stride, double shift_fraction, Rng& rng);

  // x [N,T,H,W,Ci] -> [N,T,H',W',Co]
  Tensor<T> forward(const Tensor<T>& x, bool train, bool shift_enabled);
  void register_params(ParamMap<T>& pm, const std::string& prefix);
};

template <class T>
struct ShiftMini {
  std::vector<ShiftBlock<T>> blocks;

  ShiftMini() = default;
  ShiftMini(const EncoderConfig& cfg, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, bool train, bool shift_enabled);
  void register_params(ParamMap<T>& pm, const std::string& prefix);
};

template <class T>
struct AudioEnc {
  std::vector<Conv2dLayer<T>> convs;
  std::vector<BatchNorm<T>> bns;
  LogMelConfig mel;
  double sample_rate = 8000.0;

  AudioEnc() = default;
  AudioEnc(const EncoderConfig& cfg, Rng& rng);

  // waves [N,L] -> [N, d_a]
  Tensor<T> forward(const Tensor<T>& waves, bool train);
  // conv stack only, starting from precomputed spectrograms [N,frames,bins,1]
  Tensor<T> forward_spectrogram(const Tensor<T>& spec, bool train);
  void register_params(ParamMap<T>& pm, const std::string& prefix);
};

template <class T>
struct TextEnc {
  Tensor<T> table;  // [vocab_size, word_dim], frozen
  Linear<T> proj;   // word_dim -> d_t

  TextEnc() = default;
  TextEnc(const EncoderConfig& cfg, Rng& rng);

  // ids [N][16] -> [N, d_t]: lookup -> shared linear -> coordinatewise max.
  Tensor<T> forward(const std::vector<TokenSeq>& tokens) const;
  void register_params(ParamMap<T>& pm, const std::string& prefix);
};

template <class T>
struct Encoders {
  EncoderConfig cfg;
  Conv3dMini<T> conv3d_mini;
  ShiftMini<T> shift_mini;
  AudioEnc<T> audio;
  TextEnc<T> text;

  Encoders() = default;
  Encoders(const EncoderConfig& cfg, Rng& rng);

  Tensor<T> encode_video_batch(const Tensor<T>& clips, bool train, bool shift_enabled = true);
  Tensor<T> encode_audio_batch(const Tensor<T>& waves, bool train);
  Tensor<T> encode_text_batch(const std::vector<TokenSeq>& tokens, bool train);

  Tensor<T> encode_video(const VideoClip<T>& clip, bool train);
  Tensor<T> encode_audio(const AudioWave<T>& wave, bool train);
  Tensor<T> encode_text(const TokenSeq& tokens, bool train);

  void register_params(ParamMap<T>& pm);
};

// Word-embedding table file: magic "MMVE", u32 version, u64 vocab_size,
// u64 word_dim, then row-major 32-bit floats, all little-endian.
Tensor<float> load_word_table(const std::string& path);
void save_word_table(const std::string& path, const Tensor<float>& table);

}  // namespace mmvc
