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
#include "mmvc/graphs.hpp"
#include "mmvc/losses.hpp"
#include "mmvc/rng.hpp"
#include "mmvc/tensor.hpp"

namespace mmvc {

// Synthetic correlated multimodal world. Every class is identified three
// ways at once: a colored moving shape, a harmonic tone, and a band of
// vocabulary words, so any modality pair carries mutual information.
struct WorldSpec {
  int64_t num_classes = 8;
  // Video: [frames, height, width, 3] clips of one moving shape per class.
  int64_t frames = 8;
  int64_t height = 32, width = 32;
  double fps = 10.0;  // label only; motion is parameterized per frame
  // Audio: harmonic tone at base_freq * 2^(class/3) plus generation noise.
  double audio_seconds = 1.0;
  double sample_rate = 8000.0;
  int64_t harmonics = 3;
  double base_freq = 180.0;
  double peak_amplitude = 0.8;
  double gen_noise_std = 0.005;
  // Text: class-conditional words; a narration mixes its class band with
  // shared filler words.
  int64_t vocab_size = 64;
  int64_t min_words = 4, max_words = 10;
  double class_word_prob = 0.7;
  int64_t candidates = 3;     // k narrations offered per sample
  double p_mis = 0.25;        // chance that no candidate matches the clip
  double missing_text = 0.5;  // chance the sample carries no text at all

  void validate() const;
};

template <class T>
struct MultimodalSample {
  VideoClip<T> video;
  AudioWave<T> audio;
  std::vector<TokenSeq> text_candidates;  // empty when text is absent
  int64_t class_label = 0;                // held out from training; eval only
  bool has_video = true, has_audio = true, has_text = false;
  // Index of the class-consistent narration in text_candidates, -1 when all
  // candidates are distractors (misaligned) or text is absent.
  int64_t aligned_candidate = -1;
};

// Deterministic in (spec, seed, index): sample i is a pure function of the
// three, so streams can be generated out of order or in parallel.
template <class T>
MultimodalSample<T> generate_sample(const WorldSpec& spec, uint64_t seed, int64_t index);

template <class T>
std::vector<MultimodalSample<T>> generate(const WorldSpec& spec, uint64_t seed, int64_t n);

// Video/audio augmentation settings. The ::identity() preset turns every
// stage off, making augment() a no-op.
struct AugmentConfig {
  int64_t out_frames = 8;  // temporal window; 0 keeps the full clip
  int64_t crop = 28;       // 0 disables resize + crop
  int64_t resize_min = 32;  // min-side target after scale jitter, >= crop
  double scale_min = 0.8, scale_max = 1.2;
  double flip_prob = 0.5;
  double brightness_delta = 32.0 / 255.0;
  double saturation_delta = 0.4;
  double contrast_delta = 0.4;
  double hue_delta = 0.2;
  double audio_noise_var_scale = 0.01;  // variance = scale * max amplitude
  // Audio-visual desynchronization, an ablation knob that is off by default
  // (synchronization is a training signal worth keeping).
  double audio_offset_sec = 0.0;
  int64_t audio_window_samples = 0;

  static AugmentConfig identity();
  void validate() const;
};

template <class T>
MultimodalSample<T> augment(const MultimodalSample<T>& s, const AugmentConfig& cfg, Rng& rng);

// Window of window_samples taken around the wave's center, shifted by a
// uniform offset in [-max_offset_sec, +max_offset_sec]. Errors when the wave
// cannot cover the window at the extreme offsets.
template <class T>
AudioWave<T> jitter_audio_window(const AudioWave<T>& wave, int64_t window_samples,
                                 double max_offset_sec, Rng& rng);

// Bilinear resize of a [T,H,W,3] clip to [T,h,w,3].
template <class T>
Tensor<T> resize_clip(const Tensor<T>& frames, int64_t h, int64_t w);

// Encodes and projects every present modality of the samples into the loss
// spaces of the configured topology.
template <class T>
ContrastiveBatch<T> make_batch(const std::vector<MultimodalSample<T>>& samples, Encoders<T>& enc,
                               ModalityGraph<T>& graph, bool train);

// Corpus container: magic "MMVD", u32 version, u64 sample count; per sample
// the label, presence flags, shapes, float32 payloads and u32 token ids, all
// little-endian.
template <class T>
void save_corpus(const std::string& path, const std::vector<MultimodalSample<T>>& samples);
template <class T>
std::vector<MultimodalSample<T>> load_corpus(const std::string& path);

}  // namespace mmvc
