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

#include "mmvc/encoders.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "mmvc/io.hpp"

namespace mmvc {

TokenSeq TokenSeq::from_words(const std::vector<int64_t>& word_ids) {
  TokenSeq t;
  t.ids.reserve(kLen);
  for (size_t i = 0; i < word_ids.size() && i < static_cast<size_t>(kLen); ++i) {
    t.ids.push_back(word_ids[i]);
  }
  while (t.ids.size() < static_cast<size_t>(kLen)) t.ids.push_back(kPadId);
  return t;
}

void TokenSeq::validate(int64_t vocab_size) const {
  check(static_cast<int>(ids.size()) == kLen,
        "TokenSeq: expected " + std::to_string(kLen) + " ids, got " + std::to_string(ids.size()));
  for (int64_t id : ids) {
    check(id >= 0 && id < vocab_size,
          "TokenSeq: id " + std::to_string(id) + " outside vocabulary of size " +
              std::to_string(vocab_size));
  }
}

void EncoderConfig::validate() const {
  check(d_v > 0 && d_a > 0 && d_t > 0, "EncoderConfig: output dims must be positive");
  check(!video_widths.empty() && !audio_widths.empty(), "EncoderConfig: empty width list");
  check(video_widths.back() == d_v,
        "EncoderConfig: last video width " + std::to_string(video_widths.back()) +
            " must equal d_v " + std::to_string(d_v));
  check(audio_widths.back() == d_a,
        "EncoderConfig: last audio width " + std::to_string(audio_widths.back()) +
            " must equal d_a " + std::to_string(d_a));
  for (int64_t w : video_widths) check(w > 0, "EncoderConfig: nonpositive video width");
  for (int64_t w : audio_widths) check(w > 0, "EncoderConfig: nonpositive audio width");
  check(video_kernel_t >= 1, "EncoderConfig: video_kernel_t must be >= 1");
  check(shift_fraction >= 0.0 && shift_fraction <= 1.0,
        "EncoderConfig: shift_fraction must be in [0,1]");
  check(vocab_size >= 1 && word_dim >= 1, "EncoderConfig: vocab_size and word_dim must be >= 1");
  check(mel.n_bins >= 1, "EncoderConfig: mel bins must be >= 1");
}

template <class T>
Conv3dMini<T>::Conv3dMini(const EncoderConfig& cfg, Rng& rng) : use_bn(cfg.video_use_bn) {
  int64_t ci = 3;
  for (int64_t co : cfg.video_widths) {
    convs.emplace_back(cfg.video_kernel_t, 3, 3, ci, co, /*stride=*/2, Pad::kZero,
                       cfg.video_temporal_pad, rng);
    if (use_bn) bns.emplace_back(co);
    ci = co;
  }
}

template <class T>
Tensor<T> Conv3dMini<T>::forward_features(const Tensor<T>& x, bool train) {
  check_shape(x.rank() == 5 && x.dim(4) == 3,
              "conv3d-mini: input must be [N,T,H,W,3], got " + shape_str(x.shape()));
  Tensor<T> h = x;
  for (size_t b = 0; b < convs.size(); ++b) {
    h = convs[b].forward(h);
    if (use_bn) h = bns[b].forward(h, train);
    h = relu(h);
  }
  return h;
}

template <class T>
Tensor<T> Conv3dMini<T>::forward(const Tensor<T>& x, bool train) {
  return pool(forward_features(x, train), PoolKind::kSpatiotemporalAvg);
}

template <class T>
void Conv3dMini<T>::register_params(ParamMap<T>& pm, const std::string& prefix) {
  for (size_t b = 0; b < convs.size(); ++b) {
    convs[b].register_params(pm, prefix + ".block" + std::to_string(b) + ".conv");
    if (use_bn) bns[b].register_params(pm, prefix + ".block" + std::to_string(b) + ".bn");
  }
}

template <class T>
ShiftBlock<T>::ShiftBlock(int64_t ci, int64_t co, int64_t stride, double shift_fraction_,
                          Rng& rng)
    : conv1(3, 3, ci, co, stride, Pad::kZero, rng),
      conv2(3, 3, co, co, 1, Pad::kZero, rng),
      shift_fraction(shift_fraction_) {
  if (ci != co || stride != 1) {
    proj = Conv2dLayer<T>(1, 1, ci, co, stride, Pad::kZero, rng);
    has_proj = true;
  }
  bn1 = BatchNorm<T>(co);
  bn2 = BatchNorm<T>(co);
}

template <class T>
Tensor<T> ShiftBlock<T>::forward(const Tensor<T>& x, bool train, bool shift_enabled) {
  const int64_t N = x.dim(0), Tt = x.dim(1), H = x.dim(2), W = x.dim(3), Ci = x.dim(4);
  Tensor<T> s = temporal_shift(x, shift_fraction, shift_enabled);
  Tensor<T> s2 = reshape(s, Shape{N * Tt, H, W, Ci});
  Tensor<T> h = relu(bn1.forward(conv1.forward(s2), train));
  h = bn2.forward(conv2.forward(h), train);
  Tensor<T> x2 = reshape(x, Shape{N * Tt, H, W, Ci});
  Tensor<T> skip = has_proj ? proj.forward(x2) : x2;
  Tensor<T> y = relu(add(h, skip));
  return reshape(y, Shape{N, Tt, y.dim(1), y.dim(2), y.dim(3)});
}

template <class T>
void ShiftBlock<T>::register_params(ParamMap<T>& pm, const std::string& prefix) {
  conv1.register_params(pm, prefix + ".conv1");
  bn1.register_params(pm, prefix + ".bn1");
  conv2.register_params(pm, prefix + ".conv2");
  bn2.register_params(pm, prefix + ".bn2");
  if (has_proj) proj.register_params(pm, prefix + ".proj");
}

template <class T>
ShiftMini<T>::ShiftMini(const EncoderConfig& cfg, Rng& rng) {
  int64_t ci = 3;
  for (int64_t co : cfg.video_widths) {
    blocks.emplace_back(ci, co, /*stride=*/2, cfg.shift_fraction, rng);
    ci = co;
  }
}

template <class T>
Tensor<T> ShiftMini<T>::forward(const Tensor<T>& x, bool train, bool shift_enabled) {
  check_shape(x.rank() == 5 && x.dim(4) == 3,
              "shift-mini: input must be [N,T,H,W,3], got " + shape_str(x.shape()));
  Tensor<T> h = x;
  for (auto& b : blocks) h = b.forward(h, train, shift_enabled);
  return pool(h, PoolKind::kSpatiotemporalAvg);
}

template <class T>
void ShiftMini<T>::register_params(ParamMap<T>& pm, const std::string& prefix) {
  for (size_t b = 0; b < blocks.size(); ++b) {
    blocks[b].register_params(pm, prefix + ".block" + std::to_string(b));
  }
}

template <class T>
AudioEnc<T>::AudioEnc(const EncoderConfig& cfg, Rng& rng)
    : mel(cfg.mel), sample_rate(cfg.sample_rate) {
  int64_t ci = 1;
  for (int64_t co : cfg.audio_widths) {
    convs.emplace_back(3, 3, ci, co, /*stride=*/2, Pad::kZero, rng);
    bns.emplace_back(co);
    ci = co;
  }
}

template <class T>
Tensor<T> AudioEnc<T>::forward(const Tensor<T>& waves, bool train) {
  check_shape(waves.rank() == 2, "encode_audio: waves must be [N,L], got " +
                                     shape_str(waves.shape()));
  const int64_t N = waves.dim(0), L = waves.dim(1);
  check_shape(N > 0, "encode_audio: empty batch");
  // The spectrogram frontend is fixed DSP; it never joins the tape.
  Tensor<T> first(Shape{L}, std::vector<T>(waves.ptr(), waves.ptr() + L));
  Tensor<T> spec0 = log_mel(first, sample_rate, mel);
  const int64_t F = spec0.dim(0), B = spec0.dim(1);
  Tensor<T> spec(Shape{N, F, B, 1});
  T* ps = spec.mutable_data();
  std::memcpy(ps, spec0.ptr(), static_cast<size_t>(F * B) * sizeof(T));
  for (int64_t n = 1; n < N; ++n) {
    Tensor<T> w(Shape{L}, std::vector<T>(waves.ptr() + n * L, waves.ptr() + (n + 1) * L));
    Tensor<T> s = log_mel(w, sample_rate, mel);
    std::memcpy(ps + n * F * B, s.ptr(), static_cast<size_t>(F * B) * sizeof(T));
  }
  return forward_spectrogram(spec, train);
}

template <class T>
Tensor<T> AudioEnc<T>::forward_spectrogram(const Tensor<T>& spec, bool train) {
  check_shape(spec.rank() == 4 && spec.dim(3) == 1,
              "encode_audio: spectrogram must be [N,frames,bins,1], got " +
                  shape_str(spec.shape()));
  Tensor<T> h = spec;
  for (size_t b = 0; b < convs.size(); ++b) {
    h = convs[b].forward(h);
    h = bns[b].forward(h, train);
    h = relu(h);
  }
  return pool(h, PoolKind::kSpatialAvg);
}

template <class T>
void AudioEnc<T>::register_params(ParamMap<T>& pm, const std::string& prefix) {
  for (size_t b = 0; b < convs.size(); ++b) {
    convs[b].register_params(pm, prefix + ".block" + std::to_string(b) + ".conv");
    bns[b].register_params(pm, prefix + ".block" + std::to_string(b) + ".bn");
  }
}

template <class T>
TextEnc<T>::TextEnc(const EncoderConfig& cfg, Rng& rng) {
  // The table comes from its own fixed seed so it is identical across models;
  // it stays frozen (never trainable).
  Rng table_rng(cfg.embedding_seed);
  table = Tensor<T>(Shape{cfg.vocab_size, cfg.word_dim});
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.word_dim));
  for (auto& x : table.mutable_values()) x = static_cast<T>(table_rng.normal(0.0, scale));
  proj = Linear<T>(cfg.word_dim, cfg.d_t, rng);
}

template <class T>
Tensor<T> TextEnc<T>::forward(const std::vector<TokenSeq>& tokens) const {
  check_shape(!tokens.empty(), "encode_text: empty batch");
  const int64_t N = static_cast<int64_t>(tokens.size());
  std::vector<int64_t> flat;
  flat.reserve(static_cast<size_t>(N) * TokenSeq::kLen);
  for (const auto& t : tokens) {
    t.validate(table.dim(0));
    flat.insert(flat.end(), t.ids.begin(), t.ids.end());
  }
  Tensor<T> words = gather_rows(table, flat);           // [N*16, word_dim]
  Tensor<T> mapped = proj.forward(words);               // [N*16, d_t]
  Tensor<T> grouped = reshape(mapped, Shape{N, TokenSeq::kLen, proj.bias.size()});
  return max_axis(grouped, 1);                          // [N, d_t]
}

template <class T>
void TextEnc<T>::register_params(ParamMap<T>& pm, const std::string& prefix) {
  pm.add(prefix + ".table", &table, /*trainable=*/false);
  proj.register_params(pm, prefix + ".proj");
}

template <class T>
Encoders<T>::Encoders(const EncoderConfig& cfg_, Rng& rng) : cfg(cfg_) {
  cfg.validate();
  if (cfg.video_arch == VideoArch::kConv3dMini) {
    conv3d_mini = Conv3dMini<T>(cfg, rng);
  } else {
    shift_mini = ShiftMini<T>(cfg, rng);
  }
  audio = AudioEnc<T>(cfg, rng);
  text = TextEnc<T>(cfg, rng);
}

template <class T>
Tensor<T> Encoders<T>::encode_video_batch(const Tensor<T>& clips, bool train,
                                          bool shift_enabled) {
  check_shape(clips.rank() == 5 && clips.dim(4) == 3,
              "encode_video: clips must be [N,T,H,W,3], got " + shape_str(clips.shape()));
  if (cfg.clip_t > 0) {
    check_shape(clips.dim(1) == cfg.clip_t && clips.dim(2) == cfg.clip_h &&
                    clips.dim(3) == cfg.clip_w,
                "encode_video: clip geometry " + shape_str(clips.shape()) +
                    " does not match configured [T,H,W] = [" + std::to_string(cfg.clip_t) + "," +
                    std::to_string(cfg.clip_h) + "," + std::to_string(cfg.clip_w) + "]");
  }
  if (cfg.video_arch == VideoArch::kConv3dMini) return conv3d_mini.forward(clips, train);
  return shift_mini.forward(clips, train, shift_enabled);
}

template <class T>
Tensor<T> Encoders<T>::encode_audio_batch(const Tensor<T>& waves, bool train) {
  if (cfg.audio_samples > 0) {
    check_shape(waves.rank() == 2 && waves.dim(1) == cfg.audio_samples,
                "encode_audio: wave length " + shape_str(waves.shape()) +
                    " does not match configured duration " + std::to_string(cfg.audio_samples));
  }
  return audio.forward(waves, train);
}

template <class T>
Tensor<T> Encoders<T>::encode_text_batch(const std::vector<TokenSeq>& tokens, bool /*train*/) {
  return text.forward(tokens);
}

template <class T>
Tensor<T> Encoders<T>::encode_video(const VideoClip<T>& clip, bool train) {
  check_shape(clip.frames.rank() == 4 && clip.frames.dim(3) == 3,
              "encode_video: frames must be [T,H,W,3], got " + shape_str(clip.frames.shape()));
  check_shape(clip.frames.dim(0) >= 1, "encode_video: T must be >= 1");
  for (const T v : clip.frames.values()) {
    check(v >= T(0) && v <= T(1), "encode_video: frame values must lie in [0,1]");
  }
  Tensor<T> batch = reshape(clip.frames, Shape{1, clip.frames.dim(0), clip.frames.dim(1),
                                               clip.frames.dim(2), 3});
  Tensor<T> out = encode_video_batch(batch, train);
  return reshape(out, Shape{out.dim(1)});
}

template <class T>
Tensor<T> Encoders<T>::encode_audio(const AudioWave<T>& wave, bool train) {
  check_shape(wave.samples.rank() == 1, "encode_audio: samples must be rank 1");
  for (const T v : wave.samples.values()) {
    check(v >= T(-1) && v <= T(1), "encode_audio: samples must lie in [-1,1]");
  }
  Tensor<T> batch = reshape(wave.samples, Shape{1, wave.samples.size()});
  Tensor<T> out = encode_audio_batch(batch, train);
  return reshape(out, Shape{out.dim(1)});
}

template <class T>
Tensor<T> Encoders<T>::encode_text(const TokenSeq& tokens, bool train) {
  Tensor<T> out = encode_text_batch({tokens}, train);
  return reshape(out, Shape{out.dim(1)});
}

template <class T>
void Encoders<T>::register_params(ParamMap<T>& pm) {
  if (cfg.video_arch == VideoArch::kConv3dMini) {
    conv3d_mini.register_params(pm, "video");
  } else {
    shift_mini.register_params(pm, "video");
  }
  audio.register_params(pm, "audio");
  text.register_params(pm, "text");
}

Tensor<float> load_word_table(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open word table " + path);
  char magic[4];
  read_bytes(is, magic, 4);
  if (std::memcmp(magic, "MMVE", 4) != 0) throw IoError("bad word-table magic in " + path);
  const uint32_t version = read_u32(is);
  if (version != 1) throw IoError("unsupported word-table version " + std::to_string(version));
  const uint64_t vocab = read_u64(is);
  const uint64_t dim = read_u64(is);
  if (vocab == 0 || dim == 0 || vocab > (1u << 24) || dim > (1u << 20)) {
    throw IoError("implausible word-table dims in " + path);
  }
  Tensor<float> table(Shape{static_cast<int64_t>(vocab), static_cast<int64_t>(dim)});
  for (auto& x : table.mutable_values()) x = read_f32(is);
  return table;
}

void save_word_table(const std::string& path, const Tensor<float>& table) {
  check_shape(table.rank() == 2, "save_word_table: table must be [vocab, word_dim]");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot create word table " + path);
  write_bytes(os, "MMVE", 4);
  write_u32(os, 1);
  write_u64(os, static_cast<uint64_t>(table.dim(0)));
  write_u64(os, static_cast<uint64_t>(table.dim(1)));
  for (const float v : table.values()) write_f32(os, v);
  os.flush();
  if (!os) throw IoError("failed writing word table " + path);
}

#define MMVC_INSTANTIATE_ENCODERS(T)    \
  template struct Conv3dMini<T>;        \
  template struct ShiftBlock<T>;        \
  template struct ShiftMini<T>;         \
  template struct AudioEnc<T>;          \
  template struct TextEnc<T>;           \
  template struct Encoders<T>;

MMVC_INSTANTIATE_ENCODERS(float)
MMVC_INSTANTIATE_ENCODERS(double)

#undef MMVC_INSTANTIATE_ENCODERS

}  // namespace mmvc
