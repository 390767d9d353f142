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

#include "mmvc/datasynth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>

#include "mmvc/io.hpp"

namespace mmvc {

namespace {

constexpr double kPi = 3.14159265358979323846;

// splitmix64 finalizer over (seed, index), so each sample owns an
// independent deterministic stream and generation is order-free.
uint64_t mix_seed(uint64_t seed, uint64_t index) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void hsv_to_rgb(double h, double s, double v, double* r, double* g, double* b) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double rr = 0.0, gg = 0.0, bb = 0.0;
  if (hp < 1.0) {
    rr = c; gg = x;
  } else if (hp < 2.0) {
    rr = x; gg = c;
  } else if (hp < 3.0) {
    gg = c; bb = x;
  } else if (hp < 4.0) {
    gg = x; bb = c;
  } else if (hp < 5.0) {
    rr = x; bb = c;
  } else {
    rr = c; bb = x;
  }
  const double m = v - c;
  *r = rr + m;
  *g = gg + m;
  *b = bb + m;
}

void rgb_to_hsv(double r, double g, double b, double* h, double* s, double* v) {
  const double mx = std::max(r, std::max(g, b));
  const double mn = std::min(r, std::min(g, b));
  const double d = mx - mn;
  double hh = 0.0;
  if (d > 0.0) {
    if (mx == r) {
      hh = std::fmod((g - b) / d, 6.0);
    } else if (mx == g) {
      hh = (b - r) / d + 2.0;
    } else {
      hh = (r - g) / d + 4.0;
    }
    hh /= 6.0;
    if (hh < 0.0) hh += 1.0;
  }
  *h = hh;
  *s = mx > 0.0 ? d / mx : 0.0;
  *v = mx;
}

// Signed wrapped offset in [-n/2, n/2).
double wrapped(double d, double n) { return d - n * std::floor(d / n + 0.5); }

template <class T>
VideoClip<T> render_video(const WorldSpec& spec, int64_t cls, Rng& rng) {
  const int64_t ft = spec.frames, h = spec.height, w = spec.width;
  Tensor<T> frames(Shape{ft, h, w, 3});
  T* px = frames.mutable_data();
  const double base_bg = rng.uniform(0.05, 0.15);
  double bg[3];
  for (int i = 0; i < 3; ++i) bg[i] = base_bg + rng.uniform(0.0, 0.05);
  double col[3];
  hsv_to_rgb(static_cast<double>(cls) / static_cast<double>(spec.num_classes), 0.9, 0.95, &col[0],
             &col[1], &col[2]);
  const double theta = 2.0 * kPi * static_cast<double>(cls) / static_cast<double>(spec.num_classes);
  const double speed = rng.uniform(1.5, 2.5);
  const double cy0 = static_cast<double>(h) / 2.0 + rng.uniform(-static_cast<double>(h) / 8.0,
                                                                static_cast<double>(h) / 8.0);
  const double cx0 = static_cast<double>(w) / 2.0 + rng.uniform(-static_cast<double>(w) / 8.0,
                                                                static_cast<double>(w) / 8.0);
  const double radius = static_cast<double>(h) / 6.0;
  const bool is_square = (cls % 2 == 0);
  int64_t idx = 0;
  for (int64_t t = 0; t < ft; ++t) {
    const double cy = cy0 + static_cast<double>(t) * speed * std::sin(theta);
    const double cx = cx0 + static_cast<double>(t) * speed * std::cos(theta);
    for (int64_t y = 0; y < h; ++y) {
      const double dy = wrapped(static_cast<double>(y) + 0.5 - cy, static_cast<double>(h));
      for (int64_t x = 0; x < w; ++x) {
        const double dx = wrapped(static_cast<double>(x) + 0.5 - cx, static_cast<double>(w));
        const bool inside = is_square
                                ? (std::abs(dy) <= radius && std::abs(dx) <= radius)
                                : (dy * dy + dx * dx <= radius * radius);
        const double* c = inside ? col : bg;
        px[idx++] = static_cast<T>(c[0]);
        px[idx++] = static_cast<T>(c[1]);
        px[idx++] = static_cast<T>(c[2]);
      }
    }
  }
  VideoClip<T> clip;
  clip.frames = frames;
  clip.fps = spec.fps;
  return clip;
}

template <class T>
AudioWave<T> render_audio(const WorldSpec& spec, int64_t cls, Rng& rng) {
  const int64_t len = static_cast<int64_t>(std::llround(spec.audio_seconds * spec.sample_rate));
  const double f0 = spec.base_freq * std::pow(2.0, static_cast<double>(cls) / 3.0);
  std::vector<double> raw(static_cast<size_t>(len), 0.0);
  for (int64_t hix = 1; hix <= spec.harmonics; ++hix) {
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    const double amp = 1.0 / static_cast<double>(hix);
    const double omega = 2.0 * kPi * static_cast<double>(hix) * f0 / spec.sample_rate;
    for (int64_t i = 0; i < len; ++i) {
      raw[static_cast<size_t>(i)] += amp * std::sin(omega * static_cast<double>(i) + phase);
    }
  }
  double peak = 0.0;
  for (double v : raw) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0.0 ? spec.peak_amplitude / peak : 0.0;
  Tensor<T> wave(Shape{len});
  T* out = wave.mutable_data();
  for (int64_t i = 0; i < len; ++i) {
    double v = scale * raw[static_cast<size_t>(i)];
    if (spec.gen_noise_std > 0.0) v += rng.normal(0.0, spec.gen_noise_std);
    out[i] = static_cast<T>(std::clamp(v, -1.0, 1.0));
  }
  AudioWave<T> a;
  a.samples = wave;
  a.sample_rate = spec.sample_rate;
  return a;
}

// Narration for a class: mostly words from the class band, the rest from the
// shared filler band at the top of the vocabulary. Id 0 stays the pad.
TokenSeq narration(const WorldSpec& spec, int64_t cls, Rng& rng) {
  const int64_t per_class = (spec.vocab_size - 1) / spec.num_classes;
  const int64_t filler_lo = 1 + per_class * spec.num_classes;
  const int64_t span = spec.max_words - spec.min_words + 1;
  const int64_t len = spec.min_words + rng.uniform_int(span);
  std::vector<int64_t> ids;
  ids.reserve(static_cast<size_t>(len));
  for (int64_t i = 0; i < len; ++i) {
    const bool from_class = filler_lo >= spec.vocab_size || rng.bernoulli(spec.class_word_prob);
    if (from_class) {
      ids.push_back(1 + cls * per_class + rng.uniform_int(per_class));
    } else {
      ids.push_back(filler_lo + rng.uniform_int(spec.vocab_size - filler_lo));
    }
  }
  return TokenSeq::from_words(ids);
}

int64_t other_class(int64_t cls, int64_t num_classes, Rng& rng) {
  int64_t d = rng.uniform_int(num_classes - 1);
  if (d >= cls) ++d;
  return d;
}

}  // namespace

void WorldSpec::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("WorldSpec: " + msg); };
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (frames < 1) fail("frames must be >= 1");
  if (height < 8 || width < 8) fail("height and width must be >= 8");
  if (!(fps > 0.0)) fail("fps must be positive");
  if (!(audio_seconds > 0.0) || !(sample_rate > 0.0)) fail("audio duration and rate must be positive");
  if (harmonics < 1) fail("harmonics must be >= 1");
  if (!(base_freq > 0.0)) fail("base_freq must be positive");
  if (!(peak_amplitude > 0.0 && peak_amplitude <= 1.0)) fail("peak_amplitude must be in (0,1]");
  if (gen_noise_std < 0.0) fail("gen_noise_std must be >= 0");
  const double top = base_freq * std::pow(2.0, static_cast<double>(num_classes - 1) / 3.0) *
                     static_cast<double>(harmonics);
  if (top >= sample_rate / 2.0) fail("highest harmonic exceeds the Nyquist frequency");
  if (vocab_size < num_classes + 1) fail("vocab_size must leave >= 1 word per class plus the pad");
  if (min_words < 1 || min_words > max_words || max_words > TokenSeq::kLen) {
    fail("word counts must satisfy 1 <= min_words <= max_words <= 16");
  }
  if (!(class_word_prob >= 0.0 && class_word_prob <= 1.0)) fail("class_word_prob must be in [0,1]");
  if (candidates < 1) fail("candidates must be >= 1");
  if (!(p_mis >= 0.0 && p_mis <= 1.0)) fail("p_mis must be in [0,1]");
  if (!(missing_text >= 0.0 && missing_text <= 1.0)) fail("missing_text must be in [0,1]");
}

template <class T>
MultimodalSample<T> generate_sample(const WorldSpec& spec, uint64_t seed, int64_t index) {
  spec.validate();
  Rng rng(mix_seed(seed, static_cast<uint64_t>(index)));
  MultimodalSample<T> s;
  s.class_label = rng.uniform_int(spec.num_classes);
  s.video = render_video<T>(spec, s.class_label, rng);
  s.audio = render_audio<T>(spec, s.class_label, rng);
  s.has_video = true;
  s.has_audio = true;
  if (!rng.bernoulli(spec.missing_text)) {
    s.has_text = true;
    const bool misaligned = rng.bernoulli(spec.p_mis);
    s.aligned_candidate = misaligned ? -1 : rng.uniform_int(spec.candidates);
    for (int64_t j = 0; j < spec.candidates; ++j) {
      const int64_t c = j == s.aligned_candidate
                            ? s.class_label
                            : other_class(s.class_label, spec.num_classes, rng);
      s.text_candidates.push_back(narration(spec, c, rng));
    }
  }
  return s;
}

template <class T>
std::vector<MultimodalSample<T>> generate(const WorldSpec& spec, uint64_t seed, int64_t n) {
  check(n >= 0, "generate: negative sample count");
  std::vector<MultimodalSample<T>> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out.push_back(generate_sample<T>(spec, seed, i));
  return out;
}

AugmentConfig AugmentConfig::identity() {
  AugmentConfig cfg;
  cfg.out_frames = 0;
  cfg.crop = 0;
  cfg.scale_min = 1.0;
  cfg.scale_max = 1.0;
  cfg.flip_prob = 0.0;
  cfg.brightness_delta = 0.0;
  cfg.saturation_delta = 0.0;
  cfg.contrast_delta = 0.0;
  cfg.hue_delta = 0.0;
  cfg.audio_noise_var_scale = 0.0;
  cfg.audio_offset_sec = 0.0;
  return cfg;
}

void AugmentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("AugmentConfig: " + msg); };
  if (out_frames < 0) fail("out_frames must be >= 0");
  if (crop < 0) fail("crop must be >= 0");
  if (resize_min < 0) fail("resize_min must be >= 0");
  if (!(scale_min > 0.0) || scale_min > scale_max) fail("need 0 < scale_min <= scale_max");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) fail("flip_prob must be in [0,1]");
  if (brightness_delta < 0.0 || saturation_delta < 0.0 || contrast_delta < 0.0 ||
      hue_delta < 0.0) {
    fail("color jitter deltas must be >= 0");
  }
  if (saturation_delta >= 1.0 || contrast_delta >= 1.0) fail("factor jitter deltas must be < 1");
  if (hue_delta > 0.5) fail("hue_delta must be <= 0.5");
  if (audio_noise_var_scale < 0.0) fail("audio_noise_var_scale must be >= 0");
  if (audio_offset_sec < 0.0) fail("audio_offset_sec must be >= 0");
  if (audio_window_samples < 0) fail("audio_window_samples must be >= 0");
}

template <class T>
Tensor<T> resize_clip(const Tensor<T>& frames, int64_t h, int64_t w) {
  check_shape(frames.rank() == 4 && frames.dim(3) == 3,
              "resize_clip: expected [T,H,W,3], got " + shape_str(frames.shape()));
  check(h >= 1 && w >= 1, "resize_clip: target extent must be >= 1");
  const int64_t ft = frames.dim(0), sh = frames.dim(1), sw = frames.dim(2);
  if (h == sh && w == sw) return frames;
  Tensor<T> out(Shape{ft, h, w, 3});
  const T* src = frames.ptr();
  T* dst = out.mutable_data();
  const double ry = static_cast<double>(sh) / static_cast<double>(h);
  const double rx = static_cast<double>(sw) / static_cast<double>(w);
  int64_t idx = 0;
  for (int64_t t = 0; t < ft; ++t) {
    const T* f = src + t * sh * sw * 3;
    for (int64_t y = 0; y < h; ++y) {
      double sy = (static_cast<double>(y) + 0.5) * ry - 0.5;
      sy = std::clamp(sy, 0.0, static_cast<double>(sh - 1));
      const int64_t y0 = static_cast<int64_t>(sy);
      const int64_t y1 = std::min(y0 + 1, sh - 1);
      const double wy = sy - static_cast<double>(y0);
      for (int64_t x = 0; x < w; ++x) {
        double sx = (static_cast<double>(x) + 0.5) * rx - 0.5;
        sx = std::clamp(sx, 0.0, static_cast<double>(sw - 1));
        const int64_t x0 = static_cast<int64_t>(sx);
        const int64_t x1 = std::min(x0 + 1, sw - 1);
        const double wx = sx - static_cast<double>(x0);
        for (int64_t c = 0; c < 3; ++c) {
          const double p00 = static_cast<double>(f[(y0 * sw + x0) * 3 + c]);
          const double p01 = static_cast<double>(f[(y0 * sw + x1) * 3 + c]);
          const double p10 = static_cast<double>(f[(y1 * sw + x0) * 3 + c]);
          const double p11 = static_cast<double>(f[(y1 * sw + x1) * 3 + c]);
          const double top = p00 + wx * (p01 - p00);
          const double bot = p10 + wx * (p11 - p10);
          dst[idx++] = static_cast<T>(top + wy * (bot - top));
        }
      }
    }
  }
  return out;
}

namespace {

template <class T>
Tensor<T> crop_clip(const Tensor<T>& frames, int64_t oy, int64_t ox, int64_t size) {
  const int64_t ft = frames.dim(0), sh = frames.dim(1), sw = frames.dim(2);
  check_shape(oy >= 0 && ox >= 0 && oy + size <= sh && ox + size <= sw,
              "augment: crop window exceeds the frame");
  Tensor<T> out(Shape{ft, size, size, 3});
  const T* src = frames.ptr();
  T* dst = out.mutable_data();
  for (int64_t t = 0; t < ft; ++t) {
    for (int64_t y = 0; y < size; ++y) {
      const T* row = src + ((t * sh + oy + y) * sw + ox) * 3;
      std::memcpy(dst, row, static_cast<size_t>(size) * 3 * sizeof(T));
      dst += size * 3;
    }
  }
  return out;
}

template <class T>
Tensor<T> flip_clip(const Tensor<T>& frames) {
  const int64_t ft = frames.dim(0), sh = frames.dim(1), sw = frames.dim(2);
  Tensor<T> out(frames.shape());
  const T* src = frames.ptr();
  T* dst = out.mutable_data();
  for (int64_t t = 0; t < ft; ++t) {
    for (int64_t y = 0; y < sh; ++y) {
      const T* row = src + (t * sh + y) * sw * 3;
      T* drow = dst + (t * sh + y) * sw * 3;
      for (int64_t x = 0; x < sw; ++x) {
        const T* p = row + (sw - 1 - x) * 3;
        drow[x * 3 + 0] = p[0];
        drow[x * 3 + 1] = p[1];
        drow[x * 3 + 2] = p[2];
      }
    }
  }
  return out;
}

}  // namespace

template <class T>
AudioWave<T> jitter_audio_window(const AudioWave<T>& wave, int64_t window_samples,
                                 double max_offset_sec, Rng& rng) {
  check(window_samples >= 1, "jitter_audio_window: window must be >= 1 sample");
  const int64_t len = wave.samples.size();
  const int64_t max_off =
      static_cast<int64_t>(std::ceil(max_offset_sec * wave.sample_rate));
  const int64_t center = (len - window_samples) / 2;
  if (center - max_off < 0 || center + max_off + window_samples > len) {
    throw Error("jitter_audio_window: wave of " + std::to_string(len) +
                " samples cannot cover window " + std::to_string(window_samples) +
                " at offset +-" + std::to_string(max_off));
  }
  int64_t off = 0;
  if (max_off > 0) off = rng.uniform_int(2 * max_off + 1) - max_off;
  const int64_t start = center + off;
  Tensor<T> out(Shape{window_samples});
  std::memcpy(out.mutable_data(), wave.samples.ptr() + start,
              static_cast<size_t>(window_samples) * sizeof(T));
  AudioWave<T> res;
  res.samples = out;
  res.sample_rate = wave.sample_rate;
  return res;
}

template <class T>
MultimodalSample<T> augment(const MultimodalSample<T>& s, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  check(s.has_video && s.video.frames.size() > 0, "augment: sample has no video");
  MultimodalSample<T> out = s;
  Tensor<T> frames = s.video.frames;

  // 1. Temporal sampling: a random contiguous window.
  const int64_t src_t = frames.dim(0);
  if (cfg.out_frames > 0 && cfg.out_frames != src_t) {
    check_shape(cfg.out_frames < src_t, "augment: out_frames exceeds the clip length");
    const int64_t start = rng.uniform_int(src_t - cfg.out_frames + 1);
    Tensor<T> win(Shape{cfg.out_frames, frames.dim(1), frames.dim(2), 3});
    const int64_t frame_sz = frames.dim(1) * frames.dim(2) * 3;
    std::memcpy(win.mutable_data(), frames.ptr() + start * frame_sz,
                static_cast<size_t>(cfg.out_frames * frame_sz) * sizeof(T));
    frames = win;
  }

  if (cfg.crop > 0) {
    // 2. Scale jitter: width and height scaled independently.
    const double sy = rng.uniform(cfg.scale_min, cfg.scale_max);
    const double sx = rng.uniform(cfg.scale_min, cfg.scale_max);
    int64_t hs = std::max<int64_t>(1, std::llround(static_cast<double>(frames.dim(1)) * sy));
    int64_t ws = std::max<int64_t>(1, std::llround(static_cast<double>(frames.dim(2)) * sx));
    frames = resize_clip(frames, hs, ws);
    // 3. Resize so the minimum side can host the crop.
    const int64_t target = std::max(cfg.resize_min, cfg.crop);
    if (std::min(hs, ws) != target) {
      const double f = static_cast<double>(target) / static_cast<double>(std::min(hs, ws));
      int64_t h2 = std::max(target, static_cast<int64_t>(std::llround(static_cast<double>(hs) * f)));
      int64_t w2 = std::max(target, static_cast<int64_t>(std::llround(static_cast<double>(ws) * f)));
      if (hs <= ws) h2 = target;
      if (ws <= hs) w2 = target;
      frames = resize_clip(frames, h2, w2);
      hs = h2;
      ws = w2;
    }
    // 4. Random crop.
    const int64_t oy = rng.uniform_int(hs - cfg.crop + 1);
    const int64_t ox = rng.uniform_int(ws - cfg.crop + 1);
    frames = crop_clip(frames, oy, ox, cfg.crop);
  }

  // 5. Horizontal flip.
  if (cfg.flip_prob > 0.0 && rng.bernoulli(cfg.flip_prob)) frames = flip_clip(frames);

  // 6. Color jitter: brightness, saturation, contrast, hue, then clip. Each
  // stage is skipped entirely at delta zero so the disabled pipeline is a
  // bit-exact identity.
  const int64_t numel = frames.size();
  const bool any_color = cfg.brightness_delta > 0.0 || cfg.saturation_delta > 0.0 ||
                         cfg.contrast_delta > 0.0 || cfg.hue_delta > 0.0;
  if (any_color) {
    std::vector<double> buf(static_cast<size_t>(numel));
    const T* fp = frames.ptr();
    for (int64_t i = 0; i < numel; ++i) buf[static_cast<size_t>(i)] = static_cast<double>(fp[i]);
    if (cfg.brightness_delta > 0.0) {
      const double d = rng.uniform(-cfg.brightness_delta, cfg.brightness_delta);
      for (double& v : buf) v += d;
    }
    if (cfg.saturation_delta > 0.0) {
      const double f = rng.uniform(1.0 - cfg.saturation_delta, 1.0 + cfg.saturation_delta);
      for (size_t i = 0; i < buf.size(); i += 3) {
        const double luma = 0.299 * buf[i] + 0.587 * buf[i + 1] + 0.114 * buf[i + 2];
        for (int c = 0; c < 3; ++c) buf[i + c] = luma + f * (buf[i + c] - luma);
      }
    }
    if (cfg.contrast_delta > 0.0) {
      const double f = rng.uniform(1.0 - cfg.contrast_delta, 1.0 + cfg.contrast_delta);
      double mean[3] = {0.0, 0.0, 0.0};
      for (size_t i = 0; i < buf.size(); i += 3) {
        for (int c = 0; c < 3; ++c) mean[c] += buf[i + c];
      }
      const double inv = 3.0 / static_cast<double>(numel);
      for (int c = 0; c < 3; ++c) mean[c] *= inv;
      for (size_t i = 0; i < buf.size(); i += 3) {
        for (int c = 0; c < 3; ++c) buf[i + c] = mean[c] + f * (buf[i + c] - mean[c]);
      }
    }
    if (cfg.hue_delta > 0.0) {
      const double d = rng.uniform(-cfg.hue_delta, cfg.hue_delta);
      for (size_t i = 0; i < buf.size(); i += 3) {
        double hh, ss, vv;
        const double r = std::clamp(buf[i], 0.0, 1.0);
        const double g = std::clamp(buf[i + 1], 0.0, 1.0);
        const double b = std::clamp(buf[i + 2], 0.0, 1.0);
        rgb_to_hsv(r, g, b, &hh, &ss, &vv);
        hsv_to_rgb(hh + d, ss, vv, &buf[i], &buf[i + 1], &buf[i + 2]);
      }
    }
    Tensor<T> jittered(frames.shape());
    T* out_p = jittered.mutable_data();
    for (int64_t i = 0; i < numel; ++i) {
      out_p[i] = static_cast<T>(std::clamp(buf[static_cast<size_t>(i)], 0.0, 1.0));
    }
    frames = jittered;
  } else if (cfg.crop > 0 || cfg.flip_prob > 0.0) {
    // 7. Geometry-only pipelines still guarantee the [0,1] range.
    Tensor<T> clipped(frames.shape());
    const T* fp = frames.ptr();
    T* out_p = clipped.mutable_data();
    for (int64_t i = 0; i < numel; ++i) out_p[i] = std::clamp(fp[i], T(0), T(1));
    frames = clipped;
  }
  out.video.frames = frames;

  // 8. Audio noise with variance proportional to the peak amplitude.
  if (s.has_audio && cfg.audio_noise_var_scale > 0.0 && s.audio.samples.size() > 0) {
    const T* ap = s.audio.samples.ptr();
    double max_amp = 0.0;
    for (int64_t i = 0; i < s.audio.samples.size(); ++i) {
      max_amp = std::max(max_amp, std::abs(static_cast<double>(ap[i])));
    }
    const double sigma = std::sqrt(cfg.audio_noise_var_scale * max_amp);
    Tensor<T> noisy(s.audio.samples.shape());
    T* np = noisy.mutable_data();
    for (int64_t i = 0; i < noisy.size(); ++i) {
      const double v = static_cast<double>(ap[i]) + rng.normal(0.0, sigma);
      np[i] = static_cast<T>(std::clamp(v, -1.0, 1.0));
    }
    out.audio.samples = noisy;
  }

  // 9. Audio-visual desynchronization, ablation only.
  if (s.has_audio && cfg.audio_offset_sec > 0.0) {
    const int64_t window = cfg.audio_window_samples > 0 ? cfg.audio_window_samples
                                                        : out.audio.samples.size();
    out.audio = jitter_audio_window(out.audio, window, cfg.audio_offset_sec, rng);
  }
  return out;
}

template <class T>
ContrastiveBatch<T> make_batch(const std::vector<MultimodalSample<T>>& samples, Encoders<T>& enc,
                               ModalityGraph<T>& graph, bool train) {
  const int64_t n = static_cast<int64_t>(samples.size());
  check_shape(n >= 2, "make_batch: need at least 2 samples, got " + std::to_string(n));
  const Shape& vshape = samples[0].video.frames.shape();
  const int64_t wlen = samples[0].audio.samples.size();
  Tensor<T> clips(Shape{n, vshape[0], vshape[1], vshape[2], 3});
  Tensor<T> waves(Shape{n, wlen});
  T* cp = clips.mutable_data();
  T* wp = waves.mutable_data();
  const int64_t vsz = samples[0].video.frames.size();
  for (int64_t i = 0; i < n; ++i) {
    check_shape(samples[i].video.frames.shape() == vshape &&
                    samples[i].audio.samples.size() == wlen,
                "make_batch: sample " + std::to_string(i) + " geometry differs from sample 0");
    std::memcpy(cp + i * vsz, samples[i].video.frames.ptr(),
                static_cast<size_t>(vsz) * sizeof(T));
    std::memcpy(wp + i * wlen, samples[i].audio.samples.ptr(),
                static_cast<size_t>(wlen) * sizeof(T));
  }

  Tensor<T> fv = enc.encode_video_batch(clips, train);
  Tensor<T> fa = enc.encode_audio_batch(waves, train);
  const SpaceId sva = va_loss_space(graph.cfg.topology);
  const SpaceId svt = vt_loss_space(graph.cfg.topology);

  ContrastiveBatch<T> batch;
  batch.zv_va = graph.project_batch(fv, Modality::kV, sva, train);
  batch.za_va = graph.project_batch(fa, Modality::kA, sva, train);
  batch.zv_txt = graph.project_batch(fv, Modality::kV, svt, train);
  batch.text_candidates.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<size_t>(i)];
    batch.has_v.push_back(s.has_video ? 1 : 0);
    batch.has_a.push_back(s.has_audio ? 1 : 0);
    batch.has_t.push_back(s.has_text && !s.text_candidates.empty() ? 1 : 0);
    if (batch.has_t.back()) {
      Tensor<T> ft = enc.encode_text_batch(s.text_candidates, train);
      batch.text_candidates[static_cast<size_t>(i)] =
          graph.project_batch(ft, Modality::kT, svt, train);
    }
  }
  batch.validate();
  return batch;
}

namespace {

constexpr char kCorpusMagic[4] = {'M', 'M', 'V', 'D'};
constexpr uint32_t kCorpusVersion = 1;

}  // namespace

template <class T>
void save_corpus(const std::string& path, const std::vector<MultimodalSample<T>>& samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_bytes(os, kCorpusMagic, 4);
  write_u32(os, kCorpusVersion);
  write_u64(os, static_cast<uint64_t>(samples.size()));
  for (const auto& s : samples) {
    write_u64(os, static_cast<uint64_t>(s.class_label));
    write_u64(os, static_cast<uint64_t>(s.aligned_candidate));
    unsigned char flags[3] = {static_cast<unsigned char>(s.has_video ? 1 : 0),
                              static_cast<unsigned char>(s.has_audio ? 1 : 0),
                              static_cast<unsigned char>(s.has_text ? 1 : 0)};
    write_bytes(os, flags, 3);
    const Tensor<T>& v = s.video.frames;
    check_shape(v.rank() == 4 && v.dim(3) == 3, "save_corpus: video must be [T,H,W,3]");
    write_u64(os, static_cast<uint64_t>(v.dim(0)));
    write_u64(os, static_cast<uint64_t>(v.dim(1)));
    write_u64(os, static_cast<uint64_t>(v.dim(2)));
    write_f64(os, s.video.fps);
    for (int64_t i = 0; i < v.size(); ++i) write_f32(os, static_cast<float>(v.at(i)));
    write_u64(os, static_cast<uint64_t>(s.audio.samples.size()));
    write_f64(os, s.audio.sample_rate);
    for (int64_t i = 0; i < s.audio.samples.size(); ++i) {
      write_f32(os, static_cast<float>(s.audio.samples.at(i)));
    }
    write_u64(os, static_cast<uint64_t>(s.text_candidates.size()));
    for (const TokenSeq& t : s.text_candidates) {
      write_u64(os, static_cast<uint64_t>(t.ids.size()));
      for (int64_t id : t.ids) write_u32(os, static_cast<uint32_t>(id));
    }
  }
  if (!os) throw IoError("write failed for '" + path + "'");
}

template <class T>
std::vector<MultimodalSample<T>> load_corpus(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  char magic[4];
  read_bytes(is, magic, 4);
  if (std::memcmp(magic, kCorpusMagic, 4) != 0) {
    throw IoError("'" + path + "' is not a corpus file (bad magic)");
  }
  const uint32_t version = read_u32(is);
  if (version != kCorpusVersion) {
    throw IoError("corpus version " + std::to_string(version) + " unsupported (want " +
                  std::to_string(kCorpusVersion) + ")");
  }
  const uint64_t count = read_u64(is);
  std::vector<MultimodalSample<T>> out;
  out.reserve(count);
  for (uint64_t si = 0; si < count; ++si) {
    MultimodalSample<T> s;
    s.class_label = static_cast<int64_t>(read_u64(is));
    s.aligned_candidate = static_cast<int64_t>(read_u64(is));
    unsigned char flags[3];
    read_bytes(is, flags, 3);
    s.has_video = flags[0] != 0;
    s.has_audio = flags[1] != 0;
    s.has_text = flags[2] != 0;
    const int64_t ft = static_cast<int64_t>(read_u64(is));
    const int64_t h = static_cast<int64_t>(read_u64(is));
    const int64_t w = static_cast<int64_t>(read_u64(is));
    s.video.fps = read_f64(is);
    Tensor<T> frames(Shape{ft, h, w, 3});
    T* fp = frames.mutable_data();
    for (int64_t i = 0; i < frames.size(); ++i) fp[i] = static_cast<T>(read_f32(is));
    s.video.frames = frames;
    const int64_t wlen = static_cast<int64_t>(read_u64(is));
    s.audio.sample_rate = read_f64(is);
    Tensor<T> wave(Shape{wlen});
    T* wp = wave.mutable_data();
    for (int64_t i = 0; i < wlen; ++i) wp[i] = static_cast<T>(read_f32(is));
    s.audio.samples = wave;
    const uint64_t ncand = read_u64(is);
    for (uint64_t c = 0; c < ncand; ++c) {
      const uint64_t len = read_u64(is);
      if (len != static_cast<uint64_t>(TokenSeq::kLen)) {
        throw IoError("corpus token sequence of length " + std::to_string(len) +
                      " (want " + std::to_string(TokenSeq::kLen) + ")");
      }
      TokenSeq t;
      t.ids.resize(len);
      for (uint64_t i = 0; i < len; ++i) t.ids[i] = static_cast<int64_t>(read_u32(is));
      s.text_candidates.push_back(std::move(t));
    }
    out.push_back(std::move(s));
  }
  return out;
}

#define MMVC_INSTANTIATE_DATASYNTH(T)                                                        \
  template struct MultimodalSample<T>;                                                       \
  template MultimodalSample<T> generate_sample<T>(const WorldSpec&, uint64_t, int64_t);      \
  template std::vector<MultimodalSample<T>> generate<T>(const WorldSpec&, uint64_t,          \
                                                        int64_t);                            \
  template MultimodalSample<T> augment<T>(const MultimodalSample<T>&, const AugmentConfig&,  \
                                          Rng&);                                             \
  template AudioWave<T> jitter_audio_window<T>(const AudioWave<T>&, int64_t, double, Rng&);  \
  template Tensor<T> resize_clip<T>(const Tensor<T>&, int64_t, int64_t);                     \
  template ContrastiveBatch<T> make_batch<T>(const std::vector<MultimodalSample<T>>&,        \
                                             Encoders<T>&, ModalityGraph<T>&, bool);        \
  template void save_corpus<T>(const std::string&, const std::vector<MultimodalSample<T>>&); \
  template std::vector<MultimodalSample<T>> load_corpus<T>(const std::string&)

MMVC_INSTANTIATE_DATASYNTH(float);
MMVC_INSTANTIATE_DATASYNTH(double);

}  // namespace mmvc
