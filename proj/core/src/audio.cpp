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

#include "mmvc/audio.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mmvc {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> hann_window(int64_t n) {
  check(n >= 1, "hann_window: length must be >= 1");
  std::vector<double> w(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    w[static_cast<size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                              static_cast<double>(n)));
  }
  return w;
}

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  const size_t n = re.size();
  check(n == im.size(), "fft_radix2: re/im length mismatch");
  check(n >= 1 && (n & (n - 1)) == 0, "fft_radix2: length must be a power of 2");
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (size_t k = 0; k < len / 2; ++k) {
        const size_t a = i + k, b = i + k + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

std::vector<double> mel_filterbank(int n_bins, int64_t nfft, double sample_rate, double fmin,
                                   double fmax) {
  check(n_bins >= 1, "mel_filterbank: n_bins must be >= 1");
  check(fmin >= 0.0 && fmax > fmin && fmax <= sample_rate / 2.0 + 1e-9,
        "mel_filterbank: need 0 <= fmin < fmax <= nyquist");
  const int64_t n_freq = nfft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<size_t>(n_bins) + 2);
  for (int m = 0; m < n_bins + 2; ++m) {
    edges[static_cast<size_t>(m)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) /
                               static_cast<double>(n_bins + 1));
  }
  std::vector<double> fb(static_cast<size_t>(n_bins) * static_cast<size_t>(n_freq), 0.0);
  for (int m = 0; m < n_bins; ++m) {
    const double f_lo = edges[static_cast<size_t>(m)];
    const double f_c = edges[static_cast<size_t>(m) + 1];
    const double f_hi = edges[static_cast<size_t>(m) + 2];
    for (int64_t k = 0; k < n_freq; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(nfft);
      double w = 0.0;
      if (f > f_lo && f < f_c) {
        w = (f - f_lo) / (f_c - f_lo);
      } else if (f >= f_c && f < f_hi) {
        w = (f_hi - f) / (f_hi - f_c);
      }
      fb[static_cast<size_t>(m) * static_cast<size_t>(n_freq) + static_cast<size_t>(k)] = w;
    }
  }
  return fb;
}

namespace {

int64_t next_pow2(int64_t n) {
  int64_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

template <class T>
Tensor<T> log_mel(const Tensor<T>& samples, double sample_rate, const LogMelConfig& cfg) {
  check_shape(samples.rank() == 1, "log_mel: samples must be rank 1, got " +
                                       shape_str(samples.shape()));
  check(sample_rate > 0.0, "log_mel: sample_rate must be positive");
  const int64_t L = samples.size();
  const int64_t win = static_cast<int64_t>(std::lround(cfg.window_ms * 1e-3 * sample_rate));
  const int64_t hop = static_cast<int64_t>(std::lround(cfg.hop_ms * 1e-3 * sample_rate));
  check(win >= 2 && hop >= 1, "log_mel: window/hop too small for this sample rate");
  check_shape(L >= win, "log_mel: input length " + std::to_string(L) +
                            " shorter than window " + std::to_string(win));
  const int64_t frames = 1 + (L - win) / hop;
  const int64_t nfft = next_pow2(win);
  const int64_t n_freq = nfft / 2 + 1;
  const auto window = hann_window(win);
  const auto fb = mel_filterbank(cfg.n_bins, nfft, sample_rate, cfg.fmin_hz, sample_rate / 2.0);

  Tensor<T> out(Shape{frames, cfg.n_bins});
  T* po = out.mutable_data();
  const T* x = samples.ptr();
  std::vector<double> re(static_cast<size_t>(nfft)), im(static_cast<size_t>(nfft));
  std::vector<double> power(static_cast<size_t>(n_freq));
  for (int64_t f = 0; f < frames; ++f) {
    const int64_t start = f * hop;
    for (int64_t i = 0; i < nfft; ++i) {
      re[static_cast<size_t>(i)] =
          i < win ? static_cast<double>(x[start + i]) * window[static_cast<size_t>(i)] : 0.0;
      im[static_cast<size_t>(i)] = 0.0;
    }
    fft_radix2(re, im);
    for (int64_t k = 0; k < n_freq; ++k) {
      power[static_cast<size_t>(k)] = re[static_cast<size_t>(k)] * re[static_cast<size_t>(k)] +
                                      im[static_cast<size_t>(k)] * im[static_cast<size_t>(k)];
    }
    for (int m = 0; m < cfg.n_bins; ++m) {
      const double* wrow = fb.data() + static_cast<size_t>(m) * static_cast<size_t>(n_freq);
      double acc = 0.0;
      for (int64_t k = 0; k < n_freq; ++k) acc += wrow[static_cast<size_t>(k)] * power[static_cast<size_t>(k)];
      po[f * cfg.n_bins + m] = static_cast<T>(std::log(acc + cfg.power_floor));
    }
  }
  check_finite(out.values(), "log_mel");
  return out;
}

template Tensor<float> log_mel<float>(const Tensor<float>&, double, const LogMelConfig&);
template Tensor<double> log_mel<double>(const Tensor<double>&, double, const LogMelConfig&);

}  // namespace mmvc
