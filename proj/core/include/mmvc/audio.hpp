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

#include <vector>

#include "mmvc/tensor.hpp"

namespace mmvc {

// Log-mel spectrogram frontend. This is fixed DSP, not part of the trainable
// network: outputs are plain tensors that never record onto a tape.

struct LogMelConfig {
  int n_bins = 80;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  double fmin_hz = 60.0;  // fmax is sample_rate / 2
  double power_floor = 1e-6;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Periodic Hann window of length n.
std::vector<double> hann_window(int64_t n);

// In-place radix-2 decimation-in-time FFT; re/im length must be a power of 2.
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

// Triangular mel filters evaluated at FFT bin frequencies, row-major
// [n_bins, nfft/2 + 1].
std::vector<double> mel_filterbank(int n_bins, int64_t nfft, double sample_rate, double fmin,
                                   double fmax);

// samples [L] in [-1,1] -> [frames, n_bins], frames = 1 + floor((L-win)/hop).
// Each entry is log(filterbank applied to |STFT|^2 + power_floor).
template <class T>
Tensor<T> log_mel(const Tensor<T>& samples, double sample_rate, const LogMelConfig& cfg);

}  // namespace mmvc
