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

// Microbenchmarks for the hot per-step kernels: convolutions, the
// contrastive losses (forward and forward+backward), and log-mel features.

#include <benchmark/benchmark.h>

#include <vector>

#include <mmvc/audio.hpp>
#include <mmvc/conv.hpp>
#include <mmvc/losses.hpp>
#include <mmvc/ops.hpp>
#include <mmvc/rng.hpp>
#include <mmvc/tape.hpp>
#include <mmvc/tensor.hpp>

namespace {

using namespace mmvc;

Tensor<float> random_tensor(Shape shape, Rng& rng) {
  Tensor<float> t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) {
    t.mutable_data()[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  return t;
}

void bm_conv2d_forward(benchmark::State& state) {
  Rng rng(1);
  const Tensor<float> x = random_tensor({8, 28, 28, 8}, rng);
  const Tensor<float> w = random_tensor({3, 3, 8, 16}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(x, w, 2, Pad::kZero));
  }
}
BENCHMARK(bm_conv2d_forward);

void bm_conv3d_forward(benchmark::State& state) {
  Rng rng(2);
  const Tensor<float> x = random_tensor({4, 8, 28, 28, 3}, rng);
  const Tensor<float> w = random_tensor({3, 3, 3, 3, 8}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv3d(x, w, 2, Pad::kZero, Pad::kZero));
  }
}
BENCHMARK(bm_conv3d_forward);

void bm_conv3d_backward(benchmark::State& state) {
  Rng rng(3);
  Tensor<float> x = random_tensor({4, 8, 28, 28, 3}, rng);
  Tensor<float> w = random_tensor({3, 3, 3, 3, 8}, rng);
  x.set_requires_grad(true);
  w.set_requires_grad(true);
  for (auto _ : state) {
    Tape<float> tape;
    TapeScope<float> scope(tape);
    Tensor<float> loss = sum_all(conv3d(x, w, 2, Pad::kZero, Pad::kZero));
    backward(tape, loss);
    benchmark::DoNotOptimize(tape.grad(w));
  }
}
BENCHMARK(bm_conv3d_backward);

void bm_temporal_shift(benchmark::State& state) {
  Rng rng(4);
  const Tensor<float> x = random_tensor({4, 8, 14, 14, 16}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(temporal_shift(x, 0.125, true));
  }
}
BENCHMARK(bm_temporal_shift);

void bm_nce_loss_forward(benchmark::State& state) {
  Rng rng(5);
  const Tensor<float> zv = l2_normalize_rows(random_tensor({32, 16}, rng));
  const Tensor<float> za = l2_normalize_rows(random_tensor({32, 16}, rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(nce_loss(zv, za, 0.07, NegativePolicy::kBothDirections));
  }
}
BENCHMARK(bm_nce_loss_forward);

void bm_nce_loss_backward(benchmark::State& state) {
  Rng rng(6);
  Tensor<float> zv = l2_normalize_rows(random_tensor({32, 16}, rng));
  Tensor<float> za = l2_normalize_rows(random_tensor({32, 16}, rng));
  zv.set_requires_grad(true);
  za.set_requires_grad(true);
  for (auto _ : state) {
    Tape<float> tape;
    TapeScope<float> scope(tape);
    Tensor<float> loss = nce_loss(zv, za, 0.07, NegativePolicy::kBothDirections);
    backward(tape, loss);
    benchmark::DoNotOptimize(tape.grad(zv));
  }
}
BENCHMARK(bm_nce_loss_backward);

void bm_mil_nce_loss(benchmark::State& state) {
  Rng rng(7);
  const Tensor<float> zv = l2_normalize_rows(random_tensor({32, 16}, rng));
  std::vector<Tensor<float>> cands;
  for (int i = 0; i < 32; ++i) {
    cands.push_back(l2_normalize_rows(random_tensor({3, 16}, rng)));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(mil_nce_loss(zv, cands, 0.07, NegativePolicy::kBothDirections));
  }
}
BENCHMARK(bm_mil_nce_loss);

void bm_log_mel(benchmark::State& state) {
  Rng rng(8);
  Tensor<float> wave(Shape{8000});
  for (int64_t i = 0; i < wave.size(); ++i) {
    wave.mutable_data()[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  const LogMelConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_mel(wave, 8000.0, cfg));
  }
}
BENCHMARK(bm_log_mel);

}  // namespace

BENCHMARK_MAIN();
