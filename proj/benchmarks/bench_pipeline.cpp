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

// End-to-end benchmarks: sample synthesis, augmentation, encoding, and a
// full optimization step on a shrunken world.

#include <benchmark/benchmark.h>

#include <vector>

#include <mmvc/adam.hpp>
#include <mmvc/config.hpp>
#include <mmvc/datasynth.hpp>
#include <mmvc/encoders.hpp>
#include <mmvc/graphs.hpp>
#include <mmvc/losses.hpp>
#include <mmvc/rng.hpp>
#include <mmvc/tape.hpp>
#include <mmvc/train.hpp>

namespace {

using namespace mmvc;

WorldSpec small_world() {
  WorldSpec w;
  w.num_classes = 4;
  w.frames = 4;
  w.height = w.width = 16;
  w.audio_seconds = 0.25;  // 2000 samples at 8 kHz
  w.vocab_size = 16;
  return w;
}

EncoderConfig small_encoder() {
  EncoderConfig ec;
  ec.video_widths = {4, 8};
  ec.audio_widths = {4, 8};
  ec.d_v = ec.d_a = ec.d_t = 16;
  ec.word_dim = 8;
  ec.vocab_size = 16;
  ec.clip_t = 4;
  ec.clip_h = ec.clip_w = 12;
  ec.audio_samples = 2000;
  ec.sample_rate = 8000.0;
  ec.mel.n_bins = 16;
  return ec;
}

AugmentConfig small_augment() {
  AugmentConfig ac;
  ac.out_frames = 4;
  ac.crop = 12;
  ac.resize_min = 14;
  return ac;
}

void bm_generate_sample(benchmark::State& state) {
  const WorldSpec w = small_world();
  int64_t index = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_sample<float>(w, 1, index++));
  }
}
BENCHMARK(bm_generate_sample);

void bm_augment(benchmark::State& state) {
  const WorldSpec w = small_world();
  const AugmentConfig ac = small_augment();
  const auto sample = generate_sample<float>(w, 1, 0);
  Rng rng(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(augment(sample, ac, rng));
  }
}
BENCHMARK(bm_augment);

void bm_encode_video_batch(benchmark::State& state) {
  Rng rng(3);
  Encoders<float> enc(small_encoder(), rng);
  Tensor<float> clips(Shape{8, 4, 12, 12, 3});
  Rng drng(4);
  for (int64_t i = 0; i < clips.size(); ++i) {
    clips.mutable_data()[i] = static_cast<float>(drng.uniform());
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(enc.encode_video_batch(clips, /*train=*/false));
  }
}
BENCHMARK(bm_encode_video_batch);

void bm_train_step(benchmark::State& state) {
  const WorldSpec world = small_world();
  const EncoderConfig ec = small_encoder();
  const AugmentConfig ac = small_augment();
  Model<float> model(ec, GraphConfig{}, 5);
  ParamMap<float> pm;
  model.register_params(pm);
  Adam<float> adam(pm);
  LossConfig lc;
  Rng aug_rng(6);

  int64_t index = 0;
  for (auto _ : state) {
    std::vector<MultimodalSample<float>> raw;
    for (int64_t i = 0; i < 8; ++i) {
      raw.push_back(augment(generate_sample<float>(world, 7, index++), ac, aug_rng));
    }
    Tape<float> tape;
    TapeScope<float> scope(tape);
    ContrastiveBatch<float> batch = make_batch(raw, model.encoders, model.graph, /*train=*/true);
    CombinedLossResult<float> loss = combined_loss(batch, lc);
    backward(tape, loss.total);
    adam.step(pm, tape, 1e-3);
    benchmark::DoNotOptimize(loss.total);
  }
}
BENCHMARK(bm_train_step);

}  // namespace

BENCHMARK_MAIN();
