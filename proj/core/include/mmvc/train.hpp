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

#include "mmvc/adam.hpp"
#include "mmvc/checkpoint.hpp"
#include "mmvc/config.hpp"
#include "mmvc/encoders.hpp"
#include "mmvc/graphs.hpp"
#include "mmvc/rng.hpp"

namespace mmvc {

// Encoders plus projection heads, deterministically initialized from a seed.
// Two models built from the same configs and seed are parameter-identical.
template <class T>
struct Model {
  Encoders<T> encoders;
  ModalityGraph<T> graph;

  Model() = default;
  Model(const EncoderConfig& ec, const GraphConfig& gc, uint64_t seed);

  void register_params(ParamMap<T>& pm);
};

// One metrics row; mirrored to the CSV as `step,lr,loss_total,loss_va,loss_vt`.
struct MetricsRow {
  int64_t step = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_va = 0.0;
  double loss_vt = 0.0;
};

template <class T>
struct TrainResult {
  Model<T> model;                   // state after the last step
  std::vector<MetricsRow> metrics;  // rows actually logged
  std::string run_dir;
  std::string final_checkpoint_path;
  double step0_loss = 0.0;
};

// Full training snapshot: parameters under "param.", optimizer moments under
// "opt.m." / "opt.v.", and a JSON blob holding the resolved config, the step
// counter, and the augmentation RNG state.
template <class T>
Checkpoint model_checkpoint(Model<T>& model, const Adam<T>& opt, const RunConfig& cfg,
                            int64_t step, const Rng& rng);

// Writes a checkpoint's "param." tensors back into the model.
template <class T>
void restore_model(const Checkpoint& c, Model<T>* model);

// Runs the optimization loop described by cfg. Side effects, all inside
// run_directory(cfg): config_resolved.json, metrics.csv, periodic
// checkpoints ckpt_<step>.mmvc, and a final ckpt_final.mmvc. Fully
// deterministic per config: reruns produce byte-identical artifacts.
template <class T>
TrainResult<T> run_training(const RunConfig& cfg);

}  // namespace mmvc
