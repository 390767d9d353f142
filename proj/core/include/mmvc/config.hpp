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

#include "mmvc/datasynth.hpp"
#include "mmvc/encoders.hpp"
#include "mmvc/eval.hpp"
#include "mmvc/graphs.hpp"
#include "mmvc/losses.hpp"
#include "mmvc/schedule.hpp"

namespace mmvc {

// Whole-run configuration. JSON documents overlay these defaults; unknown
// keys are rejected so typos cannot silently fall back to defaults, and the
// resolved dump records every effective value.
struct RunConfig {
  uint64_t seed = 0;
  std::string run_name = "run";
  std::string output_dir;    // empty: <output root>/<run_name>
  std::string corpus_path;   // optional pre-generated corpus file
  int64_t batch_size = 32;
  int64_t checkpoint_every = 1000;
  int64_t log_every = 1;

  WorldSpec world;
  AugmentConfig augment;
  EncoderConfig encoder;
  GraphConfig graph;
  LossConfig loss;
  LrSchedule schedule;
  ProbeConfig probe;

  void validate() const;
};

// Named weight/corpus presets: "ht-like" (text everywhere, vt:va = 10:1)
// and "ht+as-like" (half the corpus text-free, 1:1).
RunConfig preset_run_config(const std::string& name);

// Defaults overlaid with a JSON document (text or file).
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// One dotted-path override, e.g. "graph.topology=fac" or "seed=3". The key
// must name an existing field.
void apply_override(RunConfig* cfg, const std::string& assignment);

// Full round-trippable dump, defaults included.
std::string resolved_config_json(const RunConfig& cfg);

// $MMVC_OUTPUT_ROOT when set, else "runs".
std::string output_root();
// output_dir if set, else <output root>/<run_name>.
std::string run_directory(const RunConfig& cfg);

}  // namespace mmvc
