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

namespace mmvc {

// Linear warmup from 0 to base_lr, then a half-period cosine decay to 0 at
// total_steps. Continuous at the warmup boundary.
struct LrSchedule {
  double base_lr = 0.002;
  int64_t warmup_steps = 100;
  int64_t total_steps = 2000;

  void validate() const;
};

// Defined on 0 <= step <= total_steps; out-of-range steps are an error.
double lr_at(const LrSchedule& sched, int64_t step);

}  // namespace mmvc
