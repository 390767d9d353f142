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

#include "mmvc/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mmvc/common.hpp"

namespace mmvc {

void LrSchedule::validate() const {
  check(base_lr > 0.0, "Schedule: base_lr must be > 0");
  check(warmup_steps >= 0, "Schedule: warmup_steps must be >= 0");
  check(total_steps >= 1, "Schedule: total_steps must be >= 1");
  check(warmup_steps < total_steps, "Schedule: warmup_steps must be < total_steps");
}

double lr_at(const LrSchedule& sched, int64_t step) {
  sched.validate();
  check(step >= 0 && step <= sched.total_steps,
        "lr_at: step " + std::to_string(step) + " outside [0, " +
            std::to_string(sched.total_steps) + "]");
  if (step < sched.warmup_steps) {
    return sched.base_lr * static_cast<double>(step) / static_cast<double>(sched.warmup_steps);
  }
  const double progress = static_cast<double>(step - sched.warmup_steps) /
                          static_cast<double>(sched.total_steps - sched.warmup_steps);
  return sched.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace mmvc
