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

#include <functional>
#include <string>
#include <vector>

#include "mmvc/tensor.hpp"

namespace mmvc {

// All gradient checking runs in 64-bit regardless of the training dtype.
using ScalarFn64 = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

// Verification threshold shared by the suites and the CLI.
inline constexpr double kGradCheckTol = 1e-4;

// Compares the taped gradient of f against central finite differences over
// every coordinate of every input. Returns
//   max |analytic - central| / max(|analytic|, |central|, 1e-8).
// f must return a scalar and be pure up to tape recording. `corrupt` is a
// negative-control knob: it is added to the first analytic coordinate before
// comparison, so any nonzero value must trip the threshold.
double grad_check(const ScalarFn64& f, const std::vector<Tensor<double>>& inputs,
                  double eps = 1e-5, double corrupt = 0.0);

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
};

// Randomized per-op sweep through forward_op: `seeds` shape/value draws per
// op, one report per op holding the worst error seen.
std::vector<GradCheckReport> gradcheck_ops(int seeds, double eps = 1e-5, double corrupt = 0.0);

// Contrastive losses (NCE, MIL-NCE, logistic grid, combined) with random
// batch geometry and presence patterns.
std::vector<GradCheckReport> gradcheck_losses(int seeds, double eps = 1e-5, double corrupt = 0.0);

// Full pipeline: tiny model, synthesized batch, combined loss; per seed the
// check probes a few random coordinates of every parameter tensor. Seeds
// rotate through the three graph topologies. Coordinates use a combined
// absolute/relative rule (denominator floored at 1e-3), so near-zero
// gradients are held to a 1e-7 absolute bound at the 1e-4 gate; a pure
// relative bound is unattainable there because central differences through
// the conv stacks carry ~1e-9 rounding noise.
std::vector<GradCheckReport> gradcheck_end_to_end(int seeds, double eps = 1e-5,
                                                  double corrupt = 0.0,
                                                  int coords_per_param = 4);

}  // namespace mmvc
