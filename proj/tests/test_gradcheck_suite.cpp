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

// Smoke coverage for the finite-difference gradient checker: the three
// suites stay under the shared tolerance at a few seeds, the primitive
// grad_check agrees with a closed-form derivative, and the corrupt knob
// proves the machinery can actually fail. The acceptance binary runs the
// full-width sweep; this file keeps per-commit runtime small.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <mmvc/gradcheck.hpp>
#include <mmvc/ops.hpp>
#include <mmvc/rng.hpp>
#include <mmvc/tensor.hpp>

namespace {

using namespace mmvc;

}  // namespace

TEST_CASE("grad_check validates a closed-form derivative") {
  // f(x) = sum(x * x), df/dx = 2x: smooth, well-conditioned everywhere.
  const ScalarFn64 f = [](const std::vector<Tensor<double>>& xs) {
    return sum_all(mul(xs[0], xs[0]));
  };
  Rng rng(31);
  Tensor<double> x(Shape{5});
  for (int64_t i = 0; i < x.size(); ++i) x.mutable_data()[i] = rng.uniform(-2.0, 2.0);
  x.set_requires_grad(true);
  CHECK(grad_check(f, {x}) < 1e-8);

  // The corrupt knob shifts the first analytic coordinate and must be seen.
  CHECK(grad_check(f, {x}, 1e-5, 1e-3) > kGradCheckTol);
}

TEST_CASE("op sweep stays under tolerance at a few seeds") {
  const auto reports = gradcheck_ops(3);
  CHECK(reports.size() > 10);
  for (const auto& r : reports) {
    INFO("op ", r.name);
    CHECK(r.max_rel_err < kGradCheckTol);
  }
}

TEST_CASE("loss sweep stays under tolerance at a few seeds") {
  const auto reports = gradcheck_losses(3);
  REQUIRE(!reports.empty());
  for (const auto& r : reports) {
    INFO("loss ", r.name);
    CHECK(r.max_rel_err < kGradCheckTol);
  }
}

TEST_CASE("end-to-end parameter probes stay under tolerance") {
  const auto reports = gradcheck_end_to_end(3, 1e-5, 0.0, 2);
  REQUIRE(!reports.empty());
  for (const auto& r : reports) {
    INFO("scope ", r.name);
    CHECK(r.max_rel_err < kGradCheckTol);
  }
}

TEST_CASE("negative control: corrupted gradients trip every suite") {
  for (const auto& r : gradcheck_ops(1, 1e-5, 1e-3)) {
    INFO("op ", r.name);
    CHECK(r.max_rel_err > kGradCheckTol);
  }
  for (const auto& r : gradcheck_losses(1, 1e-5, 1e-3)) {
    INFO("loss ", r.name);
    CHECK(r.max_rel_err > kGradCheckTol);
  }
  // Seeds rotate through the topologies, so three are needed to touch all
  // end-to-end scopes.
  for (const auto& r : gradcheck_end_to_end(3, 1e-5, 1e-3, 1)) {
    INFO("scope ", r.name);
    CHECK(r.max_rel_err > kGradCheckTol);
  }
}
