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

// Loss oracles. Every contrastive loss is checked against a brute-force
// re-derivation written as explicit double loops over pairs in 64-bit, with
// no log-sum-exp shifting, so the oracle shares no code path with the
// library. Closed-form identities (uniform-score value, singleton MIL
// reduction, lambda linearity, missing-modality invariance) are asserted
// directly.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include <mmvc/losses.hpp>
#include <mmvc/ops.hpp>
#include <mmvc/rng.hpp>
#include <mmvc/tape.hpp>
#include <mmvc/tensor.hpp>

namespace {

using namespace mmvc;

using Rows = std::vector<std::vector<double>>;

Rows random_unit_rows(int64_t n, int64_t d, Rng& rng) {
  Rows rows(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(d)));
  for (auto& r : rows) {
    double norm2 = 0.0;
    for (auto& v : r) {
      v = rng.uniform(-1.0, 1.0);
      norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : r) v *= inv;
  }
  return rows;
}

Tensor<double> to_tensor(const Rows& rows) {
  const int64_t n = static_cast<int64_t>(rows.size());
  const int64_t d = static_cast<int64_t>(rows[0].size());
  Tensor<double> t(Shape{n, d});
  double* p = t.mutable_data();
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < d; ++j) p[i * d + j] = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  return t;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// -log( e^{s_ii/tau} / (e^{s_ii/tau} + sum_neg e^{s/tau}) ), averaged over i.
double brute_nce(const Rows& zv, const Rows& za, double tau, bool both) {
  const size_t n = zv.size();
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double denom = std::exp(dot(zv[i], za[i]) / tau);
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      denom += std::exp(dot(zv[i], za[j]) / tau);
      if (both) denom += std::exp(dot(zv[j], za[i]) / tau);
    }
    total += -std::log(std::exp(dot(zv[i], za[i]) / tau) / denom);
  }
  return total / static_cast<double>(n);
}

// Positive mass is the sum over sample i's candidate bag; negatives are every
// other bag scored by v_i plus (both directions) bag i scored by other videos.
double brute_mil_nce(const Rows& zv, const std::vector<Rows>& cands, double tau, bool both) {
  const size_t n = zv.size();
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double pos = 0.0;
    for (const auto& p : cands[i]) pos += std::exp(dot(zv[i], p) / tau);
    double denom = pos;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (const auto& p : cands[j]) denom += std::exp(dot(zv[i], p) / tau);
      if (both) {
        for (const auto& p : cands[i]) denom += std::exp(dot(zv[j], p) / tau);
      }
    }
    total += -std::log(pos / denom);
  }
  return total / static_cast<double>(n);
}

// Mean over the n x n grid of log(1 + exp(-y * s/tau)), y = +1 on the
// diagonal and -1 off it.
double brute_logistic_grid(const Rows& zv, const Rows& za, double tau) {
  const size_t n = zv.size();
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const double s = dot(zv[i], za[j]) / tau;
      const double y = i == j ? 1.0 : -1.0;
      total += std::log(1.0 + std::exp(-y * s));
    }
  }
  return total / static_cast<double>(n * n);
}

std::vector<Tensor<double>> to_candidate_tensors(const std::vector<Rows>& cands) {
  std::vector<Tensor<double>> out;
  out.reserve(cands.size());
  for (const auto& c : cands) out.push_back(to_tensor(c));
  return out;
}

}  // namespace

TEST_CASE("nce_loss matches brute-force double loop on 100 random batches") {
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(9000 + static_cast<uint64_t>(trial));
    const int64_t n = 2 + rng.uniform_int(7);  // N <= 8
    const int64_t d = 3 + rng.uniform_int(14);
    const double taus[] = {0.07, 0.2, 1.0};
    const double tau = taus[trial % 3];
    const bool both = trial % 2 == 0;
    const Rows zv = random_unit_rows(n, d, rng);
    const Rows za = random_unit_rows(n, d, rng);
    const double got = nce_loss(to_tensor(zv), to_tensor(za), tau,
                                both ? NegativePolicy::kBothDirections
                                     : NegativePolicy::kVAnchored)
                           .item();
    const double want = brute_nce(zv, za, tau, both);
    CHECK(std::fabs(got - want) < 1e-6);
  }
}

TEST_CASE("mil_nce_loss matches brute-force double loop on 100 random batches") {
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(17000 + static_cast<uint64_t>(trial));
    const int64_t n = 2 + rng.uniform_int(7);
    const int64_t d = 3 + rng.uniform_int(14);
    const double taus[] = {0.07, 0.2, 1.0};
    const double tau = taus[trial % 3];
    const bool both = trial % 2 == 1;
    const Rows zv = random_unit_rows(n, d, rng);
    std::vector<Rows> cands;
    for (int64_t i = 0; i < n; ++i) {
      cands.push_back(random_unit_rows(1 + rng.uniform_int(4), d, rng));
    }
    const double got = mil_nce_loss(to_tensor(zv), to_candidate_tensors(cands), tau,
                                    both ? NegativePolicy::kBothDirections
                                         : NegativePolicy::kVAnchored)
                           .item();
    const double want = brute_mil_nce(zv, cands, tau, both);
    CHECK(std::fabs(got - want) < 1e-6);
  }
}

TEST_CASE("mil_nce_loss with singleton candidate bags equals nce_loss") {
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(23000 + static_cast<uint64_t>(trial));
    const int64_t n = 2 + rng.uniform_int(7);
    const int64_t d = 4 + rng.uniform_int(8);
    const double tau = trial % 2 == 0 ? 0.07 : 0.5;
    const NegativePolicy pol =
        trial % 3 == 0 ? NegativePolicy::kVAnchored : NegativePolicy::kBothDirections;
    const Rows zv = random_unit_rows(n, d, rng);
    const Rows za = random_unit_rows(n, d, rng);
    std::vector<Rows> singletons;
    for (int64_t i = 0; i < n; ++i) singletons.push_back({za[static_cast<size_t>(i)]});
    const double mil =
        mil_nce_loss(to_tensor(zv), to_candidate_tensors(singletons), tau, pol).item();
    const double nce = nce_loss(to_tensor(zv), to_tensor(za), tau, pol).item();
    CHECK(std::fabs(mil - nce) < 1e-6);
  }
}

TEST_CASE("uniform-score batch yields exactly log(1 + negative count)") {
  // All pairs share one score, so the softmax is uniform over 1 + |N(x)|
  // entries and the loss collapses to log(1 + |N(x)|).
  for (int64_t n : {2, 3, 5, 8}) {
    Rng rng(31000 + static_cast<uint64_t>(n));
    const int64_t d = 6;
    const Rows v = random_unit_rows(1, d, rng);
    const Rows a = random_unit_rows(1, d, rng);
    Rows zv(static_cast<size_t>(n), v[0]), za(static_cast<size_t>(n), a[0]);

    const double both =
        nce_loss(to_tensor(zv), to_tensor(za), 0.07, NegativePolicy::kBothDirections).item();
    CHECK(both == doctest::Approx(std::log(static_cast<double>(2 * n - 1))).epsilon(1e-12));

    const double vanch =
        nce_loss(to_tensor(zv), to_tensor(za), 0.07, NegativePolicy::kVAnchored).item();
    CHECK(vanch == doctest::Approx(std::log(static_cast<double>(n))).epsilon(1e-12));

    std::vector<Rows> singles(static_cast<size_t>(n), Rows{a[0]});
    const double mil = mil_nce_loss(to_tensor(zv), to_candidate_tensors(singles), 0.07,
                                    NegativePolicy::kBothDirections)
                           .item();
    CHECK(mil == doctest::Approx(std::log(static_cast<double>(2 * n - 1))).epsilon(1e-12));

    // With P candidates per bag the uniform value generalizes to
    // log((M + (n-1)P) / P), M = nP; the singleton case recovers the above.
    const int64_t P = 3;
    std::vector<Rows> bags(static_cast<size_t>(n), Rows(static_cast<size_t>(P), a[0]));
    const double milp = mil_nce_loss(to_tensor(zv), to_candidate_tensors(bags), 0.07,
                                     NegativePolicy::kBothDirections)
                            .item();
    const double want =
        std::log(static_cast<double>(n * P + (n - 1) * P) / static_cast<double>(P));
    CHECK(milp == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("logistic_grid_loss matches brute-force grid evaluation") {
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(39000 + static_cast<uint64_t>(trial));
    const int64_t n = 2 + rng.uniform_int(7);
    const int64_t d = 3 + rng.uniform_int(10);
    const double tau = trial % 2 == 0 ? 0.07 : 0.3;
    const Rows zv = random_unit_rows(n, d, rng);
    const Rows za = random_unit_rows(n, d, rng);
    const double got = logistic_grid_loss(to_tensor(zv), to_tensor(za), tau).item();
    const double want = brute_logistic_grid(zv, za, tau);
    CHECK(std::fabs(got - want) < 1e-6);
  }
}

TEST_CASE("logistic_pair_loss handles extreme scores without overflow") {
  Tensor<double> zv(Shape{2, 1});
  Tensor<double> za(Shape{2, 1});
  zv.mutable_data()[0] = 1.0;
  zv.mutable_data()[1] = -1.0;
  za.mutable_data()[0] = 1.0;
  za.mutable_data()[1] = 1.0;
  // Scores +-1000: softplus must come back finite and near its asymptotes.
  const double loss = logistic_pair_loss(zv, za, {1, 1}, 0.001).item();
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(500.0).epsilon(1e-9));  // (0 + 1000) / 2
}

namespace {

ContrastiveBatch<double> random_batch(int64_t n, int64_t d, Rng& rng, double p_text) {
  ContrastiveBatch<double> b;
  b.zv_va = to_tensor(random_unit_rows(n, d, rng));
  b.za_va = to_tensor(random_unit_rows(n, d, rng));
  b.zv_txt = to_tensor(random_unit_rows(n, d, rng));
  int64_t t_count = 0;
  for (int64_t i = 0; i < n; ++i) {
    b.has_v.push_back(1);
    b.has_a.push_back(1);
    const uint8_t h = rng.uniform() < p_text ? 1 : 0;
    b.has_t.push_back(h);
    t_count += h;
    if (h) {
      b.text_candidates.push_back(to_tensor(random_unit_rows(1 + rng.uniform_int(3), d, rng)));
    } else {
      b.text_candidates.emplace_back();
    }
  }
  if (t_count < 2) {
    b.has_t[0] = b.has_t[1] = 1;
    for (int64_t i = 0; i < 2; ++i) {
      if (b.text_candidates[static_cast<size_t>(i)].size() == 0) {
        b.text_candidates[static_cast<size_t>(i)] = to_tensor(random_unit_rows(2, d, rng));
      }
    }
  }
  return b;
}

ContrastiveBatch<double> append_textless(const ContrastiveBatch<double>& b, Rng& rng) {
  const int64_t d = b.zv_va.dim(1);
  ContrastiveBatch<double> out = b;
  out.zv_va = concat<double>({b.zv_va, to_tensor(random_unit_rows(1, d, rng))}, 0);
  out.za_va = concat<double>({b.za_va, to_tensor(random_unit_rows(1, d, rng))}, 0);
  out.zv_txt = concat<double>({b.zv_txt, to_tensor(random_unit_rows(1, d, rng))}, 0);
  out.has_v.push_back(1);
  out.has_a.push_back(1);
  out.has_t.push_back(0);
  out.text_candidates.emplace_back();
  return out;
}

}  // namespace

TEST_CASE("appending a text-missing sample leaves the vt component unchanged") {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(47000 + static_cast<uint64_t>(trial));
    ContrastiveBatch<double> b = random_batch(4 + rng.uniform_int(3), 8, rng, 0.7);
    LossConfig cfg;
    const CombinedLossResult<double> before = combined_loss(b, cfg);
    ContrastiveBatch<double> grown = append_textless(b, rng);
    const CombinedLossResult<double> after = combined_loss(grown, cfg);
    CHECK(std::fabs(after.vt.item() - before.vt.item()) < 1e-6);
    CHECK(after.vt_count == before.vt_count);
    // The appended sample does join the va pool.
    CHECK(after.va_count == before.va_count + 1);
  }
}

TEST_CASE("lambda scaling is exactly linear in loss and gradients") {
  for (int trial = 0; trial < 10; ++trial) {
    Rng rng(53000 + static_cast<uint64_t>(trial));
    const int64_t n = 4, d = 8;
    ContrastiveBatch<double> base = random_batch(n, d, rng, 0.8);

    LossConfig cfg;
    cfg.lambda_va = 0.7;
    cfg.lambda_vt = 1.3;
    LossConfig doubled = cfg;
    doubled.lambda_va *= 2.0;
    doubled.lambda_vt *= 2.0;

    auto eval_with = [&base](const LossConfig& c, std::vector<Tensor<double>>* grads) {
      ContrastiveBatch<double> b = base;
      b.zv_va = b.zv_va.clone().set_requires_grad(true);
      b.za_va = b.za_va.clone().set_requires_grad(true);
      b.zv_txt = b.zv_txt.clone().set_requires_grad(true);
      Tape<double> tape;
      TapeScope<double> scope(tape);
      const CombinedLossResult<double> res = combined_loss(b, c);
      backward(tape, res.total);
      grads->push_back(tape.grad(b.zv_va));
      grads->push_back(tape.grad(b.za_va));
      grads->push_back(tape.grad(b.zv_txt));
      return res.total.item();
    };

    std::vector<Tensor<double>> g1, g2;
    const double l1 = eval_with(cfg, &g1);
    const double l2 = eval_with(doubled, &g2);
    // Doubling both lambdas is an exact power-of-two scaling: bitwise equal.
    CHECK(l2 == 2.0 * l1);
    for (size_t k = 0; k < g1.size(); ++k) {
      for (int64_t i = 0; i < g1[k].size(); ++i) {
        CHECK(g2[k].at(i) == 2.0 * g1[k].at(i));
      }
    }

    // A non-dyadic factor still scales to rounding error.
    LossConfig tripled = cfg;
    tripled.lambda_va *= 3.0;
    tripled.lambda_vt *= 3.0;
    std::vector<Tensor<double>> g3;
    const double l3 = eval_with(tripled, &g3);
    CHECK(l3 == doctest::Approx(3.0 * l1).epsilon(1e-12));
    for (size_t k = 0; k < g3.size(); ++k) {
      for (int64_t i = 0; i < g3[k].size(); ++i) {
        CHECK(g3[k].at(i) == doctest::Approx(3.0 * g1[k].at(i)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("components with fewer than 2 usable samples contribute zero") {
  Rng rng(61000);
  ContrastiveBatch<double> b = random_batch(4, 8, rng, 1.0);
  // Knock text down to one sample: vt must drop out entirely.
  b.has_t = {1, 0, 0, 0};
  LossConfig cfg;
  const CombinedLossResult<double> res = combined_loss(b, cfg);
  CHECK(res.vt_count == 1);
  CHECK(res.vt.item() == 0.0);
  CHECK(res.total.item() == doctest::Approx(cfg.lambda_va * res.va.item()).epsilon(1e-12));

  // Zero lambda disables a component even when samples are available.
  ContrastiveBatch<double> full = random_batch(4, 8, rng, 1.0);
  LossConfig va_only;
  va_only.lambda_vt = 0.0;
  const CombinedLossResult<double> res2 = combined_loss(full, va_only);
  CHECK(res2.vt.item() == 0.0);
  CHECK(res2.total.item() == doctest::Approx(va_only.lambda_va * res2.va.item()).epsilon(1e-12));
}

TEST_CASE("combined_loss with the logistic baseline swaps only the va term") {
  Rng rng(67000);
  ContrastiveBatch<double> b = random_batch(5, 8, rng, 0.8);
  LossConfig cfg;
  cfg.loss_kind = LossKind::kLogistic;
  const CombinedLossResult<double> res = combined_loss(b, cfg);
  // va equals the standalone grid loss over the present rows (all rows here).
  const double grid = logistic_grid_loss(b.zv_va, b.za_va, cfg.tau).item();
  CHECK(res.va.item() == doctest::Approx(grid).epsilon(1e-12));
  // vt stays MIL-NCE regardless of kind.
  LossConfig nce_cfg;
  const CombinedLossResult<double> ref = combined_loss(b, nce_cfg);
  CHECK(res.vt.item() == doctest::Approx(ref.vt.item()).epsilon(1e-12));
}

TEST_CASE("loss input validation rejects degenerate shapes") {
  Tensor<double> one(Shape{1, 4});
  CHECK_THROWS_AS(nce_loss(one, one, 0.07, NegativePolicy::kBothDirections), ShapeError);
  Tensor<double> two(Shape{2, 4});
  CHECK_THROWS_AS(nce_loss(two, two, 0.0, NegativePolicy::kBothDirections), Error);
  CHECK_THROWS_AS(nce_loss(two, Tensor<double>(Shape{2, 5}), 0.07,
                           NegativePolicy::kBothDirections),
                  ShapeError);

  ContrastiveBatch<double> b;
  b.zv_va = two;
  b.za_va = two;
  b.zv_txt = two;
  b.has_v = {1, 1};
  b.has_a = {1, 1};
  b.has_t = {1, 0};
  b.text_candidates.resize(2);  // text marked present but bag empty
  CHECK_THROWS_AS(b.validate(), ShapeError);

  LossConfig bad;
  bad.lambda_va = 0.0;
  bad.lambda_vt = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("policy and kind names round-trip through their parsers") {
  CHECK(parse_negative_policy(negative_policy_name(NegativePolicy::kVAnchored)) ==
        NegativePolicy::kVAnchored);
  CHECK(parse_negative_policy(negative_policy_name(NegativePolicy::kBothDirections)) ==
        NegativePolicy::kBothDirections);
  CHECK(parse_loss_kind(loss_kind_name(LossKind::kNce)) == LossKind::kNce);
  CHECK(parse_loss_kind(loss_kind_name(LossKind::kLogistic)) == LossKind::kLogistic);
  CHECK_THROWS_AS(parse_loss_kind("mil"), ConfigError);
  CHECK_THROWS_AS(parse_negative_policy("nope"), ConfigError);
}
