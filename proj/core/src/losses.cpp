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

#include "mmvc/losses.hpp"

#include "mmvc/ops.hpp"

namespace mmvc {

namespace {

// Large negative fill that drops a slot out of any log-sum-exp while staying
// finite in both float and double.
constexpr double kMaskedOut = -1e30;

template <class T>
Tensor<T> diag_mask(int64_t n) {
  Tensor<T> m(Shape{n, n});
  T* p = m.mutable_data();
  for (int64_t i = 0; i < n; ++i) p[i * n + i] = static_cast<T>(kMaskedOut);
  return m;
}

void check_pair_inputs(const Shape& a, const Shape& b, double tau, const char* op) {
  check_shape(a.size() == 2 && b.size() == 2 && a == b,
              std::string(op) + ": embeddings must be matching [N,d] tensors, got " +
                  shape_str(a) + " and " + shape_str(b));
  check_shape(a[0] >= 2, std::string(op) + ": need N >= 2 for negatives, got N = " +
                             std::to_string(a[0]));
  check(tau > 0.0, std::string(op) + ": tau must be > 0");
}

}  // namespace

const char* negative_policy_name(NegativePolicy p) {
  return p == NegativePolicy::kBothDirections ? "both-directions" : "v-anchored";
}

const char* loss_kind_name(LossKind k) { return k == LossKind::kNce ? "nce" : "logistic"; }

NegativePolicy parse_negative_policy(const std::string& s) {
  if (s == "both-directions") return NegativePolicy::kBothDirections;
  if (s == "v-anchored") return NegativePolicy::kVAnchored;
  throw ConfigError("unknown negative policy '" + s +
                    "' (expected both-directions|v-anchored)");
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "nce") return LossKind::kNce;
  if (s == "logistic") return LossKind::kLogistic;
  throw ConfigError("unknown loss kind '" + s + "' (expected nce|logistic)");
}

void LossConfig::validate() const {
  check(lambda_va >= 0.0 && lambda_vt >= 0.0, "LossConfig: lambdas must be non-negative");
  check(lambda_va + lambda_vt > 0.0, "LossConfig: at least one lambda must be positive");
  check(tau > 0.0, "LossConfig: tau must be > 0");
}

template <class T>
void ContrastiveBatch<T>::validate() const {
  const int64_t n = size();
  check_shape(n >= 2, "batch: need N >= 2 samples, got " + std::to_string(n));
  check_shape(static_cast<int64_t>(has_a.size()) == n &&
                  static_cast<int64_t>(has_t.size()) == n &&
                  static_cast<int64_t>(text_candidates.size()) == n,
              "batch: per-sample lists must all have length N");
  for (int64_t i = 0; i < n; ++i) {
    if (has_t[static_cast<size_t>(i)]) {
      check_shape(text_candidates[static_cast<size_t>(i)].size() > 0,
                  "batch: sample " + std::to_string(i) +
                      " is marked text-present but has no candidates");
    }
  }
}

template <class T>
Tensor<T> nce_loss_per_sample(const Tensor<T>& zv, const Tensor<T>& za, double tau,
                              NegativePolicy policy) {
  check_pair_inputs(zv.shape(), za.shape(), tau, "nce_loss");
  const int64_t n = zv.dim(0);
  Tensor<T> scores = mul_scalar(matmul(zv, transpose(za)), 1.0 / tau);  // [N,N]
  Tensor<T> pos = take_diag(scores);
  Tensor<T> denom;
  if (policy == NegativePolicy::kBothDirections) {
    // Row i carries (i,i) and (i,j); the transposed rows add (j,i) with the
    // diagonal masked so the positive is counted once.
    Tensor<T> cols = add(transpose(scores), diag_mask<T>(n));
    denom = lse_axis(concat<T>({scores, cols}, 1), 1);
  } else {
    denom = lse_axis(scores, 1);
  }
  return sub(denom, pos);
}

template <class T>
Tensor<T> nce_loss(const Tensor<T>& zv, const Tensor<T>& za, double tau, NegativePolicy policy) {
  return mean_all(nce_loss_per_sample(zv, za, tau, policy));
}

template <class T>
Tensor<T> mil_nce_loss_per_sample(const Tensor<T>& zv, const std::vector<Tensor<T>>& candidates,
                                  double tau, NegativePolicy policy) {
  check_shape(zv.rank() == 2, "mil_nce_loss: zv must be [N,d], got " + shape_str(zv.shape()));
  const int64_t n = zv.dim(0);
  const int64_t d = zv.dim(1);
  check_shape(n >= 2, "mil_nce_loss: need N >= 2 for negatives, got N = " + std::to_string(n));
  check_shape(static_cast<int64_t>(candidates.size()) == n,
              "mil_nce_loss: need one candidate set per sample");
  check(tau > 0.0, "mil_nce_loss: tau must be > 0");

  std::vector<int64_t> starts(static_cast<size_t>(n)), counts(static_cast<size_t>(n));
  int64_t m = 0;
  for (int64_t i = 0; i < n; ++i) {
    const Tensor<T>& c = candidates[static_cast<size_t>(i)];
    check_shape(c.rank() == 2 && c.dim(1) == d && c.dim(0) >= 1,
                "mil_nce_loss: candidate set " + std::to_string(i) +
                    " must be non-empty [P,d], got " + shape_str(c.shape()));
    starts[static_cast<size_t>(i)] = m;
    counts[static_cast<size_t>(i)] = c.dim(0);
    m += c.dim(0);
  }
  Tensor<T> all_cands = concat(candidates, 0);                              // [M,d]
  Tensor<T> scores = mul_scalar(matmul(zv, transpose(all_cands)), 1.0 / tau);  // [N,M]

  // Numerator: log-sum-exp over sample i's own candidate block.
  Tensor<T> num_mask(Shape{n, m});
  T* nm = num_mask.mutable_data();
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t c = 0; c < m; ++c) {
      const bool own = c >= starts[static_cast<size_t>(i)] &&
                       c < starts[static_cast<size_t>(i)] + counts[static_cast<size_t>(i)];
      nm[i * m + c] = own ? T(0) : static_cast<T>(kMaskedOut);
    }
  }
  Tensor<T> numerator = lse_axis(add(scores, num_mask), 1);

  Tensor<T> denom;
  if (policy == NegativePolicy::kBothDirections) {
    // Reverse-direction negatives: candidates of sample i scored against the
    // other videos. Entry (i,j) aggregates sample i's candidate block in row
    // j; log-sum-exp of disjoint groups composes, so a per-block LSE matrix
    // concatenated onto the full score rows covers the whole negative set.
    Tensor<T> tscores = transpose(scores);  // [M,N]
    std::vector<Tensor<T>> rows;
    rows.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      Tensor<T> block = slice(tscores, 0, starts[static_cast<size_t>(i)],
                              counts[static_cast<size_t>(i)]);  // [P_i, N]
      rows.push_back(reshape(lse_axis(block, 0), Shape{1, n}));
    }
    Tensor<T> rev = add(concat(rows, 0), diag_mask<T>(n));  // [N,N], own column masked
    denom = lse_axis(concat<T>({scores, rev}, 1), 1);
  } else {
    denom = lse_axis(scores, 1);
  }
  return sub(denom, numerator);
}

template <class T>
Tensor<T> mil_nce_loss(const Tensor<T>& zv, const std::vector<Tensor<T>>& candidates, double tau,
                       NegativePolicy policy) {
  return mean_all(mil_nce_loss_per_sample(zv, candidates, tau, policy));
}

template <class T>
CombinedLossResult<T> combined_loss(const ContrastiveBatch<T>& batch, const LossConfig& cfg) {
  cfg.validate();
  batch.validate();
  const int64_t n = batch.size();

  std::vector<int64_t> va_idx, vt_idx;
  for (int64_t i = 0; i < n; ++i) {
    if (batch.has_v[static_cast<size_t>(i)] && batch.has_a[static_cast<size_t>(i)]) {
      va_idx.push_back(i);
    }
    if (batch.has_v[static_cast<size_t>(i)] && batch.has_t[static_cast<size_t>(i)]) {
      vt_idx.push_back(i);
    }
  }

  CombinedLossResult<T> out;
  out.va = Tensor<T>::scalar(T(0));
  out.vt = Tensor<T>::scalar(T(0));
  out.va_count = static_cast<int64_t>(va_idx.size());
  out.vt_count = static_cast<int64_t>(vt_idx.size());

  if (cfg.lambda_va > 0.0 && out.va_count >= 2) {
    if (cfg.loss_kind == LossKind::kLogistic) {
      out.va = logistic_grid_loss(gather_rows(batch.zv_va, va_idx),
                                  gather_rows(batch.za_va, va_idx), cfg.tau);
    } else {
      out.va = nce_loss(gather_rows(batch.zv_va, va_idx), gather_rows(batch.za_va, va_idx),
                        cfg.tau, cfg.policy);
    }
  }
  if (cfg.lambda_vt > 0.0 && out.vt_count >= 2) {
    std::vector<Tensor<T>> cands;
    cands.reserve(vt_idx.size());
    for (int64_t i : vt_idx) cands.push_back(batch.text_candidates[static_cast<size_t>(i)]);
    out.vt = mil_nce_loss(gather_rows(batch.zv_txt, vt_idx), cands, cfg.tau, cfg.policy);
  }

  Tensor<T> total = Tensor<T>::scalar(T(0));
  const bool use_va = cfg.lambda_va > 0.0 && out.va_count >= 2;
  const bool use_vt = cfg.lambda_vt > 0.0 && out.vt_count >= 2;
  if (use_va && use_vt) {
    total = add(mul_scalar(out.va, cfg.lambda_va), mul_scalar(out.vt, cfg.lambda_vt));
  } else if (use_va) {
    total = mul_scalar(out.va, cfg.lambda_va);
  } else if (use_vt) {
    total = mul_scalar(out.vt, cfg.lambda_vt);
  }
  out.total = total;
  return out;
}

template <class T>
Tensor<T> logistic_pair_loss(const Tensor<T>& zv, const Tensor<T>& za,
                             const std::vector<uint8_t>& positive, double tau) {
  check_shape(zv.rank() == 2 && zv.shape() == za.shape(),
              "logistic_pair_loss: embeddings must be matching [P,d] tensors");
  const int64_t p = zv.dim(0);
  check_shape(p >= 1, "logistic_pair_loss: empty pair list");
  check_shape(static_cast<int64_t>(positive.size()) == p,
              "logistic_pair_loss: need one label per pair");
  check(tau > 0.0, "logistic_pair_loss: tau must be > 0");
  Tensor<T> s = mul_scalar(sum_axes(mul(zv, za), {1}), 1.0 / tau);  // [P]
  Tensor<T> sign(Shape{p});
  T* sp = sign.mutable_data();
  for (int64_t i = 0; i < p; ++i) sp[i] = positive[static_cast<size_t>(i)] ? T(1) : T(-1);
  // BCE on sigmoid(s) with +-1 targets is softplus(-y*s); the max/log1p
  // split keeps it stable for large scores.
  Tensor<T> ys = neg(mul(s, sign));
  Tensor<T> softplus = add(relu(ys), log(add_scalar(exp(neg(abs(ys))), 1.0)));
  return mean_all(softplus);
}

template <class T>
Tensor<T> logistic_grid_loss(const Tensor<T>& zv, const Tensor<T>& za, double tau) {
  check_pair_inputs(zv.shape(), za.shape(), tau, "logistic_grid_loss");
  const int64_t n = zv.dim(0);
  std::vector<int64_t> rows_v, rows_a;
  std::vector<uint8_t> labels;
  rows_v.reserve(static_cast<size_t>(n * n));
  rows_a.reserve(static_cast<size_t>(n * n));
  labels.reserve(static_cast<size_t>(n * n));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      rows_v.push_back(i);
      rows_a.push_back(j);
      labels.push_back(i == j ? 1 : 0);
    }
  }
  return logistic_pair_loss(gather_rows(zv, rows_v), gather_rows(za, rows_a), labels, tau);
}

#define MMVC_INSTANTIATE_LOSSES(T)                                                          \
  template struct ContrastiveBatch<T>;                                                      \
  template Tensor<T> nce_loss_per_sample<T>(const Tensor<T>&, const Tensor<T>&, double,     \
                                            NegativePolicy);                                \
  template Tensor<T> nce_loss<T>(const Tensor<T>&, const Tensor<T>&, double,                \
                                 NegativePolicy);                                           \
  template Tensor<T> mil_nce_loss_per_sample<T>(const Tensor<T>&,                           \
                                                const std::vector<Tensor<T>>&, double,      \
                                                NegativePolicy);                            \
  template Tensor<T> mil_nce_loss<T>(const Tensor<T>&, const std::vector<Tensor<T>>&,       \
                                     double, NegativePolicy);                               \
  template CombinedLossResult<T> combined_loss<T>(const ContrastiveBatch<T>&,               \
                                                  const LossConfig&);                       \
  template Tensor<T> logistic_pair_loss<T>(const Tensor<T>&, const Tensor<T>&,              \
                                           const std::vector<uint8_t>&, double);            \
  template Tensor<T> logistic_grid_loss<T>(const Tensor<T>&, const Tensor<T>&, double);

MMVC_INSTANTIATE_LOSSES(float)
MMVC_INSTANTIATE_LOSSES(double)

#undef MMVC_INSTANTIATE_LOSSES

}  // namespace mmvc
