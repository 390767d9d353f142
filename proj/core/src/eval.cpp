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

#include "mmvc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mmvc/adam.hpp"
#include "mmvc/ops.hpp"
#include "mmvc/tape.hpp"

namespace mmvc {

void ProbeConfig::validate() const {
  if (l2_sweep.empty()) throw ConfigError("ProbeConfig: l2_sweep must be non-empty");
  for (double l2 : l2_sweep) {
    if (l2 < 0.0) throw ConfigError("ProbeConfig: negative L2 strength");
  }
  if (epochs < 1) throw ConfigError("ProbeConfig: epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("ProbeConfig: lr must be positive");
}

template <class T>
void ProbeData<T>::validate(int64_t num_classes) const {
  check(num_classes >= 2, "probe: need at least 2 classes");
  auto check_split = [&](const Tensor<T>& x, const std::vector<int64_t>& y, const char* name) {
    check_shape(x.rank() == 2, std::string("probe: ") + name + " features must be [N,d]");
    check_shape(x.dim(0) == static_cast<int64_t>(y.size()),
                std::string("probe: ") + name + " feature/label count mismatch");
    for (int64_t label : y) {
      check(label >= 0 && label < num_classes, std::string("probe: ") + name + " label out of range");
    }
  };
  check_split(x_train, y_train, "train");
  check_split(x_val, y_val, "val");
  check_split(x_test, y_test, "test");
  check_shape(x_train.dim(1) == x_val.dim(1) && x_train.dim(1) == x_test.dim(1),
              "probe: feature dims differ across splits");
  std::vector<uint8_t> seen(static_cast<size_t>(num_classes), 0);
  for (int64_t label : y_train) seen[static_cast<size_t>(label)] = 1;
  for (int64_t c = 0; c < num_classes; ++c) {
    check(seen[static_cast<size_t>(c)] != 0,
          "probe: degenerate split, class " + std::to_string(c) + " absent from train");
  }
}

namespace {

// Train-split standardization applied to every split.
template <class T>
void standardize(const Tensor<T>& train, std::vector<double>* mean, std::vector<double>* inv_std) {
  const int64_t n = train.dim(0), d = train.dim(1);
  mean->assign(static_cast<size_t>(d), 0.0);
  inv_std->assign(static_cast<size_t>(d), 1.0);
  const T* p = train.ptr();
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < d; ++j) (*mean)[static_cast<size_t>(j)] += static_cast<double>(p[i * d + j]);
  }
  for (int64_t j = 0; j < d; ++j) (*mean)[static_cast<size_t>(j)] /= static_cast<double>(n);
  std::vector<double> var(static_cast<size_t>(d), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < d; ++j) {
      const double c = static_cast<double>(p[i * d + j]) - (*mean)[static_cast<size_t>(j)];
      var[static_cast<size_t>(j)] += c * c;
    }
  }
  for (int64_t j = 0; j < d; ++j) {
    const double s = std::sqrt(var[static_cast<size_t>(j)] / static_cast<double>(n));
    (*inv_std)[static_cast<size_t>(j)] = s > 1e-8 ? 1.0 / s : 1.0;
  }
}

template <class T>
Tensor<T> apply_standardize(const Tensor<T>& x, const std::vector<double>& mean,
                            const std::vector<double>& inv_std) {
  Tensor<T> out(x.shape());
  const int64_t n = x.dim(0), d = x.dim(1);
  const T* p = x.ptr();
  T* o = out.mutable_data();
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < d; ++j) {
      o[i * d + j] = static_cast<T>((static_cast<double>(p[i * d + j]) -
                                     mean[static_cast<size_t>(j)]) *
                                    inv_std[static_cast<size_t>(j)]);
    }
  }
  return out;
}

// Top-1 accuracy of logits = x w + b; ties resolve to the lowest class.
template <class T>
double accuracy_of(const Tensor<T>& x, const std::vector<int64_t>& y, const Tensor<T>& w,
                   const Tensor<T>& b) {
  if (y.empty()) return 0.0;
  const int64_t n = x.dim(0), d = x.dim(1), c = w.dim(1);
  const T* xp = x.ptr();
  const T* wp = w.ptr();
  const T* bp = b.ptr();
  int64_t hits = 0;
  for (int64_t i = 0; i < n; ++i) {
    int64_t best = 0;
    double best_v = -1e300;
    for (int64_t k = 0; k < c; ++k) {
      double v = static_cast<double>(bp[k]);
      for (int64_t j = 0; j < d; ++j) {
        v += static_cast<double>(xp[i * d + j]) * static_cast<double>(wp[j * c + k]);
      }
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    if (best == y[static_cast<size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

template <class T>
ProbeResult linear_probe(const ProbeData<T>& data, int64_t num_classes, const ProbeConfig& cfg) {
  cfg.validate();
  data.validate(num_classes);
  const int64_t d = data.x_train.dim(1);

  std::vector<double> mean, inv_std;
  standardize(data.x_train, &mean, &inv_std);
  Tensor<T> xtr = apply_standardize(data.x_train, mean, inv_std);
  Tensor<T> xva = apply_standardize(data.x_val, mean, inv_std);
  Tensor<T> xte = apply_standardize(data.x_test, mean, inv_std);

  ProbeResult res;
  std::vector<Tensor<T>> trained_w, trained_b;
  for (double l2 : cfg.l2_sweep) {
    Tensor<T> w = Tensor<T>::zeros(Shape{d, num_classes});
    Tensor<T> b = Tensor<T>::zeros(Shape{num_classes});
    w.set_requires_grad(true);
    b.set_requires_grad(true);
    ParamMap<T> pm;
    pm.add("probe.weight", &w);
    pm.add("probe.bias", &b);
    Adam<T> adam(pm);
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      Tape<T> tape;
      {
        TapeScope<T> scope(tape);
        Tensor<T> logits = add(matmul(xtr, w), b);
        Tensor<T> ce = mean_all(sub(lse_axis(logits, 1), gather_elems(logits, data.y_train)));
        Tensor<T> loss = add(ce, mul_scalar(sum_all(mul(w, w)), static_cast<T>(l2)));
        tape.backward(loss);
      }
      adam.step(pm, tape, cfg.lr);
    }
    res.val_accuracies.push_back(accuracy_of(xva, data.y_val, w, b));
    trained_w.push_back(w);
    trained_b.push_back(b);
  }

  size_t best = 0;
  for (size_t i = 1; i < res.val_accuracies.size(); ++i) {
    if (res.val_accuracies[i] > res.val_accuracies[best]) best = i;
  }
  res.best_l2 = cfg.l2_sweep[best];
  res.accuracy = accuracy_of(xte, data.y_test, trained_w[best], trained_b[best]);
  return res;
}

double RetrievalResult::recall(int64_t k) const {
  for (const auto& [kk, v] : recall_at) {
    if (kk == k) return v;
  }
  throw Error("RetrievalResult: recall@" + std::to_string(k) + " was not computed");
}

template <class T>
RetrievalResult zero_shot_retrieval(const Tensor<T>& queries, const Tensor<T>& corpus,
                                    const std::vector<int64_t>& ground_truth,
                                    const std::vector<int64_t>& ks) {
  check_shape(corpus.rank() == 2 && corpus.dim(0) >= 1, "retrieval: empty corpus");
  check_shape(queries.rank() == 2 && queries.dim(1) == corpus.dim(1),
              "retrieval: query dim " + shape_str(queries.shape()) + " vs corpus " +
                  shape_str(corpus.shape()));
  const int64_t q = queries.dim(0), m = corpus.dim(0), d = corpus.dim(1);
  check(static_cast<int64_t>(ground_truth.size()) == q,
        "retrieval: one ground-truth index per query required");
  check(q >= 1, "retrieval: no queries");
  for (int64_t g : ground_truth) check(g >= 0 && g < m, "retrieval: ground truth out of range");
  for (int64_t k : ks) check(k >= 1, "retrieval: K must be >= 1");

  const T* qp = queries.ptr();
  const T* cp = corpus.ptr();
  std::vector<int64_t> ranks(static_cast<size_t>(q));
  std::vector<double> scores(static_cast<size_t>(m));
  for (int64_t i = 0; i < q; ++i) {
    for (int64_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < d; ++k) {
        s += static_cast<double>(qp[i * d + k]) * static_cast<double>(cp[j * d + k]);
      }
      scores[static_cast<size_t>(j)] = s;
    }
    const int64_t gt = ground_truth[static_cast<size_t>(i)];
    const double sg = scores[static_cast<size_t>(gt)];
    int64_t ahead = 0;
    for (int64_t j = 0; j < m; ++j) {
      const double s = scores[static_cast<size_t>(j)];
      if (s > sg || (s == sg && j < gt)) ++ahead;
    }
    ranks[static_cast<size_t>(i)] = 1 + ahead;
  }

  RetrievalResult res;
  for (int64_t k : ks) {
    int64_t hits = 0;
    for (int64_t r : ranks) {
      if (r <= k) ++hits;
    }
    res.recall_at.emplace_back(k, static_cast<double>(hits) / static_cast<double>(q));
  }
  std::vector<int64_t> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  res.median_rank = n % 2 == 1 ? static_cast<double>(sorted[n / 2])
                               : 0.5 * static_cast<double>(sorted[n / 2 - 1] + sorted[n / 2]);
  return res;
}

template <class T>
RetrievalResult zero_shot_retrieval(const Tensor<T>& queries, SpaceId query_space,
                                    const Tensor<T>& corpus, SpaceId corpus_space,
                                    const std::vector<int64_t>& ground_truth,
                                    const std::vector<int64_t>& ks) {
  if (query_space != corpus_space) {
    throw TopologyError(std::string("retrieval: queries live in ") + space_name(query_space) +
                        " but the corpus lives in " + space_name(corpus_space));
  }
  return zero_shot_retrieval(queries, corpus, ground_truth, ks);
}

template <class T>
Tensor<T> clip_averaged_embedding(const Tensor<T>& frames, int64_t clip_len, int64_t n_clips,
                                  Encoders<T>& enc) {
  check_shape(frames.rank() == 4 && frames.dim(3) == 3,
              "clip_averaged_embedding: expected [T,H,W,3], got " + shape_str(frames.shape()));
  check(clip_len >= 1 && n_clips >= 1, "clip_averaged_embedding: nonpositive window spec");
  const int64_t total = frames.dim(0);
  if (total < clip_len) {
    throw Error("clip_averaged_embedding: sample of " + std::to_string(total) +
                " frames is shorter than one " + std::to_string(clip_len) + "-frame clip");
  }
  const int64_t span = total - clip_len;
  Tensor<T> windows(Shape{n_clips, clip_len, frames.dim(1), frames.dim(2), 3});
  const int64_t frame_sz = frames.dim(1) * frames.dim(2) * 3;
  const T* src = frames.ptr();
  T* dst = windows.mutable_data();
  for (int64_t i = 0; i < n_clips; ++i) {
    const int64_t start =
        n_clips == 1 ? span / 2
                     : static_cast<int64_t>(std::llround(static_cast<double>(i) *
                                                         static_cast<double>(span) /
                                                         static_cast<double>(n_clips - 1)));
    std::memcpy(dst + i * clip_len * frame_sz, src + start * frame_sz,
                static_cast<size_t>(clip_len * frame_sz) * sizeof(T));
  }
  Tensor<T> emb = enc.encode_video_batch(windows, /*train=*/false);
  return mean_axes(emb, {0});
}

template <class T>
Tensor<T> center_crop_clip(const Tensor<T>& frames, int64_t size) {
  check_shape(frames.rank() == 4 && frames.dim(3) == 3,
              "center_crop_clip: expected [T,H,W,3], got " + shape_str(frames.shape()));
  const int64_t ft = frames.dim(0), h = frames.dim(1), w = frames.dim(2);
  check_shape(size >= 1 && size <= h && size <= w, "center_crop_clip: crop exceeds the frame");
  const int64_t oy = (h - size) / 2, ox = (w - size) / 2;
  Tensor<T> out(Shape{ft, size, size, 3});
  const T* src = frames.ptr();
  T* dst = out.mutable_data();
  for (int64_t t = 0; t < ft; ++t) {
    for (int64_t y = 0; y < size; ++y) {
      std::memcpy(dst, src + ((t * h + oy + y) * w + ox) * 3,
                  static_cast<size_t>(size) * 3 * sizeof(T));
      dst += size * 3;
    }
  }
  return out;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<std::string, double>>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << "metric,value\n";
  for (const auto& [name, value] : rows) {
    std::ostringstream line;
    line.precision(17);
    line << name << ',' << value << '\n';
    os << line.str();
  }
  if (!os) throw IoError("write failed for '" + path + "'");
}

#define MMVC_INSTANTIATE_EVAL(T)                                                              \
  template struct ProbeData<T>;                                                               \
  template ProbeResult linear_probe<T>(const ProbeData<T>&, int64_t, const ProbeConfig&);     \
  template RetrievalResult zero_shot_retrieval<T>(const Tensor<T>&, const Tensor<T>&,         \
                                                  const std::vector<int64_t>&,                \
                                                  const std::vector<int64_t>&);               \
  template RetrievalResult zero_shot_retrieval<T>(const Tensor<T>&, SpaceId, const Tensor<T>&, \
                                                  SpaceId, const std::vector<int64_t>&,       \
                                                  const std::vector<int64_t>&);               \
  template Tensor<T> clip_averaged_embedding<T>(const Tensor<T>&, int64_t, int64_t,           \
                                                Encoders<T>&);                                \
  template Tensor<T> center_crop_clip<T>(const Tensor<T>&, int64_t)

MMVC_INSTANTIATE_EVAL(float);
MMVC_INSTANTIATE_EVAL(double);

}  // namespace mmvc
