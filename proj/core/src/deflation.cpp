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

#include "mmvc/deflation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

#include "mmvc/adam.hpp"
#include "mmvc/ops.hpp"
#include "mmvc/rng.hpp"
#include "mmvc/tape.hpp"

namespace mmvc {

const char* deflation_method_name(DeflationMethod m) {
  return m == DeflationMethod::kNaive ? "naive" : "recalibrated";
}

DeflationMethod parse_deflation_method(const std::string& s) {
  if (s == "naive") return DeflationMethod::kNaive;
  if (s == "recalibrated") return DeflationMethod::kRecalibrated;
  throw ConfigError("unknown deflation method '" + s + "' (expected naive|recalibrated)");
}

template <class T>
Tensor<T> deflate_filters(const Tensor<T>& f) {
  check_shape(f.rank() == 5,
              "deflate_filters: expected [Kt,Kh,Kw,Ci,Co], got " + shape_str(f.shape()));
  const int64_t kt = f.dim(0);
  const int64_t slice = f.size() / kt;
  Tensor<T> out = Tensor<T>::zeros(Shape{f.dim(1), f.dim(2), f.dim(3), f.dim(4)});
  const T* src = f.ptr();
  T* dst = out.mutable_data();
  for (int64_t t = 0; t < kt; ++t) {
    const T* s = src + t * slice;
    for (int64_t i = 0; i < slice; ++i) dst[i] += s[i];
  }
  return out;
}

template <class T>
Tensor<T> tile_static_video(const Tensor<T>& images, int64_t t) {
  check_shape(images.rank() == 4 && images.dim(3) == 3,
              "tile_static_video: expected [M,H,W,3], got " + shape_str(images.shape()));
  check(t >= 1, "tile_static_video: frame count must be >= 1");
  const int64_t m = images.dim(0);
  const int64_t frame = images.size() / std::max<int64_t>(m, 1);
  Tensor<T> out(Shape{m, t, images.dim(1), images.dim(2), 3});
  const T* src = images.ptr();
  T* dst = out.mutable_data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t k = 0; k < t; ++k) {
      std::memcpy(dst + (i * t + k) * frame, src + i * frame,
                  static_cast<size_t>(frame) * sizeof(T));
    }
  }
  return out;
}

namespace {

template <class T>
Conv2dLayer<T> frozen_conv_copy(const Conv2dLayer<T>& l) {
  Conv2dLayer<T> out;
  out.weights = l.weights.clone();
  out.bias = l.bias.clone();
  out.stride = l.stride;
  out.pad = l.pad;
  return out;
}

// Gamma/beta keep gradients; everything else is a frozen deep copy.
template <class T>
BatchNorm<T> recalibratable_bn_copy(const BatchNorm<T>& b) {
  BatchNorm<T> out;
  out.gamma = b.gamma.clone();
  out.gamma.set_requires_grad(true);
  out.beta = b.beta.clone();
  out.beta.set_requires_grad(true);
  out.moving_mean = b.moving_mean.clone();
  out.moving_var = b.moving_var.clone();
  out.decay = b.decay;
  out.epsilon = b.epsilon;
  return out;
}

template <class T>
ShiftBlock<T> frozen_block_copy(const ShiftBlock<T>& b) {
  ShiftBlock<T> out;
  out.conv1 = frozen_conv_copy(b.conv1);
  out.conv2 = frozen_conv_copy(b.conv2);
  if (b.has_proj) out.proj = frozen_conv_copy(b.proj);
  out.has_proj = b.has_proj;
  out.bn1 = recalibratable_bn_copy(b.bn1);
  out.bn2 = recalibratable_bn_copy(b.bn2);
  out.shift_fraction = b.shift_fraction;
  return out;
}

template <class T>
void register_frozen_conv(ParamMap<T>& pm, const std::string& prefix, Conv2dLayer<T>& l) {
  pm.add(prefix + ".weights", &l.weights, /*trainable=*/false);
  pm.add(prefix + ".bias", &l.bias, /*trainable=*/false);
}

// Rows [lo, hi) of idx gathered from the leading axis, as raw copies.
template <class T>
Tensor<T> take_rows(const Tensor<T>& src, const std::vector<int64_t>& idx, size_t lo, size_t hi) {
  const int64_t row = src.size() / src.dim(0);
  Shape shape = src.shape();
  shape[0] = static_cast<int64_t>(hi - lo);
  Tensor<T> out(shape);
  T* dst = out.mutable_data();
  const T* s = src.ptr();
  for (size_t i = lo; i < hi; ++i) {
    std::memcpy(dst + static_cast<int64_t>(i - lo) * row, s + idx[i] * row,
                static_cast<size_t>(row) * sizeof(T));
  }
  return out;
}

// Source video-net outputs on static videos built from each image, in
// batches, eval mode, off tape.
template <class T>
Tensor<T> source_targets(Encoders<T>& src, const Tensor<T>& images, int64_t frames,
                         int64_t batch_size) {
  const int64_t m = images.dim(0);
  std::vector<int64_t> all(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) all[static_cast<size_t>(i)] = i;
  Tensor<T> targets;
  bool first = true;
  std::vector<T> rows;
  int64_t d = 0;
  for (int64_t s = 0; s < m; s += batch_size) {
    const int64_t e = std::min(m, s + batch_size);
    Tensor<T> imgs = take_rows(images, all, static_cast<size_t>(s), static_cast<size_t>(e));
    Tensor<T> vids = tile_static_video(imgs, frames);
    Tensor<T> out = src.cfg.video_arch == VideoArch::kConv3dMini
                        ? src.conv3d_mini.forward(vids, /*train=*/false)
                        : src.shift_mini.forward(vids, /*train=*/false, /*shift_enabled=*/true);
    if (first) {
      d = out.dim(1);
      rows.reserve(static_cast<size_t>(m * d));
      first = false;
    }
    rows.insert(rows.end(), out.values().begin(), out.values().end());
  }
  return Tensor<T>(Shape{m, d}, std::move(rows));
}

// Mean |deflated - target| per element over the given index set.
template <class T>
double eval_l1(DeflatedEncoder<T>& enc, const Tensor<T>& images, const Tensor<T>& targets,
               const std::vector<int64_t>& idx, int64_t batch_size) {
  double acc = 0.0;
  int64_t count = 0;
  for (size_t s = 0; s < idx.size(); s += static_cast<size_t>(batch_size)) {
    const size_t e = std::min(idx.size(), s + static_cast<size_t>(batch_size));
    Tensor<T> xb = take_rows(images, idx, s, e);
    Tensor<T> yb = take_rows(targets, idx, s, e);
    Tensor<T> out = enc.forward(xb, /*train=*/false);
    const T* o = out.ptr();
    const T* y = yb.ptr();
    for (int64_t i = 0; i < out.size(); ++i) {
      acc += std::abs(static_cast<double>(o[i]) - static_cast<double>(y[i]));
    }
    count += out.size();
  }
  return count > 0 ? acc / static_cast<double>(count) : 0.0;
}

}  // namespace

template <class T>
Tensor<T> DeflatedEncoder<T>::forward(const Tensor<T>& x, bool train) {
  check_shape(x.rank() == 4 && x.dim(3) == 3,
              "deflated: input must be [N,H,W,3], got " + shape_str(x.shape()));
  if (arch == VideoArch::kConv3dMini) {
    Tensor<T> h = x;
    for (size_t b = 0; b < convs.size(); ++b) {
      h = convs[b].forward(h);
      if (use_bn) h = bns[b].forward(h, train);
      h = relu(h);
    }
    return pool(h, PoolKind::kSpatialAvg);
  }
  Tensor<T> clip = reshape(x, Shape{x.dim(0), 1, x.dim(1), x.dim(2), 3});
  return shift.forward(clip, train, /*shift_enabled=*/false);
}

template <class T>
void DeflatedEncoder<T>::register_params(ParamMap<T>& pm, const std::string& prefix) {
  if (arch == VideoArch::kConv3dMini) {
    for (size_t b = 0; b < convs.size(); ++b) {
      register_frozen_conv(pm, prefix + ".block" + std::to_string(b) + ".conv", convs[b]);
      if (use_bn) bns[b].register_params(pm, prefix + ".block" + std::to_string(b) + ".bn");
    }
    return;
  }
  for (size_t b = 0; b < shift.blocks.size(); ++b) {
    const std::string bp = prefix + ".block" + std::to_string(b);
    ShiftBlock<T>& blk = shift.blocks[b];
    register_frozen_conv(pm, bp + ".conv1", blk.conv1);
    blk.bn1.register_params(pm, bp + ".bn1");
    register_frozen_conv(pm, bp + ".conv2", blk.conv2);
    blk.bn2.register_params(pm, bp + ".bn2");
    if (blk.has_proj) register_frozen_conv(pm, bp + ".proj", blk.proj);
  }
}

template <class T>
std::vector<BatchNorm<T>*> DeflatedEncoder<T>::bn_layers() {
  std::vector<BatchNorm<T>*> out;
  if (arch == VideoArch::kConv3dMini) {
    if (use_bn) {
      for (auto& b : bns) out.push_back(&b);
    }
    return out;
  }
  for (auto& blk : shift.blocks) {
    out.push_back(&blk.bn1);
    out.push_back(&blk.bn2);
  }
  return out;
}

template <class T>
DeflatedEncoder<T> deflate(const Encoders<T>& src) {
  DeflatedEncoder<T> out;
  out.arch = src.cfg.video_arch;
  if (out.arch == VideoArch::kConv3dMini) {
    out.use_bn = src.conv3d_mini.use_bn;
    for (size_t b = 0; b < src.conv3d_mini.convs.size(); ++b) {
      const Conv3dLayer<T>& c3 = src.conv3d_mini.convs[b];
      Conv2dLayer<T> c2;
      c2.weights = deflate_filters(c3.weights);
      c2.bias = c3.bias.clone();
      c2.stride = c3.stride;
      c2.pad = c3.spatial_pad;
      out.convs.push_back(std::move(c2));
      if (out.use_bn) out.bns.push_back(recalibratable_bn_copy(src.conv3d_mini.bns[b]));
    }
    return out;
  }
  for (const auto& blk : src.shift_mini.blocks) {
    out.shift.blocks.push_back(frozen_block_copy(blk));
  }
  return out;
}

template <class T>
void DeflationJob<T>::validate() const {
  if (calibration_images.rank() != 4 || calibration_images.dim(3) != 3) {
    throw ConfigError("deflation: calibration images must be [M,H,W,3], got " +
                      shape_str(calibration_images.shape()));
  }
  if (calibration_images.dim(0) < 1) throw ConfigError("deflation: empty calibration image set");
  if (static_video_length < 1) throw ConfigError("deflation: static_video_length must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("deflation: lr must be positive");
  if (epochs < 0) throw ConfigError("deflation: epochs must be >= 0");
  if (!(decay_factor > 0.0)) throw ConfigError("deflation: decay_factor must be positive");
  if (batch_size < 1) throw ConfigError("deflation: batch_size must be >= 1");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("deflation: holdout_fraction must be in [0,1)");
  }
}

template <class T>
RecalibrationResult<T> recalibrate(Encoders<T>& src, const DeflationJob<T>& job) {
  job.validate();
  RecalibrationResult<T> res;
  res.encoder = deflate(src);

  const Tensor<T>& images = job.calibration_images;
  const int64_t m = images.dim(0);
  Tensor<T> targets = source_targets(src, images, job.static_video_length, job.batch_size);

  // Deterministic split: shuffle once, carve the tail off as holdout. With
  // too few images the whole set doubles as the report split.
  Rng rng(job.seed);
  std::vector<int64_t> order(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) order[static_cast<size_t>(i)] = i;
  for (int64_t i = m - 1; i > 0; --i) {
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.uniform_int(i + 1))]);
  }
  int64_t n_hold = static_cast<int64_t>(std::llround(static_cast<double>(m) * job.holdout_fraction));
  n_hold = std::min(n_hold, m - 1);
  std::vector<int64_t> train_idx(order.begin(), order.end() - n_hold);
  std::vector<int64_t> hold_idx = n_hold > 0
                                      ? std::vector<int64_t>(order.end() - n_hold, order.end())
                                      : order;

  res.naive_l1 = eval_l1(res.encoder, images, targets, hold_idx, job.batch_size);
  res.final_l1 = res.naive_l1;
  if (job.method == DeflationMethod::kNaive || job.epochs == 0) return res;

  std::vector<BatchNorm<T>*> bns = res.encoder.bn_layers();
  if (bns.empty()) return res;  // nothing to fit

  ParamMap<T> pm;
  for (size_t i = 0; i < bns.size(); ++i) {
    pm.add("bn" + std::to_string(i) + ".gamma", &bns[i]->gamma);
    pm.add("bn" + std::to_string(i) + ".beta", &bns[i]->beta);
  }
  Adam<T> adam(pm);

  // Best-on-holdout snapshot; seeded with the naive state so the fit can
  // only improve the reported gap.
  auto snapshot = [&]() {
    std::vector<std::vector<T>> s;
    for (auto* b : bns) {
      s.push_back(b->gamma.values());
      s.push_back(b->beta.values());
    }
    return s;
  };
  std::vector<std::vector<T>> best = snapshot();
  double best_l1 = res.naive_l1;

  for (int64_t epoch = 0; epoch < job.epochs; ++epoch) {
    double lr = job.lr;
    for (int64_t de : job.decay_epochs) {
      if (epoch >= de) lr *= job.decay_factor;
    }
    const int64_t n_train = static_cast<int64_t>(train_idx.size());
    for (int64_t i = n_train - 1; i > 0; --i) {
      std::swap(train_idx[static_cast<size_t>(i)],
                train_idx[static_cast<size_t>(rng.uniform_int(i + 1))]);
    }
    for (size_t s = 0; s < train_idx.size(); s += static_cast<size_t>(job.batch_size)) {
      const size_t e = std::min(train_idx.size(), s + static_cast<size_t>(job.batch_size));
      Tensor<T> xb = take_rows(images, train_idx, s, e);
      Tensor<T> yb = take_rows(targets, train_idx, s, e);
      Tape<T> tape;
      {
        TapeScope<T> scope(tape);
        Tensor<T> out = res.encoder.forward(xb, /*train=*/false);
        Tensor<T> loss = mean_all(abs(sub(out, yb)));
        tape.backward(loss);
      }
      adam.step(pm, tape, lr);
    }
    const double l1 = eval_l1(res.encoder, images, targets, hold_idx, job.batch_size);
    if (l1 < best_l1) {
      best_l1 = l1;
      best = snapshot();
    }
  }

  size_t bi = 0;
  for (auto* b : bns) {
    std::copy(best[bi].begin(), best[bi].end(), b->gamma.mutable_data());
    ++bi;
    std::copy(best[bi].begin(), best[bi].end(), b->beta.mutable_data());
    ++bi;
  }
  res.final_l1 = best_l1;
  return res;
}

#define MMVC_INSTANTIATE_DEFLATION(T)                                                  \
  template Tensor<T> deflate_filters<T>(const Tensor<T>&);                             \
  template Tensor<T> tile_static_video<T>(const Tensor<T>&, int64_t);                  \
  template struct DeflatedEncoder<T>;                                                  \
  template DeflatedEncoder<T> deflate<T>(const Encoders<T>&);                          \
  template struct DeflationJob<T>;                                                     \
  template RecalibrationResult<T> recalibrate<T>(Encoders<T>&, const DeflationJob<T>&)

MMVC_INSTANTIATE_DEFLATION(float);
MMVC_INSTANTIATE_DEFLATION(double);

}  // namespace mmvc
