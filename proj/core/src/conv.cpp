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

#include "mmvc/conv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmvc/tape.hpp"

namespace mmvc {

int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, Pad pad) {
  check_shape(k >= 1 && stride >= 1, "conv: kernel and stride must be >= 1");
  if (pad == Pad::kZero) return (in + stride - 1) / stride;
  check_shape(in >= k, "conv: valid padding needs extent " + std::to_string(in) +
                           " >= kernel " + std::to_string(k));
  return (in - k) / stride + 1;
}

int64_t conv_pad_begin(int64_t in, int64_t k, int64_t stride, Pad pad) {
  if (pad == Pad::kValid) return 0;
  const int64_t out = (in + stride - 1) / stride;
  const int64_t total = std::max<int64_t>((out - 1) * stride + k - in, 0);
  return total / 2;
}

namespace {

template <class T>
struct OpRec {
  Tape<T>* tape = nullptr;
  std::vector<int32_t> parents;
  bool tracked = false;
};

template <class T>
OpRec<T> open_rec(std::initializer_list<const Tensor<T>*> ins) {
  OpRec<T> r;
  r.tape = Tape<T>::active();
  if (!r.tape) return r;
  for (const Tensor<T>* t : ins) {
    int32_t idx = r.tape->index_of(*t);
    r.parents.push_back(idx);
    if (idx >= 0) r.tracked = true;
  }
  return r;
}

struct Conv2dDims {
  int64_t N, H, W, Ci, Kh, Kw, Co, Ho, Wo, s, ph0, pw0;
};

template <class T>
void conv2d_forward(const Conv2dDims& d, const T* x, const T* w, T* out) {
  for (int64_t n = 0; n < d.N; ++n) {
    for (int64_t ho = 0; ho < d.Ho; ++ho) {
      for (int64_t wo = 0; wo < d.Wo; ++wo) {
        T* orow = out + ((n * d.Ho + ho) * d.Wo + wo) * d.Co;
        for (int64_t kh = 0; kh < d.Kh; ++kh) {
          const int64_t hi = ho * d.s + kh - d.ph0;
          if (hi < 0 || hi >= d.H) continue;
          for (int64_t kw = 0; kw < d.Kw; ++kw) {
            const int64_t wi = wo * d.s + kw - d.pw0;
            if (wi < 0 || wi >= d.W) continue;
            const T* xrow = x + ((n * d.H + hi) * d.W + wi) * d.Ci;
            const T* wbase = w + (kh * d.Kw + kw) * d.Ci * d.Co;
            for (int64_t ci = 0; ci < d.Ci; ++ci) {
              const T xv = xrow[ci];
              const T* wrow = wbase + ci * d.Co;
              for (int64_t co = 0; co < d.Co; ++co) orow[co] += xv * wrow[co];
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv2d_backward(const Conv2dDims& d, const T* x, const T* w, const T* up, T* gx, T* gw) {
  for (int64_t n = 0; n < d.N; ++n) {
    for (int64_t ho = 0; ho < d.Ho; ++ho) {
      for (int64_t wo = 0; wo < d.Wo; ++wo) {
        const T* urow = up + ((n * d.Ho + ho) * d.Wo + wo) * d.Co;
        for (int64_t kh = 0; kh < d.Kh; ++kh) {
          const int64_t hi = ho * d.s + kh - d.ph0;
          if (hi < 0 || hi >= d.H) continue;
          for (int64_t kw = 0; kw < d.Kw; ++kw) {
            const int64_t wi = wo * d.s + kw - d.pw0;
            if (wi < 0 || wi >= d.W) continue;
            const int64_t xoff = ((n * d.H + hi) * d.W + wi) * d.Ci;
            const int64_t woff = (kh * d.Kw + kw) * d.Ci * d.Co;
            for (int64_t ci = 0; ci < d.Ci; ++ci) {
              if (gx) {
                const T* wrow = w + woff + ci * d.Co;
                T acc = 0;
                for (int64_t co = 0; co < d.Co; ++co) acc += urow[co] * wrow[co];
                gx[xoff + ci] += acc;
              }
              if (gw) {
                const T xv = x[xoff + ci];
                T* gwrow = gw + woff + ci * d.Co;
                for (int64_t co = 0; co < d.Co; ++co) gwrow[co] += xv * urow[co];
              }
            }
          }
        }
      }
    }
  }
}

struct Conv3dDims {
  int64_t N, Ti, H, W, Ci, Kt, Kh, Kw, Co, To, Ho, Wo, s, pt0, ph0, pw0;
};

template <class T>
void conv3d_forward(const Conv3dDims& d, const T* x, const T* w, T* out) {
  for (int64_t n = 0; n < d.N; ++n) {
    for (int64_t to = 0; to < d.To; ++to) {
      for (int64_t ho = 0; ho < d.Ho; ++ho) {
        for (int64_t wo = 0; wo < d.Wo; ++wo) {
          T* orow = out + (((n * d.To + to) * d.Ho + ho) * d.Wo + wo) * d.Co;
          for (int64_t kt = 0; kt < d.Kt; ++kt) {
            const int64_t ti = to + kt - d.pt0;
            if (ti < 0 || ti >= d.Ti) continue;
            for (int64_t kh = 0; kh < d.Kh; ++kh) {
              const int64_t hi = ho * d.s + kh - d.ph0;
              if (hi < 0 || hi >= d.H) continue;
              for (int64_t kw = 0; kw < d.Kw; ++kw) {
                const int64_t wi = wo * d.s + kw - d.pw0;
                if (wi < 0 || wi >= d.W) continue;
                const T* xrow = x + (((n * d.Ti + ti) * d.H + hi) * d.W + wi) * d.Ci;
                const T* wbase = w + ((kt * d.Kh + kh) * d.Kw + kw) * d.Ci * d.Co;
                for (int64_t ci = 0; ci < d.Ci; ++ci) {
                  const T xv = xrow[ci];
                  const T* wrow = wbase + ci * d.Co;
                  for (int64_t co = 0; co < d.Co; ++co) orow[co] += xv * wrow[co];
                }
              }
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv3d_backward(const Conv3dDims& d, const T* x, const T* w, const T* up, T* gx, T* gw) {
  for (int64_t n = 0; n < d.N; ++n) {
    for (int64_t to = 0; to < d.To; ++to) {
      for (int64_t ho = 0; ho < d.Ho; ++ho) {
        for (int64_t wo = 0; wo < d.Wo; ++wo) {
          const T* urow = up + (((n * d.To + to) * d.Ho + ho) * d.Wo + wo) * d.Co;
          for (int64_t kt = 0; kt < d.Kt; ++kt) {
            const int64_t ti = to + kt - d.pt0;
            if (ti < 0 || ti >= d.Ti) continue;
            for (int64_t kh = 0; kh < d.Kh; ++kh) {
              const int64_t hi = ho * d.s + kh - d.ph0;
              if (hi < 0 || hi >= d.H) continue;
              for (int64_t kw = 0; kw < d.Kw; ++kw) {
                const int64_t wi = wo * d.s + kw - d.pw0;
                if (wi < 0 || wi >= d.W) continue;
                const int64_t xoff = (((n * d.Ti + ti) * d.H + hi) * d.W + wi) * d.Ci;
                const int64_t woff = ((kt * d.Kh + kh) * d.Kw + kw) * d.Ci * d.Co;
                for (int64_t ci = 0; ci < d.Ci; ++ci) {
                  if (gx) {
                    const T* wrow = w + woff + ci * d.Co;
                    T acc = 0;
                    for (int64_t co = 0; co < d.Co; ++co) acc += urow[co] * wrow[co];
                    gx[xoff + ci] += acc;
                  }
                  if (gw) {
                    const T xv = x[xoff + ci];
                    T* gwrow = gw + woff + ci * d.Co;
                    for (int64_t co = 0; co < d.Co; ++co) gwrow[co] += xv * urow[co];
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights, int64_t stride, Pad pad) {
  check_shape(input.rank() == 4, "conv2d: input must be [N,H,W,C_in], got " +
                                     shape_str(input.shape()));
  check_shape(weights.rank() == 4, "conv2d: weights must be [K_h,K_w,C_in,C_out], got " +
                                       shape_str(weights.shape()));
  check_shape(input.dim(3) == weights.dim(2),
              "conv2d: channel mismatch, input " + shape_str(input.shape()) + " vs weights " +
                  shape_str(weights.shape()));
  Conv2dDims d;
  d.N = input.dim(0);
  d.H = input.dim(1);
  d.W = input.dim(2);
  d.Ci = input.dim(3);
  d.Kh = weights.dim(0);
  d.Kw = weights.dim(1);
  d.Co = weights.dim(3);
  d.s = stride;
  d.Ho = conv_out_extent(d.H, d.Kh, stride, pad);
  d.Wo = conv_out_extent(d.W, d.Kw, stride, pad);
  d.ph0 = conv_pad_begin(d.H, d.Kh, stride, pad);
  d.pw0 = conv_pad_begin(d.W, d.Kw, stride, pad);

  auto rec = open_rec<T>({&input, &weights});
  Tensor<T> out(Shape{d.N, d.Ho, d.Wo, d.Co});
  conv2d_forward(d, input.ptr(), weights.ptr(), out.mutable_data());
  check_finite(out.values(), "conv2d");
  auto xbuf = input.buffer();
  auto wbuf = weights.buffer();
  if (rec.tracked) {
    rec.tape->record(std::move(rec.parents), out.size(),
                     [d, xbuf, wbuf](const T* up, const std::vector<T*>& pg) {
                       conv2d_backward(d, xbuf->data(), wbuf->data(), up, pg[0], pg[1]);
                     },
                     out.slot());
  }
  return out;
}

template <class T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& weights, int64_t spatial_stride,
                 Pad spatial_pad, Pad temporal_pad) {
  check_shape(input.rank() == 5, "conv3d: input must be [N,T,H,W,C_in], got " +
                                     shape_str(input.shape()));
  check_shape(weights.rank() == 5, "conv3d: weights must be [K_t,K_h,K_w,C_in,C_out], got " +
                                       shape_str(weights.shape()));
  check_shape(input.dim(4) == weights.dim(3),
              "conv3d: channel mismatch, input " + shape_str(input.shape()) + " vs weights " +
                  shape_str(weights.shape()));
  Conv3dDims d;
  d.N = input.dim(0);
  d.Ti = input.dim(1);
  d.H = input.dim(2);
  d.W = input.dim(3);
  d.Ci = input.dim(4);
  d.Kt = weights.dim(0);
  d.Kh = weights.dim(1);
  d.Kw = weights.dim(2);
  d.Co = weights.dim(4);
  d.s = spatial_stride;
  d.To = conv_out_extent(d.Ti, d.Kt, 1, temporal_pad);
  d.Ho = conv_out_extent(d.H, d.Kh, spatial_stride, spatial_pad);
  d.Wo = conv_out_extent(d.W, d.Kw, spatial_stride, spatial_pad);
  d.pt0 = conv_pad_begin(d.Ti, d.Kt, 1, temporal_pad);
  d.ph0 = conv_pad_begin(d.H, d.Kh, spatial_stride, spatial_pad);
  d.pw0 = conv_pad_begin(d.W, d.Kw, spatial_stride, spatial_pad);

  auto rec = open_rec<T>({&input, &weights});
  Tensor<T> out(Shape{d.N, d.To, d.Ho, d.Wo, d.Co});
  conv3d_forward(d, input.ptr(), weights.ptr(), out.mutable_data());
  check_finite(out.values(), "conv3d");
  auto xbuf = input.buffer();
  auto wbuf = weights.buffer();
  if (rec.tracked) {
    rec.tape->record(std::move(rec.parents), out.size(),
                     [d, xbuf, wbuf](const T* up, const std::vector<T*>& pg) {
                       conv3d_backward(d, xbuf->data(), wbuf->data(), up, pg[0], pg[1]);
                     },
                     out.slot());
  }
  return out;
}

template <class T>
Tensor<T> temporal_shift(const Tensor<T>& input, double shift_fraction, bool enabled) {
  check_shape(input.rank() == 5, "temporal_shift: input must be [N,T,H,W,C], got " +
                                     shape_str(input.shape()));
  check_shape(input.dim(1) >= 1, "temporal_shift: T must be >= 1");
  check_shape(shift_fraction >= 0.0 && shift_fraction <= 1.0,
              "temporal_shift: shift_fraction must be in [0,1]");
  const int64_t N = input.dim(0), Tt = input.dim(1), H = input.dim(2), W = input.dim(3),
                C = input.dim(4);
  const int64_t g = static_cast<int64_t>(std::floor(shift_fraction * static_cast<double>(C)));
  check_shape(2 * g <= C, "temporal_shift: shift groups (2 x " + std::to_string(g) +
                              ") exceed channel count " + std::to_string(C));
  if (!enabled || g == 0) {
    // Identity, but still a distinct tensor so the tape sees a copy node.
    return reshape(input, input.shape());
  }

  auto rec = open_rec<T>({&input});
  Tensor<T> out(input.shape());
  const T* x = input.ptr();
  T* o = out.mutable_data();
  const int64_t plane = H * W * C;
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t t = 0; t < Tt; ++t) {
      const T* cur = x + (n * Tt + t) * plane;
      const T* prev = t > 0 ? cur - plane : nullptr;
      const T* next = t + 1 < Tt ? cur + plane : nullptr;
      T* dst = o + (n * Tt + t) * plane;
      for (int64_t hw = 0; hw < H * W; ++hw) {
        const int64_t base = hw * C;
        for (int64_t c = 0; c < g; ++c) dst[base + c] = prev ? prev[base + c] : T(0);
        for (int64_t c = g; c < 2 * g; ++c) dst[base + c] = next ? next[base + c] : T(0);
        for (int64_t c = 2 * g; c < C; ++c) dst[base + c] = cur[base + c];
      }
    }
  }
  if (rec.tracked) {
    rec.tape->record(
        std::move(rec.parents), out.size(),
        [N, Tt, H, W, C, g, plane](const T* up, const std::vector<T*>& pg) {
          if (T* gx = pg[0]) {
            for (int64_t n = 0; n < N; ++n) {
              for (int64_t t = 0; t < Tt; ++t) {
                const T* u_next = t + 1 < Tt ? up + (n * Tt + t + 1) * plane : nullptr;
                const T* u_prev = t > 0 ? up + (n * Tt + t - 1) * plane : nullptr;
                const T* u_cur = up + (n * Tt + t) * plane;
                T* dst = gx + (n * Tt + t) * plane;
                for (int64_t hw = 0; hw < H * W; ++hw) {
                  const int64_t base = hw * C;
                  for (int64_t c = 0; c < g; ++c) {
                    if (u_next) dst[base + c] += u_next[base + c];
                  }
                  for (int64_t c = g; c < 2 * g; ++c) {
                    if (u_prev) dst[base + c] += u_prev[base + c];
                  }
                  for (int64_t c = 2 * g; c < C; ++c) dst[base + c] += u_cur[base + c];
                }
              }
            }
          }
        },
        out.slot());
  }
  return out;
}

template Tensor<float> conv2d<float>(const Tensor<float>&, const Tensor<float>&, int64_t, Pad);
template Tensor<double> conv2d<double>(const Tensor<double>&, const Tensor<double>&, int64_t, Pad);
template Tensor<float> conv3d<float>(const Tensor<float>&, const Tensor<float>&, int64_t, Pad,
                                     Pad);
template Tensor<double> conv3d<double>(const Tensor<double>&, const Tensor<double>&, int64_t, Pad,
                                       Pad);
template Tensor<float> temporal_shift<float>(const Tensor<float>&, double, bool);
template Tensor<double> temporal_shift<double>(const Tensor<double>&, double, bool);

}  // namespace mmvc
