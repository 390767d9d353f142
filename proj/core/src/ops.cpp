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

#include "mmvc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <utility>

namespace mmvc {
namespace {

// Tracks which inputs live on the active tape. record() must run after all
// index_of() calls so parents always precede the new node.
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

template <class T, class Fn>
void close_rec(OpRec<T>& r, Tensor<T>& out, Fn&& fn) {
  if (r.tracked) {
    r.tape->record(std::move(r.parents), out.size(), std::forward<Fn>(fn), out.slot());
  }
}

struct BcastPlan {
  Shape out_shape;
  std::vector<int64_t> a_str, b_str;  // 0 on stretched dims
  int64_t out_numel = 0;
  bool same = false;
};

BcastPlan make_bcast(const Shape& a, const Shape& b, const char* op) {
  BcastPlan p;
  const int ra = static_cast<int>(a.size());
  const int rb = static_cast<int>(b.size());
  const int r = std::max(ra, rb);
  p.out_shape.assign(static_cast<size_t>(r), 1);
  p.a_str.assign(static_cast<size_t>(r), 0);
  p.b_str.assign(static_cast<size_t>(r), 0);
  const auto sa = strides_of(a);
  const auto sb = strides_of(b);
  for (int d = 0; d < r; ++d) {
    const int64_t da = d < r - ra ? 1 : a[static_cast<size_t>(d - (r - ra))];
    const int64_t db = d < r - rb ? 1 : b[static_cast<size_t>(d - (r - rb))];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                       shape_str(b));
    }
    p.out_shape[static_cast<size_t>(d)] = std::max(da, db);
    if (d >= r - ra && !(da == 1 && p.out_shape[static_cast<size_t>(d)] != 1)) {
      p.a_str[static_cast<size_t>(d)] = sa[static_cast<size_t>(d - (r - ra))];
    }
    if (d >= r - rb && !(db == 1 && p.out_shape[static_cast<size_t>(d)] != 1)) {
      p.b_str[static_cast<size_t>(d)] = sb[static_cast<size_t>(d - (r - rb))];
    }
  }
  p.out_numel = numel(p.out_shape);
  p.same = (a == b);
  return p;
}

// Odometer walk over the broadcast output space; f(out_linear, a_off, b_off).
template <class F>
void bcast_for_each(const BcastPlan& p, F&& f) {
  if (p.out_numel == 0) return;
  const int r = static_cast<int>(p.out_shape.size());
  if (r == 0) {
    f(int64_t{0}, int64_t{0}, int64_t{0});
    return;
  }
  std::vector<int64_t> idx(static_cast<size_t>(r), 0);
  int64_t ao = 0, bo = 0;
  for (int64_t o = 0; o < p.out_numel; ++o) {
    f(o, ao, bo);
    for (int d = r - 1; d >= 0; --d) {
      const size_t ud = static_cast<size_t>(d);
      ++idx[ud];
      ao += p.a_str[ud];
      bo += p.b_str[ud];
      if (idx[ud] < p.out_shape[ud]) break;
      idx[ud] = 0;
      ao -= p.a_str[ud] * p.out_shape[ud];
      bo -= p.b_str[ud] * p.out_shape[ud];
    }
  }
}

// Walk over out_shape while advancing a strided offset; f(out_linear, off).
template <class F>
void strided_for_each(const Shape& out_shape, const std::vector<int64_t>& str, F&& f) {
  const int64_t n = numel(out_shape);
  if (n == 0) return;
  const int r = static_cast<int>(out_shape.size());
  if (r == 0) {
    f(int64_t{0}, int64_t{0});
    return;
  }
  std::vector<int64_t> idx(static_cast<size_t>(r), 0);
  int64_t off = 0;
  for (int64_t o = 0; o < n; ++o) {
    f(o, off);
    for (int d = r - 1; d >= 0; --d) {
      const size_t ud = static_cast<size_t>(d);
      ++idx[ud];
      off += str[ud];
      if (idx[ud] < out_shape[ud]) break;
      idx[ud] = 0;
      off -= str[ud] * out_shape[ud];
    }
  }
}

template <class T, class F>
Tensor<T> bcast_forward(const char* name, const Tensor<T>& a, const Tensor<T>& b,
                        const BcastPlan& p, F&& f) {
  Tensor<T> out(p.out_shape);
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* po = out.mutable_data();
  if (p.same) {
    for (int64_t i = 0; i < p.out_numel; ++i) po[i] = f(pa[i], pb[i]);
  } else {
    bcast_for_each(p, [&](int64_t o, int64_t ao, int64_t bo) { po[o] = f(pa[ao], pb[bo]); });
  }
  check_finite(out.values(), name);
  return out;
}

template <class T, class F>
Tensor<T> unary_forward(const char* name, const Tensor<T>& a, F&& f) {
  Tensor<T> out(a.shape());
  const T* pa = a.ptr();
  T* po = out.mutable_data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i]);
  check_finite(out.values(), name);
  return out;
}

// C[m,n] += A[m,k] * B[k,n]
template <class T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* A, const T* B, T* C) {
  for (int64_t i = 0; i < m; ++i) {
    T* crow = C + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T a = A[i * k + p];
      const T* brow = B + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
template <class T>
void gemm_nt(int64_t m, int64_t n, int64_t k, const T* A, const T* B, T* C) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = A + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = B + j * k;
      T acc = 0;
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      C[i * n + j] += acc;
    }
  }
}

// C[m,n] += A[k,m]^T * B[k,n]
template <class T>
void gemm_tn(int64_t m, int64_t n, int64_t k, const T* A, const T* B, T* C) {
  for (int64_t p = 0; p < k; ++p) {
    const T* arow = A + p * m;
    const T* brow = B + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const T a = arow[i];
      T* crow = C + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

int check_axis(const Shape& shape, int axis, const char* op) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape));
  }
  return axis;
}

// [outer, axis extent, inner] decomposition.
struct AxisSplit {
  int64_t outer = 1, ax = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, int axis) {
  AxisSplit s;
  for (int d = 0; d < static_cast<int>(shape.size()); ++d) {
    const int64_t e = shape[static_cast<size_t>(d)];
    if (d < axis) {
      s.outer *= e;
    } else if (d == axis) {
      s.ax = e;
    } else {
      s.inner *= e;
    }
  }
  return s;
}

}  // namespace

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  const BcastPlan p = make_bcast(a.shape(), b.shape(), "add");
  auto rec = open_rec<T>({&a, &b});
  Tensor<T> out = bcast_forward("add", a, b, p, [](T x, T y) { return x + y; });
  close_rec(rec, out, [p](const T* up, const std::vector<T*>& pg) {
    T* ga = pg[0];
    T* gb = pg[1];
    if (p.same) {
      for (int64_t i = 0; i < p.out_numel; ++i) {
        if (ga) ga[i] += up[i];
        if (gb) gb[i] += up[i];
      }
    } else {
      bcast_for_each(p, [&](int64_t o, int64_t ao, int64_t bo) {
        if (ga) ga[ao] += up[o];
        if (gb) gb[bo] += up[o];
      });
    }
  });
  return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  const BcastPlan p = make_bcast(a.shape(), b.shape(), "sub");
  auto rec = open_rec<T>({&a, &b});
  Tensor<T> out = bcast_forward("sub", a, b, p, [](T x, T y) { return x - y; });
  close_rec(rec, out, [p](const T* up, const std::vector<T*>& pg) {
    T* ga = pg[0];
    T* gb = pg[1];
    bcast_for_each(p, [&](int64_t o, int64_t ao, int64_t bo) {
      if (ga) ga[ao] += up[o];
      if (gb) gb[bo] -= up[o];
    });
  });
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  const BcastPlan p = make_bcast(a.shape(), b.shape(), "mul");
  auto rec = open_rec<T>({&a, &b});
  Tensor<T> out = bcast_forward("mul", a, b, p, [](T x, T y) { return x * y; });
  auto abuf = a.buffer();
  auto bbuf = b.buffer();
  close_rec(rec, out, [p, abuf, bbuf](const T* up, const std::vector<T*>& pg) {
    T* ga = pg[0];
    T* gb = pg[1];
    const T* pa = abuf->data();
    const T* pb = bbuf->data();
    bcast_for_each(p, [&](int64_t o, int64_t ao, int64_t bo) {
      if (ga) ga[ao] += up[o] * pb[bo];
      if (gb) gb[bo] += up[o] * pa[ao];
    });
  });
  return out;
}

template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  const BcastPlan p = make_bcast(a.shape(), b.shape(), "div");
  auto rec = open_rec<T>({&a, &b});
  Tensor<T> out = bcast_forward("div", a, b, p, [](T x, T y) { return x / y; });
  auto abuf = a.buffer();
  auto bbuf = b.buffer();
  close_rec(rec, out, [p, abuf, bbuf](const T* up, const std::vector<T*>& pg) {
    T* ga = pg[0];
    T* gb = pg[1];
    const T* pa = abuf->data();
    const T* pb = bbuf->data();
    bcast_for_each(p, [&](int64_t o, int64_t ao, int64_t bo) {
      const T inv = T(1) / pb[bo];
      if (ga) ga[ao] += up[o] * inv;
      if (gb) gb[bo] -= up[o] * pa[ao] * inv * inv;
    });
  });
  return out;
}

template <class T>
Tensor<T> neg(const Tensor<T>& a) {
  auto rec = open_rec<T>({&a});
  Tensor<T> out = unary_forward("neg", a, [](T x) { return -x; });
  const int64_t n = a.size();
  close_rec(rec, out, [n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      for (int64_t i = 0; i < n; ++i) ga[i] -= up[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
  auto rec = open_rec<T>({&a});
  Tensor<T> out = unary_forward("relu", a, [](T x) { return x > T(0) ? x : T(0); });
  auto abuf = a.buffer();
  const int64_t n = a.size();
  close_rec(rec, out, [abuf, n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      const T* pa = abuf->data();
      // Subgradient at 0 is 0.
      for (int64_t i = 0; i < n; ++i) ga[i] += pa[i] > T(0) ? up[i] : T(0);
    }
  });
  return out;
}

template <class T>
Tensor<T> exp(const Tensor<T>& a) {
  auto rec = open_rec<T>({&a});
  Tensor<T> out = unary_forward("exp", a, [](T x) { return std::exp(x); });
  auto obuf = out.buffer();
  const int64_t n = a.size();
  close_rec(rec, out, [obuf, n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      const T* po = obuf->data();
      for (int64_t i = 0; i < n; ++i) ga[i] += up[i] * po[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> log(const Tensor<T>& a) {
  auto rec = open_rec<T>({&a});
  Tensor<T> out = unary_forward("log", a, [](T x) { return std::log(x); });
  auto abuf = a.buffer();
  const int64_t n = a.size();
  close_rec(rec, out, [abuf, n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      const T* pa = abuf->data();
      for (int64_t i = 0; i < n; ++i) ga[i] += up[i] / pa[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> sqrt(const Tensor<T>& a) {
  auto rec = open_rec<T>({&a});
  Tensor<T> out = unary_forward("sqrt", a, [](T x) { return std::sqrt(x); });
  auto obuf = out.buffer();
  const int64_t n = a.size();
  close_rec(rec, out, [obuf, n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      const T* po = obuf->data();
      for (int64_t i = 0; i < n; ++i) ga[i] += up[i] * T(0.5) / po[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> abs(const Tensor<T>& a) {
  auto rec = open_rec<T>({&a});
  Tensor<T> out = unary_forward("abs", a, [](T x) { return x < T(0) ? -x : x; });
  auto abuf = a.buffer();
  const int64_t n = a.size();
  close_rec(rec, out, [abuf, n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      const T* pa = abuf->data();
      // Subgradient at 0 is 0.
      for (int64_t i = 0; i < n; ++i) {
        if (pa[i] > T(0)) {
          ga[i] += up[i];
        } else if (pa[i] < T(0)) {
          ga[i] -= up[i];
        }
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  auto rec = open_rec<T>({&a});
  Tensor<T> out = unary_forward("sigmoid", a, [](T x) {
    // Split by sign to avoid overflow in exp.
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
  });
  auto obuf = out.buffer();
  const int64_t n = a.size();
  close_rec(rec, out, [obuf, n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      const T* po = obuf->data();
      for (int64_t i = 0; i < n; ++i) ga[i] += up[i] * po[i] * (T(1) - po[i]);
    }
  });
  return out;
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, double c) {
  const T cv = static_cast<T>(c);
  auto rec = open_rec<T>({&a});
  Tensor<T> out = unary_forward("add_scalar", a, [cv](T x) { return x + cv; });
  const int64_t n = a.size();
  close_rec(rec, out, [n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      for (int64_t i = 0; i < n; ++i) ga[i] += up[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> mul_scalar(const Tensor<T>& a, double c) {
  const T cv = static_cast<T>(c);
  auto rec = open_rec<T>({&a});
  Tensor<T> out = unary_forward("mul_scalar", a, [cv](T x) { return x * cv; });
  const int64_t n = a.size();
  close_rec(rec, out, [n, cv](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      for (int64_t i = 0; i < n; ++i) ga[i] += cv * up[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  check_shape(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
              "matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                  shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto rec = open_rec<T>({&a, &b});
  Tensor<T> out(Shape{m, n});
  gemm_nn(m, n, k, a.ptr(), b.ptr(), out.mutable_data());
  check_finite(out.values(), "matmul");
  auto abuf = a.buffer();
  auto bbuf = b.buffer();
  close_rec(rec, out, [abuf, bbuf, m, n, k](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) gemm_nt(m, k, n, up, bbuf->data(), ga);
    if (T* gb = pg[1]) gemm_tn(k, n, m, abuf->data(), up, gb);
  });
  return out;
}

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  check_shape(numel(shape) == a.size(), "reshape: cannot view " + shape_str(a.shape()) + " as " +
                                            shape_str(shape));
  auto rec = open_rec<T>({&a});
  Tensor<T> out(std::move(shape), a.values());
  const int64_t n = a.size();
  close_rec(rec, out, [n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      for (int64_t i = 0; i < n; ++i) ga[i] += up[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
  check_shape(a.rank() == 2, "transpose: expected rank 2, got " + shape_str(a.shape()));
  const int64_t m = a.dim(0), n = a.dim(1);
  auto rec = open_rec<T>({&a});
  Tensor<T> out(Shape{n, m});
  const T* pa = a.ptr();
  T* po = out.mutable_data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) po[j * m + i] = pa[i * n + j];
  }
  close_rec(rec, out, [m, n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) ga[i * n + j] += up[j * m + i];
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<int>& axes) {
  const int r = a.rank();
  check_shape(static_cast<int>(axes.size()) == r,
              "permute: axes count " + std::to_string(axes.size()) + " vs rank " +
                  std::to_string(r));
  std::vector<bool> seen(static_cast<size_t>(r), false);
  for (int ax : axes) {
    check_shape(ax >= 0 && ax < r && !seen[static_cast<size_t>(ax)],
                "permute: invalid axis permutation");
    seen[static_cast<size_t>(ax)] = true;
  }
  Shape out_shape(static_cast<size_t>(r));
  const auto in_str = strides_of(a.shape());
  std::vector<int64_t> walk(static_cast<size_t>(r));
  for (int d = 0; d < r; ++d) {
    out_shape[static_cast<size_t>(d)] = a.dim(axes[static_cast<size_t>(d)]);
    walk[static_cast<size_t>(d)] = in_str[static_cast<size_t>(axes[static_cast<size_t>(d)])];
  }
  auto rec = open_rec<T>({&a});
  Tensor<T> out(out_shape);
  const T* pa = a.ptr();
  T* po = out.mutable_data();
  strided_for_each(out_shape, walk, [&](int64_t o, int64_t off) { po[o] = pa[off]; });
  close_rec(rec, out, [out_shape, walk](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      strided_for_each(out_shape, walk, [&](int64_t o, int64_t off) { ga[off] += up[o]; });
    }
  });
  return out;
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  check_shape(!parts.empty(), "concat: no inputs");
  const Shape& s0 = parts[0].shape();
  check_axis(s0, axis, "concat");
  int64_t ax_total = 0;
  for (const auto& p : parts) {
    check_shape(p.rank() == parts[0].rank(), "concat: rank mismatch");
    for (int d = 0; d < p.rank(); ++d) {
      check_shape(d == axis || p.dim(d) == s0[static_cast<size_t>(d)],
                  "concat: shape mismatch at axis " + std::to_string(d));
    }
    ax_total += p.dim(axis);
  }
  Shape out_shape = s0;
  out_shape[static_cast<size_t>(axis)] = ax_total;
  const AxisSplit sp = split_axis(out_shape, axis);

  OpRec<T> rec;
  rec.tape = Tape<T>::active();
  if (rec.tape) {
    for (const auto& p : parts) {
      const int32_t idx = rec.tape->index_of(p);
      rec.parents.push_back(idx);
      if (idx >= 0) rec.tracked = true;
    }
  }

  Tensor<T> out(out_shape);
  T* po = out.mutable_data();
  std::vector<int64_t> ax_sizes, ax_offsets;
  int64_t off = 0;
  for (const auto& p : parts) {
    ax_sizes.push_back(p.dim(axis));
    ax_offsets.push_back(off);
    const T* pp = p.ptr();
    const int64_t block = p.dim(axis) * sp.inner;
    for (int64_t o = 0; o < sp.outer; ++o) {
      std::memcpy(po + (o * sp.ax + off) * sp.inner, pp + o * block,
                  static_cast<size_t>(block) * sizeof(T));
    }
    off += p.dim(axis);
  }
  close_rec(rec, out, [sp, ax_sizes, ax_offsets](const T* up, const std::vector<T*>& pg) {
    for (size_t pi = 0; pi < pg.size(); ++pi) {
      T* gp = pg[pi];
      if (!gp) continue;
      const int64_t block = ax_sizes[pi] * sp.inner;
      for (int64_t o = 0; o < sp.outer; ++o) {
        const T* src = up + (o * sp.ax + ax_offsets[pi]) * sp.inner;
        T* dst = gp + o * block;
        for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> slice(const Tensor<T>& a, int axis, int64_t start, int64_t len) {
  check_axis(a.shape(), axis, "slice");
  check_shape(start >= 0 && len >= 0 && start + len <= a.dim(axis),
              "slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                  ") out of bounds for axis extent " + std::to_string(a.dim(axis)));
  const AxisSplit sp = split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  auto rec = open_rec<T>({&a});
  Tensor<T> out(out_shape);
  const T* pa = a.ptr();
  T* po = out.mutable_data();
  const int64_t block = len * sp.inner;
  for (int64_t o = 0; o < sp.outer; ++o) {
    std::memcpy(po + o * block, pa + (o * sp.ax + start) * sp.inner,
                static_cast<size_t>(block) * sizeof(T));
  }
  close_rec(rec, out, [sp, start, block](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      for (int64_t o = 0; o < sp.outer; ++o) {
        const T* src = up + o * block;
        T* dst = ga + (o * sp.ax + start) * sp.inner;
        for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& a) {
  auto rec = open_rec<T>({&a});
  T acc = 0;
  const T* pa = a.ptr();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) acc += pa[i];
  Tensor<T> out = Tensor<T>::scalar(acc);
  check_finite(out.values(), "sum_all");
  close_rec(rec, out, [n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      for (int64_t i = 0; i < n; ++i) ga[i] += up[0];
    }
  });
  return out;
}

template <class T>
Tensor<T> mean_all(const Tensor<T>& a) {
  check_shape(a.size() > 0, "mean_all: empty tensor");
  auto rec = open_rec<T>({&a});
  T acc = 0;
  const T* pa = a.ptr();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) acc += pa[i];
  const T invn = T(1) / static_cast<T>(n);
  Tensor<T> out = Tensor<T>::scalar(acc * invn);
  check_finite(out.values(), "mean_all");
  close_rec(rec, out, [n, invn](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      const T g = up[0] * invn;
      for (int64_t i = 0; i < n; ++i) ga[i] += g;
    }
  });
  return out;
}

namespace {

struct ReducePlan {
  Shape out_shape;
  std::vector<int64_t> out_str_per_in_dim;  // 0 on reduced dims
  int64_t reduced_count = 1;
};

ReducePlan make_reduce(const Shape& in, const std::vector<int>& axes, bool keepdim,
                       const char* op) {
  ReducePlan p;
  std::vector<bool> reduced(in.size(), false);
  for (int ax : axes) {
    check_axis(in, ax, op);
    check_shape(!reduced[static_cast<size_t>(ax)], std::string(op) + ": duplicate axis");
    reduced[static_cast<size_t>(ax)] = true;
    p.reduced_count *= in[static_cast<size_t>(ax)];
  }
  for (size_t d = 0; d < in.size(); ++d) {
    if (!reduced[d]) {
      p.out_shape.push_back(in[d]);
    } else if (keepdim) {
      p.out_shape.push_back(1);
    }
  }
  const auto out_str = strides_of(p.out_shape);
  p.out_str_per_in_dim.assign(in.size(), 0);
  size_t pos = 0;
  for (size_t d = 0; d < in.size(); ++d) {
    if (!reduced[d]) {
      p.out_str_per_in_dim[d] = out_str[pos++];
    } else if (keepdim) {
      ++pos;  // the kept length-1 dim contributes stride 0
    }
  }
  return p;
}

}  // namespace

template <class T>
Tensor<T> sum_axes(const Tensor<T>& a, const std::vector<int>& axes, bool keepdim) {
  const ReducePlan p = make_reduce(a.shape(), axes, keepdim, "sum_axes");
  auto rec = open_rec<T>({&a});
  Tensor<T> out(p.out_shape);
  const T* pa = a.ptr();
  T* po = out.mutable_data();
  const Shape in_shape = a.shape();
  strided_for_each(in_shape, p.out_str_per_in_dim,
                   [&](int64_t i, int64_t off) { po[off] += pa[i]; });
  check_finite(out.values(), "sum_axes");
  close_rec(rec, out, [in_shape, p](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      strided_for_each(in_shape, p.out_str_per_in_dim,
                       [&](int64_t i, int64_t off) { ga[i] += up[off]; });
    }
  });
  return out;
}

template <class T>
Tensor<T> mean_axes(const Tensor<T>& a, const std::vector<int>& axes, bool keepdim) {
  const ReducePlan p = make_reduce(a.shape(), axes, keepdim, "mean_axes");
  check_shape(p.reduced_count > 0, "mean_axes: reducing over zero elements");
  const T scale = T(1) / static_cast<T>(p.reduced_count);
  auto rec = open_rec<T>({&a});
  Tensor<T> out(p.out_shape);
  const T* pa = a.ptr();
  T* po = out.mutable_data();
  const Shape in_shape = a.shape();
  strided_for_each(in_shape, p.out_str_per_in_dim,
                   [&](int64_t i, int64_t off) { po[off] += pa[i]; });
  for (auto& x : out.mutable_values()) x *= scale;
  check_finite(out.values(), "mean_axes");
  close_rec(rec, out, [in_shape, p, scale](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      strided_for_each(in_shape, p.out_str_per_in_dim,
                       [&](int64_t i, int64_t off) { ga[i] += up[off] * scale; });
    }
  });
  return out;
}

template <class T>
Tensor<T> max_axis(const Tensor<T>& a, int axis, bool keepdim) {
  check_axis(a.shape(), axis, "max_axis");
  check_shape(a.dim(axis) > 0, "max_axis: empty axis");
  const AxisSplit sp = split_axis(a.shape(), axis);
  Shape out_shape;
  for (int d = 0; d < a.rank(); ++d) {
    if (d == axis) {
      if (keepdim) out_shape.push_back(1);
    } else {
      out_shape.push_back(a.dim(d));
    }
  }
  auto rec = open_rec<T>({&a});
  Tensor<T> out(out_shape);
  std::vector<int64_t> argmax(static_cast<size_t>(sp.outer * sp.inner));
  const T* pa = a.ptr();
  T* po = out.mutable_data();
  for (int64_t o = 0; o < sp.outer; ++o) {
    for (int64_t i = 0; i < sp.inner; ++i) {
      T best = pa[(o * sp.ax) * sp.inner + i];
      int64_t arg = 0;
      for (int64_t k = 1; k < sp.ax; ++k) {
        const T v = pa[(o * sp.ax + k) * sp.inner + i];
        if (v > best) {
          best = v;
          arg = k;
        }
      }
      po[o * sp.inner + i] = best;
      argmax[static_cast<size_t>(o * sp.inner + i)] = arg;
    }
  }
  check_finite(out.values(), "max_axis");
  close_rec(rec, out, [sp, argmax](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      for (int64_t o = 0; o < sp.outer; ++o) {
        for (int64_t i = 0; i < sp.inner; ++i) {
          const int64_t arg = argmax[static_cast<size_t>(o * sp.inner + i)];
          ga[(o * sp.ax + arg) * sp.inner + i] += up[o * sp.inner + i];
        }
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> lse_axis(const Tensor<T>& a, int axis, bool keepdim) {
  check_axis(a.shape(), axis, "lse_axis");
  check_shape(a.dim(axis) > 0, "lse_axis: empty axis");
  const AxisSplit sp = split_axis(a.shape(), axis);
  Shape out_shape;
  for (int d = 0; d < a.rank(); ++d) {
    if (d == axis) {
      if (keepdim) out_shape.push_back(1);
    } else {
      out_shape.push_back(a.dim(d));
    }
  }
  auto rec = open_rec<T>({&a});
  Tensor<T> out(out_shape);
  const T* pa = a.ptr();
  T* po = out.mutable_data();
  for (int64_t o = 0; o < sp.outer; ++o) {
    for (int64_t i = 0; i < sp.inner; ++i) {
      T m = pa[(o * sp.ax) * sp.inner + i];
      for (int64_t k = 1; k < sp.ax; ++k) m = std::max(m, pa[(o * sp.ax + k) * sp.inner + i]);
      T s = 0;
      for (int64_t k = 0; k < sp.ax; ++k) {
        s += std::exp(pa[(o * sp.ax + k) * sp.inner + i] - m);
      }
      po[o * sp.inner + i] = m + std::log(s);
    }
  }
  check_finite(out.values(), "lse_axis");
  auto abuf = a.buffer();
  auto obuf = out.buffer();
  close_rec(rec, out, [sp, abuf, obuf](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      const T* pa = abuf->data();
      const T* po = obuf->data();
      for (int64_t o = 0; o < sp.outer; ++o) {
        for (int64_t i = 0; i < sp.inner; ++i) {
          const T lse = po[o * sp.inner + i];
          const T g = up[o * sp.inner + i];
          for (int64_t k = 0; k < sp.ax; ++k) {
            const int64_t idx = (o * sp.ax + k) * sp.inner + i;
            ga[idx] += g * std::exp(pa[idx] - lse);
          }
        }
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> take_diag(const Tensor<T>& a) {
  check_shape(a.rank() == 2 && a.dim(0) == a.dim(1),
              "take_diag: expected square matrix, got " + shape_str(a.shape()));
  const int64_t n = a.dim(0);
  auto rec = open_rec<T>({&a});
  Tensor<T> out(Shape{n});
  const T* pa = a.ptr();
  T* po = out.mutable_data();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i * n + i];
  close_rec(rec, out, [n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      for (int64_t i = 0; i < n; ++i) ga[i * n + i] += up[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<int64_t>& rows) {
  check_shape(a.rank() >= 1, "gather_rows: rank 0 input");
  const int64_t nrows = a.dim(0);
  const int64_t inner = a.size() == 0 ? 0 : a.size() / std::max<int64_t>(nrows, 1);
  for (int64_t r : rows) {
    check_shape(r >= 0 && r < nrows,
                "gather_rows: index " + std::to_string(r) + " out of range [0," +
                    std::to_string(nrows) + ")");
  }
  Shape out_shape = a.shape();
  out_shape[0] = static_cast<int64_t>(rows.size());
  auto rec = open_rec<T>({&a});
  Tensor<T> out(out_shape);
  const T* pa = a.ptr();
  T* po = out.mutable_data();
  for (size_t r = 0; r < rows.size(); ++r) {
    std::memcpy(po + static_cast<int64_t>(r) * inner, pa + rows[r] * inner,
                static_cast<size_t>(inner) * sizeof(T));
  }
  close_rec(rec, out, [rows, inner](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      for (size_t r = 0; r < rows.size(); ++r) {
        const T* src = up + static_cast<int64_t>(r) * inner;
        T* dst = ga + rows[r] * inner;
        for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> gather_elems(const Tensor<T>& a, const std::vector<int64_t>& cols) {
  check_shape(a.rank() == 2, "gather_elems: expected rank 2, got " + shape_str(a.shape()));
  const int64_t n = a.dim(0), m = a.dim(1);
  check_shape(static_cast<int64_t>(cols.size()) == n,
              "gather_elems: need one column index per row");
  for (int64_t c : cols) {
    check_shape(c >= 0 && c < m, "gather_elems: column " + std::to_string(c) + " out of range");
  }
  auto rec = open_rec<T>({&a});
  Tensor<T> out(Shape{n});
  const T* pa = a.ptr();
  T* po = out.mutable_data();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i * m + cols[static_cast<size_t>(i)]];
  close_rec(rec, out, [cols, m, n](const T* up, const std::vector<T*>& pg) {
    if (T* ga = pg[0]) {
      for (int64_t i = 0; i < n; ++i) ga[i * m + cols[static_cast<size_t>(i)]] += up[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> l2_normalize(const Tensor<T>& a) {
  check_shape(a.rank() == 1, "l2_normalize: expected rank 1, got " + shape_str(a.shape()));
  Tensor<T> nrm = sqrt(sum_all(mul(a, a)));
  return div(a, nrm);
}

template <class T>
Tensor<T> l2_normalize_rows(const Tensor<T>& a) {
  check_shape(a.rank() == 2, "l2_normalize_rows: expected rank 2, got " + shape_str(a.shape()));
  Tensor<T> nrm = sqrt(sum_axes(mul(a, a), {1}, /*keepdim=*/true));
  return div(a, nrm);
}

#define MMVC_INSTANTIATE_OPS(T)                                                            \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> div<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> neg<T>(const Tensor<T>&);                                             \
  template Tensor<T> relu<T>(const Tensor<T>&);                                            \
  template Tensor<T> exp<T>(const Tensor<T>&);                                             \
  template Tensor<T> log<T>(const Tensor<T>&);                                             \
  template Tensor<T> sqrt<T>(const Tensor<T>&);                                            \
  template Tensor<T> abs<T>(const Tensor<T>&);                                             \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                         \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, double);                              \
  template Tensor<T> mul_scalar<T>(const Tensor<T>&, double);                              \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                  \
  template Tensor<T> transpose<T>(const Tensor<T>&);                                       \
  template Tensor<T> permute<T>(const Tensor<T>&, const std::vector<int>&);                \
  template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, int);                        \
  template Tensor<T> slice<T>(const Tensor<T>&, int, int64_t, int64_t);                    \
  template Tensor<T> sum_all<T>(const Tensor<T>&);                                         \
  template Tensor<T> mean_all<T>(const Tensor<T>&);                                        \
  template Tensor<T> sum_axes<T>(const Tensor<T>&, const std::vector<int>&, bool);         \
  template Tensor<T> mean_axes<T>(const Tensor<T>&, const std::vector<int>&, bool);        \
  template Tensor<T> max_axis<T>(const Tensor<T>&, int, bool);                             \
  template Tensor<T> lse_axis<T>(const Tensor<T>&, int, bool);                             \
  template Tensor<T> take_diag<T>(const Tensor<T>&);                                       \
  template Tensor<T> gather_rows<T>(const Tensor<T>&, const std::vector<int64_t>&);        \
  template Tensor<T> gather_elems<T>(const Tensor<T>&, const std::vector<int64_t>&);       \
  template Tensor<T> l2_normalize<T>(const Tensor<T>&);                                    \
  template Tensor<T> l2_normalize_rows<T>(const Tensor<T>&);

MMVC_INSTANTIATE_OPS(float)
MMVC_INSTANTIATE_OPS(double)

#undef MMVC_INSTANTIATE_OPS

}  // namespace mmvc
