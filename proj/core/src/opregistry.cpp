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

#include "mmvc/opregistry.hpp"

#include "mmvc/common.hpp"
#include "mmvc/ops.hpp"

namespace mmvc {

namespace {

void need(bool cond, const std::string& name, size_t got, const char* want) {
  if (!cond) {
    throw ShapeError("op '" + name + "': expected " + want + " inputs, got " +
                     std::to_string(got));
  }
}

}  // namespace

template <class T>
Tensor<T> forward_op(const std::string& name, const std::vector<Tensor<T>>& in,
                     const OpAttrs& a) {
  const size_t n = in.size();
  if (name == "add") { need(n == 2, name, n, "2"); return add(in[0], in[1]); }
  if (name == "sub") { need(n == 2, name, n, "2"); return sub(in[0], in[1]); }
  if (name == "mul") { need(n == 2, name, n, "2"); return mul(in[0], in[1]); }
  if (name == "div") { need(n == 2, name, n, "2"); return div(in[0], in[1]); }
  if (name == "matmul") { need(n == 2, name, n, "2"); return matmul(in[0], in[1]); }
  if (name == "neg") { need(n == 1, name, n, "1"); return neg(in[0]); }
  if (name == "relu") { need(n == 1, name, n, "1"); return relu(in[0]); }
  if (name == "exp") { need(n == 1, name, n, "1"); return exp(in[0]); }
  if (name == "log") { need(n == 1, name, n, "1"); return log(in[0]); }
  if (name == "sqrt") { need(n == 1, name, n, "1"); return sqrt(in[0]); }
  if (name == "abs") { need(n == 1, name, n, "1"); return abs(in[0]); }
  if (name == "sigmoid") { need(n == 1, name, n, "1"); return sigmoid(in[0]); }
  if (name == "add_scalar") { need(n == 1, name, n, "1"); return add_scalar(in[0], a.scalar); }
  if (name == "mul_scalar") { need(n == 1, name, n, "1"); return mul_scalar(in[0], a.scalar); }
  if (name == "reshape") { need(n == 1, name, n, "1"); return reshape(in[0], a.shape); }
  if (name == "transpose") { need(n == 1, name, n, "1"); return transpose(in[0]); }
  if (name == "permute") { need(n == 1, name, n, "1"); return permute(in[0], a.perm); }
  if (name == "concat") { need(n >= 1, name, n, ">=1"); return concat(in, a.axis); }
  if (name == "slice") {
    need(n == 1, name, n, "1");
    return slice(in[0], a.axis, a.start, a.len);
  }
  if (name == "sum") { need(n == 1, name, n, "1"); return sum_all(in[0]); }
  if (name == "mean") { need(n == 1, name, n, "1"); return mean_all(in[0]); }
  if (name == "sum_axes") { need(n == 1, name, n, "1"); return sum_axes(in[0], a.axes, a.keepdim); }
  if (name == "mean_axes") {
    need(n == 1, name, n, "1");
    return mean_axes(in[0], a.axes, a.keepdim);
  }
  if (name == "max") { need(n == 1, name, n, "1"); return max_axis(in[0], a.axis, a.keepdim); }
  if (name == "lse") { need(n == 1, name, n, "1"); return lse_axis(in[0], a.axis, a.keepdim); }
  if (name == "take_diag") { need(n == 1, name, n, "1"); return take_diag(in[0]); }
  if (name == "gather_rows") { need(n == 1, name, n, "1"); return gather_rows(in[0], a.index); }
  if (name == "gather_elems") { need(n == 1, name, n, "1"); return gather_elems(in[0], a.index); }
  if (name == "l2_normalize") { need(n == 1, name, n, "1"); return l2_normalize(in[0]); }
  if (name == "l2_normalize_rows") {
    need(n == 1, name, n, "1");
    return l2_normalize_rows(in[0]);
  }
  if (name == "conv2d") {
    need(n == 2, name, n, "2");
    return conv2d(in[0], in[1], a.stride, a.spatial_pad);
  }
  if (name == "conv3d") {
    need(n == 2, name, n, "2");
    return conv3d(in[0], in[1], a.stride, a.spatial_pad, a.temporal_pad);
  }
  if (name == "temporal_shift") {
    need(n == 1, name, n, "1");
    return temporal_shift(in[0], a.shift_fraction, a.shift_enabled);
  }
  if (name == "pool") { need(n == 1, name, n, "1"); return pool(in[0], a.pool_kind, a.axis); }
  if (name == "batch_norm") {
    need(n == 5, name, n, "5");
    BatchNorm<T> bn;
    bn.gamma = in[1];
    bn.beta = in[2];
    bn.moving_mean = in[3];
    bn.moving_var = in[4];
    bn.epsilon = a.bn_epsilon;
    return bn.forward(in[0], a.train);
  }
  throw UnknownOpError("unknown op '" + name + "'");
}

const std::vector<std::string>& registered_ops() {
  static const std::vector<std::string> kOps = {
      "add",         "sub",        "mul",          "div",
      "neg",         "relu",       "exp",          "log",
      "sqrt",        "abs",        "sigmoid",      "add_scalar",
      "mul_scalar",  "matmul",     "reshape",      "transpose",
      "permute",     "concat",     "slice",        "sum",
      "mean",        "sum_axes",   "mean_axes",    "max",
      "lse",         "take_diag",  "gather_rows",  "gather_elems",
      "l2_normalize", "l2_normalize_rows", "conv2d", "conv3d",
      "temporal_shift", "pool",    "batch_norm"};
  return kOps;
}

template Tensor<float> forward_op<float>(const std::string&, const std::vector<Tensor<float>>&,
                                         const OpAttrs&);
template Tensor<double> forward_op<double>(const std::string&, const std::vector<Tensor<double>>&,
                                           const OpAttrs&);

}  // namespace mmvc
