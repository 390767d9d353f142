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

#include "mmvc/tape.hpp"
#include "mmvc/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace mmvc {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<int64_t> strides_of(const Shape& shape) {
  std::vector<int64_t> s(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
    s[i] = s[i + 1] * shape[i + 1];
  }
  return s;
}

template <class T>
void check_finite(const std::vector<T>& v, const char* op) {
  for (const T& x : v) {
    if (!std::isfinite(x)) {
      throw NonFiniteError(std::string(op) + ": non-finite value in output");
    }
  }
}

template void check_finite<float>(const std::vector<float>&, const char*);
template void check_finite<double>(const std::vector<double>&, const char*);

namespace {
std::atomic<uint64_t> g_next_tape_id{1};

template <class T>
Tape<T>*& active_tape_ref() {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}
}  // namespace

template <class T>
Tape<T>::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

template <class T>
Tape<T>::~Tape() = default;

template <class T>
Tape<T>* Tape<T>::active() {
  return active_tape_ref<T>();
}

template <class T>
void Tape<T>::watch(const Tensor<T>& t) {
  const_cast<Tensor<T>&>(t).set_requires_grad(true);
  index_of(t);
}

template <class T>
int32_t Tape<T>::index_of(const Tensor<T>& t) {
  TapeSlot& slot = *t.slot();
  if (slot.tape_id == id_ && slot.node >= 0) return slot.node;
  if (!t.requires_grad()) return -1;
  // New leaf for a parameter first seen by this tape.
  NodeRec rec;
  rec.size = t.size();
  nodes_.push_back(std::move(rec));
  slot.tape_id = id_;
  slot.node = static_cast<int32_t>(nodes_.size() - 1);
  return slot.node;
}

template <class T>
int32_t Tape<T>::index_of_const(const Tensor<T>& t) const {
  const TapeSlot& slot = *t.slot();
  if (slot.tape_id == id_ && slot.node >= 0) return slot.node;
  return -1;
}

template <class T>
int32_t Tape<T>::record(std::vector<int32_t> parents, int64_t out_numel, BackwardFn fn,
                        const std::shared_ptr<TapeSlot>& out_slot) {
  NodeRec rec;
  rec.parents = std::move(parents);
  rec.size = out_numel;
  rec.backward_fn = std::move(fn);
  nodes_.push_back(std::move(rec));
  const int32_t idx = static_cast<int32_t>(nodes_.size() - 1);
  out_slot->tape_id = id_;
  out_slot->node = idx;
  return idx;
}

template <class T>
std::vector<T>& Tape<T>::grad_buffer(int32_t node) {
  NodeRec& rec = nodes_[static_cast<size_t>(node)];
  if (rec.grad.empty() && rec.size > 0) rec.grad.assign(static_cast<size_t>(rec.size), T(0));
  return rec.grad;
}

template <class T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.size() != 1) {
    throw TapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  const int32_t loss_node = index_of_const(loss);
  if (loss_node < 0) throw TapeError("backward: loss was not recorded on this tape");

  grad_buffer(loss_node)[0] = T(1);

  std::vector<T*> parent_ptrs;
  for (int32_t i = loss_node; i >= 0; --i) {
    NodeRec& rec = nodes_[static_cast<size_t>(i)];
    if (rec.grad.empty() || !rec.backward_fn) continue;
    parent_ptrs.clear();
    parent_ptrs.reserve(rec.parents.size());
    for (int32_t p : rec.parents) {
      parent_ptrs.push_back(p >= 0 ? grad_buffer(p).data() : nullptr);
    }
    rec.backward_fn(rec.grad.data(), parent_ptrs);
  }
  backward_run_ = true;
}

template <class T>
Tensor<T> Tape<T>::grad(const Tensor<T>& t) const {
  const int32_t idx = index_of_const(t);
  if (idx < 0) {
    if (t.requires_grad()) return Tensor<T>::zeros(t.shape());
    throw TapeError("grad: tensor is not tracked on this tape");
  }
  const NodeRec& rec = nodes_[static_cast<size_t>(idx)];
  if (rec.grad.empty()) return Tensor<T>::zeros(t.shape());
  return Tensor<T>(t.shape(), rec.grad);
}

template <class T>
TapeScope<T>::TapeScope(Tape<T>& tape) : prev_(active_tape_ref<T>()) {
  active_tape_ref<T>() = &tape;
}

template <class T>
TapeScope<T>::~TapeScope() {
  active_tape_ref<T>() = prev_;
}

template class Tape<float>;
template class Tape<double>;
template class TapeScope<float>;
template class TapeScope<double>;

}  // namespace mmvc
