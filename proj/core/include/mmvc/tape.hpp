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
#include <vector>

#include "mmvc/tensor.hpp"

namespace mmvc {

// Reverse-mode tape. Ops append nodes in execution order; backward walks the
// node list in reverse, which is a valid topological order because edges only
// point at earlier nodes. Accumulation order is therefore fixed, so repeated
// runs produce bit-identical gradients.
//
// A tape is confined to one logical thread. Ops record onto the innermost
// active tape (see TapeScope); with no active tape they are plain functions.
template <class T>
class Tape {
 public:
  // upstream: gradient w.r.t. this node's output (dense, node's numel).
  // parent_grads: one pointer per recorded parent, nullptr for constants.
  using BackwardFn = std::function<void(const T* upstream, const std::vector<T*>& parent_grads)>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  uint64_t id() const { return id_; }
  int64_t num_nodes() const { return static_cast<int64_t>(nodes_.size()); }

  // Registers t as a differentiable leaf. Watched-but-unreachable tensors get
  // zero gradients from grad().
  void watch(const Tensor<T>& t);

  // Node index of t on this tape, or -1 when t is not tracked here. Creates a
  // leaf on the fly for requires_grad tensors.
  int32_t index_of(const Tensor<T>& t);
  int32_t index_of_const(const Tensor<T>& t) const;

  int32_t record(std::vector<int32_t> parents, int64_t out_numel, BackwardFn fn,
                 const std::shared_ptr<TapeSlot>& out_slot);

  // Runs reverse accumulation from a scalar loss recorded on this tape.
  void backward(const Tensor<T>& loss);

  bool has_backward_run() const { return backward_run_; }

  // Gradient of a watched/used tensor after backward(). Unreachable
  // tensors that require grad yield zeros of their shape.
  Tensor<T> grad(const Tensor<T>& t) const;

  static Tape<T>* active();

 private:
  friend class TapeScope_;

  struct NodeRec {
    std::vector<int32_t> parents;
    int64_t size = 0;
    BackwardFn backward_fn;  // empty for leaves
    std::vector<T> grad;     // lazily allocated
  };

  std::vector<T>& grad_buffer(int32_t node);

  uint64_t id_;
  std::vector<NodeRec> nodes_;
  bool backward_run_ = false;
};

// RAII activation of a tape for the current thread.
template <class T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* prev_;
};

// Free-function spelling of Tape::backward.
template <class T>
inline void backward(Tape<T>& tape, const Tensor<T>& loss) {
  tape.backward(loss);
}

}  // namespace mmvc
