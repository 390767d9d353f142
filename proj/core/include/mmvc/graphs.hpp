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

#include <string>
#include <utility>
#include <vector>

#include "mmvc/nn.hpp"
#include "mmvc/rng.hpp"
#include "mmvc/tensor.hpp"

namespace mmvc {

// Three ways of wiring modality representations into joint embedding spaces:
//  - shared:   one space (vat); every modality has a direct head into it.
//  - disjoint: separate va and vt spaces; audio and text never meet.
//  - fac:      fine va space for video/audio plus a coarse vat space; video
//    and audio reach vat only through the fine space via the va->vat head,
//    text enters vat directly.

enum class Topology { kShared, kDisjoint, kFac };
enum class Modality { kV, kA, kT };
enum class SpaceId { kVa, kVt, kVat };
enum class HeadKind { kLinear, kNonlinear };

const char* topology_name(Topology t);
const char* modality_name(Modality m);
const char* space_name(SpaceId s);
const char* head_kind_name(HeadKind k);

// Space where each pairwise loss lives under a topology: video-audio pairs
// meet in vat (shared) or va (disjoint, fac); video-text pairs meet in vat
// (shared, fac) or vt (disjoint).
SpaceId va_loss_space(Topology t);
SpaceId vt_loss_space(Topology t);
Topology parse_topology(const std::string& s);
Modality parse_modality(const std::string& s);
SpaceId parse_space(const std::string& s);
HeadKind parse_head_kind(const std::string& s);

struct GraphConfig {
  Topology topology = Topology::kFac;
  int64_t d_va = 32;
  int64_t d_vt = 32;
  int64_t d_vat = 16;
  HeadKind video_head = HeadKind::kNonlinear;
  HeadKind audio_head = HeadKind::kLinear;
  HeadKind text_head = HeadKind::kLinear;
  HeadKind fine_to_coarse_head = HeadKind::kLinear;
  int64_t head_hidden = 0;  // 0: hidden dim = input dim
  // If set, the fine vector is L2-normalized before the va->vat head instead
  // of only after the full composition.
  bool normalize_fine_before_coarse = false;

  void validate() const;
  bool reachable(Modality m, SpaceId s) const;
  std::vector<std::pair<Modality, SpaceId>> reachable_pairs() const;
};

// Two-layer MLP head (linear -> BN -> ReLU -> linear) or a single linear map.
template <class T>
struct ProjectionHead {
  HeadKind kind = HeadKind::kLinear;
  Linear<T> lin1;
  Linear<T> lin2;    // nonlinear only
  BatchNorm<T> bn;   // nonlinear only

  ProjectionHead() = default;
  ProjectionHead(HeadKind kind, int64_t in, int64_t hidden, int64_t out, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, bool train);
  void register_params(ParamMap<T>& pm, const std::string& prefix);
};

template <class T>
struct JointEmbedding {
  Tensor<T> vector;  // [d_s], unit L2 norm
  Modality modality = Modality::kV;
  SpaceId space = SpaceId::kVat;
};

template <class T>
struct ModalityGraph {
  GraphConfig cfg;
  ProjectionHead<T> v_to_va, a_to_va;
  ProjectionHead<T> v_to_vt, t_to_vt;
  ProjectionHead<T> v_to_vat, a_to_vat, t_to_vat;
  ProjectionHead<T> va_to_vat;

  ModalityGraph() = default;
  ModalityGraph(const GraphConfig& cfg, int64_t d_v, int64_t d_a, int64_t d_t, Rng& rng);

  // reps [N, d_m] -> L2-normalized [N, d_s]; throws TopologyError when the
  // (modality, space) pair does not exist in this topology.
  Tensor<T> project_batch(const Tensor<T>& reps, Modality m, SpaceId s, bool train);
  int64_t space_dim(SpaceId s) const;
  void register_params(ParamMap<T>& pm);
};

template <class T>
JointEmbedding<T> project(const Tensor<T>& rep, Modality m, SpaceId s, ModalityGraph<T>& graph,
                          bool train = false);

// Dot product of two unit vectors in the same space.
template <class T>
T similarity(const JointEmbedding<T>& z1, const JointEmbedding<T>& z2);

}  // namespace mmvc
