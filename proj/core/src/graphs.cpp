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

#include "mmvc/graphs.hpp"

#include "mmvc/ops.hpp"

namespace mmvc {

const char* topology_name(Topology t) {
  switch (t) {
    case Topology::kShared: return "shared";
    case Topology::kDisjoint: return "disjoint";
    case Topology::kFac: return "fac";
  }
  return "?";
}

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::kV: return "v";
    case Modality::kA: return "a";
    case Modality::kT: return "t";
  }
  return "?";
}

const char* space_name(SpaceId s) {
  switch (s) {
    case SpaceId::kVa: return "va";
    case SpaceId::kVt: return "vt";
    case SpaceId::kVat: return "vat";
  }
  return "?";
}

SpaceId va_loss_space(Topology t) {
  return t == Topology::kShared ? SpaceId::kVat : SpaceId::kVa;
}

SpaceId vt_loss_space(Topology t) {
  return t == Topology::kDisjoint ? SpaceId::kVt : SpaceId::kVat;
}

const char* head_kind_name(HeadKind k) {
  return k == HeadKind::kLinear ? "linear" : "nonlinear";
}

Topology parse_topology(const std::string& s) {
  if (s == "shared") return Topology::kShared;
  if (s == "disjoint") return Topology::kDisjoint;
  if (s == "fac") return Topology::kFac;
  throw ConfigError("unknown topology '" + s + "' (expected shared|disjoint|fac)");
}

Modality parse_modality(const std::string& s) {
  if (s == "v") return Modality::kV;
  if (s == "a") return Modality::kA;
  if (s == "t") return Modality::kT;
  throw ConfigError("unknown modality '" + s + "' (expected v|a|t)");
}

SpaceId parse_space(const std::string& s) {
  if (s == "va") return SpaceId::kVa;
  if (s == "vt") return SpaceId::kVt;
  if (s == "vat") return SpaceId::kVat;
  throw ConfigError("unknown space '" + s + "' (expected va|vt|vat)");
}

HeadKind parse_head_kind(const std::string& s) {
  if (s == "linear") return HeadKind::kLinear;
  if (s == "nonlinear") return HeadKind::kNonlinear;
  throw ConfigError("unknown head kind '" + s + "' (expected linear|nonlinear)");
}

void GraphConfig::validate() const {
  check(d_va > 0 && d_vt > 0 && d_vat > 0, "GraphConfig: space dims must be positive");
  check(head_hidden >= 0, "GraphConfig: head_hidden must be >= 0");
}

bool GraphConfig::reachable(Modality m, SpaceId s) const {
  switch (topology) {
    case Topology::kShared:
      return s == SpaceId::kVat;
    case Topology::kDisjoint:
      if (s == SpaceId::kVa) return m == Modality::kV || m == Modality::kA;
      if (s == SpaceId::kVt) return m == Modality::kV || m == Modality::kT;
      return false;
    case Topology::kFac:
      if (s == SpaceId::kVa) return m == Modality::kV || m == Modality::kA;
      if (s == SpaceId::kVat) return true;
      return false;
  }
  return false;
}

std::vector<std::pair<Modality, SpaceId>> GraphConfig::reachable_pairs() const {
  std::vector<std::pair<Modality, SpaceId>> out;
  for (Modality m : {Modality::kV, Modality::kA, Modality::kT}) {
    for (SpaceId s : {SpaceId::kVa, SpaceId::kVt, SpaceId::kVat}) {
      if (reachable(m, s)) out.emplace_back(m, s);
    }
  }
  return out;
}

template <class T>
ProjectionHead<T>::ProjectionHead(HeadKind kind_, int64_t in, int64_t hidden, int64_t out,
                                  Rng& rng)
    : kind(kind_) {
  if (kind == HeadKind::kLinear) {
    lin1 = Linear<T>(in, out, rng);
  } else {
    lin1 = Linear<T>(in, hidden, rng);
    bn = BatchNorm<T>(hidden);
    lin2 = Linear<T>(hidden, out, rng);
  }
}

template <class T>
Tensor<T> ProjectionHead<T>::forward(const Tensor<T>& x, bool train) {
  if (kind == HeadKind::kLinear) return lin1.forward(x);
  return lin2.forward(relu(bn.forward(lin1.forward(x), train)));
}

template <class T>
void ProjectionHead<T>::register_params(ParamMap<T>& pm, const std::string& prefix) {
  lin1.register_params(pm, prefix + ".lin1");
  if (kind == HeadKind::kNonlinear) {
    bn.register_params(pm, prefix + ".bn");
    lin2.register_params(pm, prefix + ".lin2");
  }
}

namespace {

int64_t hidden_dim(const GraphConfig& cfg, int64_t in) {
  return cfg.head_hidden > 0 ? cfg.head_hidden : in;
}

}  // namespace

template <class T>
ModalityGraph<T>::ModalityGraph(const GraphConfig& cfg_, int64_t d_v, int64_t d_a, int64_t d_t,
                                Rng& rng)
    : cfg(cfg_) {
  cfg.validate();
  switch (cfg.topology) {
    case Topology::kShared:
      v_to_vat = ProjectionHead<T>(cfg.video_head, d_v, hidden_dim(cfg, d_v), cfg.d_vat, rng);
      a_to_vat = ProjectionHead<T>(cfg.audio_head, d_a, hidden_dim(cfg, d_a), cfg.d_vat, rng);
      t_to_vat = ProjectionHead<T>(cfg.text_head, d_t, hidden_dim(cfg, d_t), cfg.d_vat, rng);
      break;
    case Topology::kDisjoint:
      v_to_va = ProjectionHead<T>(cfg.video_head, d_v, hidden_dim(cfg, d_v), cfg.d_va, rng);
      a_to_va = ProjectionHead<T>(cfg.audio_head, d_a, hidden_dim(cfg, d_a), cfg.d_va, rng);
      v_to_vt = ProjectionHead<T>(cfg.video_head, d_v, hidden_dim(cfg, d_v), cfg.d_vt, rng);
      t_to_vt = ProjectionHead<T>(cfg.text_head, d_t, hidden_dim(cfg, d_t), cfg.d_vt, rng);
      break;
    case Topology::kFac:
      v_to_va = ProjectionHead<T>(cfg.video_head, d_v, hidden_dim(cfg, d_v), cfg.d_va, rng);
      a_to_va = ProjectionHead<T>(cfg.audio_head, d_a, hidden_dim(cfg, d_a), cfg.d_va, rng);
      t_to_vat = ProjectionHead<T>(cfg.text_head, d_t, hidden_dim(cfg, d_t), cfg.d_vat, rng);
      va_to_vat = ProjectionHead<T>(cfg.fine_to_coarse_head, cfg.d_va, hidden_dim(cfg, cfg.d_va),
                                    cfg.d_vat, rng);
      break;
  }
}

template <class T>
int64_t ModalityGraph<T>::space_dim(SpaceId s) const {
  switch (s) {
    case SpaceId::kVa: return cfg.d_va;
    case SpaceId::kVt: return cfg.d_vt;
    case SpaceId::kVat: return cfg.d_vat;
  }
  return 0;
}

template <class T>
Tensor<T> ModalityGraph<T>::project_batch(const Tensor<T>& reps, Modality m, SpaceId s,
                                          bool train) {
  if (!cfg.reachable(m, s)) {
    throw TopologyError(std::string("pair (") + modality_name(m) + ", " + space_name(s) +
                        ") is unreachable in topology " + topology_name(cfg.topology));
  }
  check_shape(reps.rank() == 2, "project: reps must be [N, d_m], got " +
                                    shape_str(reps.shape()));
  Tensor<T> raw;
  switch (cfg.topology) {
    case Topology::kShared:
      raw = (m == Modality::kV   ? v_to_vat
             : m == Modality::kA ? a_to_vat
                                 : t_to_vat)
                .forward(reps, train);
      break;
    case Topology::kDisjoint:
      if (s == SpaceId::kVa) {
        raw = (m == Modality::kV ? v_to_va : a_to_va).forward(reps, train);
      } else {
        raw = (m == Modality::kV ? v_to_vt : t_to_vt).forward(reps, train);
      }
      break;
    case Topology::kFac:
      if (s == SpaceId::kVa) {
        raw = (m == Modality::kV ? v_to_va : a_to_va).forward(reps, train);
      } else if (m == Modality::kT) {
        raw = t_to_vat.forward(reps, train);
      } else {
        // Video/audio enter vat only through the fine space.
        Tensor<T> fine = (m == Modality::kV ? v_to_va : a_to_va).forward(reps, train);
        if (cfg.normalize_fine_before_coarse) fine = l2_normalize_rows(fine);
        raw = va_to_vat.forward(fine, train);
      }
      break;
  }
  return l2_normalize_rows(raw);
}

template <class T>
void ModalityGraph<T>::register_params(ParamMap<T>& pm) {
  switch (cfg.topology) {
    case Topology::kShared:
      v_to_vat.register_params(pm, "graph.v_to_vat");
      a_to_vat.register_params(pm, "graph.a_to_vat");
      t_to_vat.register_params(pm, "graph.t_to_vat");
      break;
    case Topology::kDisjoint:
      v_to_va.register_params(pm, "graph.v_to_va");
      a_to_va.register_params(pm, "graph.a_to_va");
      v_to_vt.register_params(pm, "graph.v_to_vt");
      t_to_vt.register_params(pm, "graph.t_to_vt");
      break;
    case Topology::kFac:
      v_to_va.register_params(pm, "graph.v_to_va");
      a_to_va.register_params(pm, "graph.a_to_va");
      t_to_vat.register_params(pm, "graph.t_to_vat");
      va_to_vat.register_params(pm, "graph.va_to_vat");
      break;
  }
}

template <class T>
JointEmbedding<T> project(const Tensor<T>& rep, Modality m, SpaceId s, ModalityGraph<T>& graph,
                          bool train) {
  check_shape(rep.rank() == 1, "project: rep must be rank 1, got " + shape_str(rep.shape()));
  Tensor<T> batch = reshape(rep, Shape{1, rep.size()});
  Tensor<T> z = graph.project_batch(batch, m, s, train);
  JointEmbedding<T> out;
  out.vector = reshape(z, Shape{z.dim(1)});
  out.modality = m;
  out.space = s;
  return out;
}

template <class T>
T similarity(const JointEmbedding<T>& z1, const JointEmbedding<T>& z2) {
  if (z1.space != z2.space) {
    throw TopologyError(std::string("similarity: space mismatch (") + space_name(z1.space) +
                        " vs " + space_name(z2.space) + ")");
  }
  check_shape(z1.vector.size() == z2.vector.size(), "similarity: dim mismatch");
  const T* a = z1.vector.ptr();
  const T* b = z2.vector.ptr();
  T acc = 0;
  for (int64_t i = 0; i < z1.vector.size(); ++i) acc += a[i] * b[i];
  return acc;
}

#define MMVC_INSTANTIATE_GRAPHS(T)                                                          \
  template struct ProjectionHead<T>;                                                        \
  template struct ModalityGraph<T>;                                                         \
  template JointEmbedding<T> project<T>(const Tensor<T>&, Modality, SpaceId,                \
                                        ModalityGraph<T>&, bool);                           \
  template T similarity<T>(const JointEmbedding<T>&, const JointEmbedding<T>&);

MMVC_INSTANTIATE_GRAPHS(float)
MMVC_INSTANTIATE_GRAPHS(double)

#undef MMVC_INSTANTIATE_GRAPHS

}  // namespace mmvc
