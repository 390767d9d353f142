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

// Modality graph topology contract: which (modality, space) pairs exist,
// which queries each topology can answer, and the structural plus numerical
// proof that fine-and-coarse video/audio coarse embeddings factor through
// the fine-to-coarse head.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <mmvc/graphs.hpp>
#include <mmvc/ops.hpp>
#include <mmvc/rng.hpp>
#include <mmvc/tensor.hpp>

namespace {

using namespace mmvc;

Tensor<double> random_tensor(const Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  double* p = t.mutable_data();
  for (int64_t i = 0; i < t.size(); ++i) p[i] = rng.uniform(-1.0, 1.0);
  return t;
}

GraphConfig config_for(Topology t) {
  GraphConfig gc;
  gc.topology = t;
  gc.d_va = 6;
  gc.d_vt = 5;
  gc.d_vat = 4;
  return gc;
}

ModalityGraph<double> graph_for(Topology t, uint64_t seed = 7) {
  Rng rng(seed);
  return ModalityGraph<double>(config_for(t), 10, 9, 8, rng);
}

int64_t rep_dim(Modality m) { return m == Modality::kV ? 10 : m == Modality::kA ? 9 : 8; }

}  // namespace

TEST_CASE("reachability table per topology") {
  const GraphConfig shared = config_for(Topology::kShared);
  const GraphConfig disjoint = config_for(Topology::kDisjoint);
  const GraphConfig fac = config_for(Topology::kFac);

  for (Modality m : {Modality::kV, Modality::kA, Modality::kT}) {
    CHECK(shared.reachable(m, SpaceId::kVat));
    CHECK_FALSE(shared.reachable(m, SpaceId::kVa));
    CHECK_FALSE(shared.reachable(m, SpaceId::kVt));
    CHECK(fac.reachable(m, SpaceId::kVat));
    CHECK_FALSE(fac.reachable(m, SpaceId::kVt));
    CHECK_FALSE(disjoint.reachable(m, SpaceId::kVat));
  }
  // Disjoint: audio never meets text.
  CHECK(disjoint.reachable(Modality::kV, SpaceId::kVa));
  CHECK(disjoint.reachable(Modality::kA, SpaceId::kVa));
  CHECK(disjoint.reachable(Modality::kV, SpaceId::kVt));
  CHECK(disjoint.reachable(Modality::kT, SpaceId::kVt));
  CHECK_FALSE(disjoint.reachable(Modality::kA, SpaceId::kVt));
  CHECK_FALSE(disjoint.reachable(Modality::kT, SpaceId::kVa));
  // Fac: text stays out of the fine space.
  CHECK(fac.reachable(Modality::kV, SpaceId::kVa));
  CHECK(fac.reachable(Modality::kA, SpaceId::kVa));
  CHECK_FALSE(fac.reachable(Modality::kT, SpaceId::kVa));

  CHECK(shared.reachable_pairs().size() == 3);
  CHECK(disjoint.reachable_pairs().size() == 4);
  CHECK(fac.reachable_pairs().size() == 5);
}

TEST_CASE("project_batch rejects unreachable pairs with TopologyError") {
  ModalityGraph<double> disjoint = graph_for(Topology::kDisjoint);
  Rng rng(11);
  Tensor<double> a_rep = random_tensor(Shape{2, rep_dim(Modality::kA)}, rng);
  Tensor<double> t_rep = random_tensor(Shape{2, rep_dim(Modality::kT)}, rng);
  CHECK_THROWS_AS(disjoint.project_batch(a_rep, Modality::kA, SpaceId::kVt, false),
                  TopologyError);
  CHECK_THROWS_AS(disjoint.project_batch(t_rep, Modality::kT, SpaceId::kVa, false),
                  TopologyError);
  CHECK_THROWS_AS(disjoint.project_batch(a_rep, Modality::kA, SpaceId::kVat, false),
                  TopologyError);

  ModalityGraph<double> fac = graph_for(Topology::kFac);
  CHECK_THROWS_AS(fac.project_batch(t_rep, Modality::kT, SpaceId::kVa, false), TopologyError);
  CHECK_THROWS_AS(fac.project_batch(t_rep, Modality::kT, SpaceId::kVt, false), TopologyError);
}

TEST_CASE("disjoint has no space shared by audio and text; similarity guards spaces") {
  const GraphConfig disjoint = config_for(Topology::kDisjoint);
  for (SpaceId s : {SpaceId::kVa, SpaceId::kVt, SpaceId::kVat}) {
    const bool shared_by_both =
        disjoint.reachable(Modality::kA, s) && disjoint.reachable(Modality::kT, s);
    CHECK_FALSE(shared_by_both);
  }

  // Cross-space similarity is a type error, not a number.
  ModalityGraph<double> g = graph_for(Topology::kDisjoint);
  Rng rng(13);
  JointEmbedding<double> za =
      project(random_tensor(Shape{rep_dim(Modality::kA)}, rng), Modality::kA, SpaceId::kVa, g);
  JointEmbedding<double> zt =
      project(random_tensor(Shape{rep_dim(Modality::kT)}, rng), Modality::kT, SpaceId::kVt, g);
  CHECK_THROWS_AS(similarity(za, zt), TopologyError);
}

TEST_CASE("fac and shared answer text-to-audio queries") {
  for (Topology t : {Topology::kShared, Topology::kFac}) {
    const GraphConfig gc = config_for(t);
    CHECK(gc.reachable(Modality::kT, SpaceId::kVat));
    CHECK(gc.reachable(Modality::kA, SpaceId::kVat));

    ModalityGraph<double> g = graph_for(t);
    Rng rng(17);
    JointEmbedding<double> za = project(random_tensor(Shape{rep_dim(Modality::kA)}, rng),
                                        Modality::kA, SpaceId::kVat, g);
    JointEmbedding<double> zt = project(random_tensor(Shape{rep_dim(Modality::kT)}, rng),
                                        Modality::kT, SpaceId::kVat, g);
    const double sim = similarity(zt, za);
    CHECK(std::isfinite(sim));
    CHECK(std::fabs(sim) <= 1.0 + 1e-12);
  }
}

TEST_CASE("fac coarse embeddings factor through the fine-to-coarse head") {
  for (const bool norm_fine : {false, true}) {
    GraphConfig gc = config_for(Topology::kFac);
    gc.normalize_fine_before_coarse = norm_fine;
    Rng rng(19);
    ModalityGraph<double> g(gc, 10, 9, 8, rng);

    // Structural: no direct video/audio head into the coarse space exists.
    CHECK(g.v_to_vat.lin1.weight.size() == 0);
    CHECK(g.a_to_vat.lin1.weight.size() == 0);
    CHECK(g.va_to_vat.lin1.weight.size() > 0);

    Rng drng(23);
    for (Modality m : {Modality::kV, Modality::kA}) {
      Tensor<double> reps = random_tensor(Shape{4, rep_dim(m)}, drng);
      const Tensor<double> direct = g.project_batch(reps, m, SpaceId::kVat, false);

      // Manual composition of the two published maps.
      Tensor<double> fine =
          (m == Modality::kV ? g.v_to_va : g.a_to_va).forward(reps, false);
      if (norm_fine) fine = l2_normalize_rows(fine);
      const Tensor<double> composed = l2_normalize_rows(g.va_to_vat.forward(fine, false));

      REQUIRE(direct.shape() == composed.shape());
      for (int64_t i = 0; i < direct.size(); ++i) {
        CHECK(std::fabs(direct.at(i) - composed.at(i)) < 1e-6);
      }
    }
  }
}

TEST_CASE("fac registers no direct video/audio-to-coarse parameters") {
  ModalityGraph<double> g = graph_for(Topology::kFac);
  ParamMap<double> pm;
  g.register_params(pm);
  bool has_fine = false, has_coarse_map = false;
  for (const auto& e : pm.entries()) {
    // Full prefixes: "a_to_vat" alone would also match inside "va_to_vat".
    CHECK(e.name.find("graph.v_to_vat") == std::string::npos);
    CHECK(e.name.find("graph.a_to_vat") == std::string::npos);
    if (e.name.find("graph.v_to_va.") != std::string::npos) has_fine = true;
    if (e.name.find("graph.va_to_vat.") != std::string::npos) has_coarse_map = true;
  }
  CHECK(has_fine);
  CHECK(has_coarse_map);
}

TEST_CASE("projections are unit rows of the right dimension") {
  for (Topology t : {Topology::kShared, Topology::kDisjoint, Topology::kFac}) {
    ModalityGraph<double> g = graph_for(t);
    Rng rng(29);
    for (const auto& [m, s] : g.cfg.reachable_pairs()) {
      Tensor<double> reps = random_tensor(Shape{3, rep_dim(m)}, rng);
      const Tensor<double> z = g.project_batch(reps, m, s, false);
      REQUIRE(z.dim(0) == 3);
      REQUIRE(z.dim(1) == g.space_dim(s));
      for (int64_t i = 0; i < 3; ++i) {
        double n2 = 0.0;
        for (int64_t j = 0; j < z.dim(1); ++j) n2 += z.at(i * z.dim(1) + j) * z.at(i * z.dim(1) + j);
        CHECK(n2 == doctest::Approx(1.0).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("graph construction is deterministic in the seed") {
  ModalityGraph<double> g1 = graph_for(Topology::kFac, 99);
  ModalityGraph<double> g2 = graph_for(Topology::kFac, 99);
  ParamMap<double> p1, p2;
  g1.register_params(p1);
  g2.register_params(p2);
  REQUIRE(p1.entries().size() == p2.entries().size());
  for (size_t k = 0; k < p1.entries().size(); ++k) {
    CHECK(p1.entries()[k].name == p2.entries()[k].name);
    const Tensor<double>* a = p1.entries()[k].tensor;
    const Tensor<double>* b = p2.entries()[k].tensor;
    REQUIRE(a->size() == b->size());
    for (int64_t i = 0; i < a->size(); ++i) CHECK(a->at(i) == b->at(i));
  }
}

TEST_CASE("loss spaces per topology") {
  CHECK(va_loss_space(Topology::kShared) == SpaceId::kVat);
  CHECK(va_loss_space(Topology::kDisjoint) == SpaceId::kVa);
  CHECK(va_loss_space(Topology::kFac) == SpaceId::kVa);
  CHECK(vt_loss_space(Topology::kShared) == SpaceId::kVat);
  CHECK(vt_loss_space(Topology::kDisjoint) == SpaceId::kVt);
  CHECK(vt_loss_space(Topology::kFac) == SpaceId::kVat);
}

TEST_CASE("names round-trip and config validates") {
  for (Topology t : {Topology::kShared, Topology::kDisjoint, Topology::kFac}) {
    CHECK(parse_topology(topology_name(t)) == t);
  }
  for (Modality m : {Modality::kV, Modality::kA, Modality::kT}) {
    CHECK(parse_modality(modality_name(m)) == m);
  }
  for (SpaceId s : {SpaceId::kVa, SpaceId::kVt, SpaceId::kVat}) {
    CHECK(parse_space(space_name(s)) == s);
  }
  CHECK(parse_head_kind(head_kind_name(HeadKind::kNonlinear)) == HeadKind::kNonlinear);
  CHECK_THROWS_AS(parse_topology("ring"), ConfigError);

  GraphConfig bad;
  bad.d_va = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  GraphConfig neg;
  neg.head_hidden = -1;
  CHECK_THROWS_AS(neg.validate(), Error);
}
