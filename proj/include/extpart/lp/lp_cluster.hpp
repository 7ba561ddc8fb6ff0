// Copyright 2026 The extpart Authors
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

#include <cstdint>
#include <vector>

#include "extpart/common.hpp"
#include "extpart/graph/disk_graph.hpp"
#include "extpart/lp/best_move.hpp"
#include "extpart/lp/external.hpp"
#include "extpart/lp/semi_external.hpp"

namespace extpart {

enum class Model { kSemiExternal, kExternal };

enum class LpVariant {
  kSequential,  // se_lp_round / ext_lp_round
  kParallel,    // par_se_lp_round (semi-external only)
  kActive,      // active-nodes rounds
};

struct LpConfig {
  std::uint64_t rounds = 3;
  Weight constraint = kUnbounded;  // size bound U
  Model model = Model::kSemiExternal;
  LpVariant variant = LpVariant::kSequential;
  std::size_t workers = 1;
  TieBreaker tie_break{};
};

/// A clustering either resident in memory (semi-external model) or as a
/// node-sorted external array of (node, cluster) pairs (external model).
struct ClusterAssignment {
  Model mode = Model::kSemiExternal;
  std::vector<ClusterId> memory;
  em::ExternalArray<em::NodeValue> external;

  std::vector<ClusterId> to_vector() const {
    if (mode == Model::kSemiExternal) return memory;
    std::vector<ClusterId> out;
    out.reserve(external.size());
    external.scan([&](const em::NodeValue& p) { out.push_back(p.value); });
    return out;
  }
};

struct LpResult {
  ClusterAssignment assignment;
  std::uint64_t rounds_run = 0;
  std::vector<LpStats> per_round;
  LpStats total() const {
    LpStats t;
    for (const auto& s : per_round) t += s;
    return t;
  }
};

/// Runs `rounds` rounds of the selected LP variant, stopping early after a
/// round without moves. Rounds are numbered from 1. A size constraint is only
/// available in the semi-external model; externally, size-constrained
/// clustering is the coloring-based bucket algorithm.
inline LpResult lp_cluster(const DiskGraph& g, const LpConfig& cfg) {
  LpResult res;
  res.assignment.mode = cfg.model;
  if (cfg.model == Model::kExternal) {
    if (cfg.constraint != kUnbounded) {
      throw ParameterError(
          "external label propagation has no size constraint; use the coloring-based "
          "bucket clustering for size-constrained external clustering");
    }
    if (cfg.variant == LpVariant::kParallel) {
      throw ParameterError("parallel label propagation exists only in the semi-external model");
    }
    em::Context& ctx = g.context();
    auto assignment = identity_assignment(ctx, g.n());
    if (cfg.variant == LpVariant::kActive) {
      ExternalActiveState st(g, std::move(assignment), queue_memory(ctx, 2, 6));
      for (std::uint64_t r = 1; r <= cfg.rounds; ++r) {
        res.per_round.push_back(ext_active_lp_round(g, st, cfg.tie_break, r));
        ++res.rounds_run;
        if (res.per_round.back().moves == 0) break;
      }
      res.assignment.external = std::move(st.assignment);
      return res;
    }
    const std::size_t bytes = queue_memory(ctx, 2, 6);
    LpQueue cur(ctx, bytes), nxt(ctx, bytes);
    if (cfg.rounds > 0) seed_ext_lp(g, assignment, cur);
    for (std::uint64_t r = 1; r <= cfg.rounds; ++r) {
      res.per_round.push_back(ext_lp_round(g, assignment, cur, nxt, cfg.tie_break, r));
      ++res.rounds_run;
      if (res.per_round.back().moves == 0) break;
    }
    res.assignment.external = std::move(assignment);
    return res;
  }

  ClusterState s = ClusterState::singletons(g);
  ActiveSet act;
  if (cfg.variant == LpVariant::kActive) act = ActiveSet::all(g.n());
  for (std::uint64_t r = 1; r <= cfg.rounds; ++r) {
    LpStats st;
    switch (cfg.variant) {
      case LpVariant::kSequential:
        st = se_lp_round(g, s, cfg.constraint, cfg.tie_break, r);
        break;
      case LpVariant::kParallel:
        st = par_se_lp_round(g, s, cfg.constraint, cfg.tie_break, r, {cfg.workers, false});
        break;
      case LpVariant::kActive:
        st = active_lp_round(g, s, cfg.constraint, cfg.tie_break, r, act);
        break;
    }
    res.per_round.push_back(st);
    ++res.rounds_run;
    if (st.moves == 0) break;
  }
  res.assignment.memory = std::move(s.cluster);
  return res;
}

}  // namespace extpart
