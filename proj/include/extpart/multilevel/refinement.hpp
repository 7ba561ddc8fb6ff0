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
#include <span>
#include <vector>

#include "extpart/coloring/bucket.hpp"
#include "extpart/coloring/coloring.hpp"
#include "extpart/common.hpp"
#include "extpart/em/external_array.hpp"
#include "extpart/em/sort.hpp"
#include "extpart/graph/disk_graph.hpp"
#include "extpart/graph/metrics.hpp"
#include "extpart/lp/lp_cluster.hpp"
#include "extpart/lp/semi_external.hpp"
#include "extpart/multilevel/contraction.hpp"

namespace extpart {

/// A k-partition stored like a clustering: resident block IDs or a
/// node-sorted external array of (node, block) pairs.
using Partition = ClusterAssignment;

inline Partition memory_partition(std::vector<BlockId> blocks) {
  Partition p;
  p.mode = Model::kSemiExternal;
  p.memory = std::move(blocks);
  return p;
}

inline Partition external_partition(em::Context& ctx, std::span<const BlockId> blocks) {
  Partition p;
  p.mode = Model::kExternal;
  p.external = em::ExternalArray<em::NodeValue>::temporary(ctx, "partition");
  auto w = p.external.writer();
  for (NodeId v = 0; v < blocks.size(); ++v) w.push({v, blocks[v]});
  w.close();
  return p;
}

inline NodeId partition_size(const Partition& p) {
  return p.mode == Model::kSemiExternal ? p.memory.size() : p.external.size();
}

/// Cut of a partition in either representation.
inline Weight partition_cut(const DiskGraph& g, const Partition& p) {
  return p.mode == Model::kSemiExternal ? compute_cut(g, p.memory)
                                        : compute_cut_external(g, p.external);
}

inline Balance partition_balance(const DiskGraph& g, const Partition& p, BlockId k,
                                 double epsilon) {
  return p.mode == Model::kSemiExternal ? compute_balance(g, p.memory, k, epsilon)
                                        : compute_balance_external(g, p.external, k, epsilon);
}

/// Transfers a partition of the coarse graph to the finer graph:
/// block[v] = coarse_block[map[v]]. The result uses the map's model. The
/// semi-external composition is a resident lookup without external I/O; the
/// external one joins through two sorts (fine nodes grouped by coarse node,
/// then back by fine node), Sort(n) I/Os. A coarse ID with no coarse block
/// raises IntegrityError.
inline Partition project(const Partition& coarse, const ContractionMap& map) {
  const NodeId coarse_n = partition_size(coarse);
  if (map.mode == Model::kSemiExternal) {
    const std::vector<BlockId> cb = coarse.to_vector();
    Partition out;
    out.mode = Model::kSemiExternal;
    out.memory.resize(map.memory.size());
    for (NodeId v = 0; v < map.memory.size(); ++v) {
      const NodeId c = map.memory[v];
      if (c >= coarse_n) {
        throw IntegrityError(detail::concat("node ", v, " maps to coarse node ", c,
                                            " but the coarse partition has ", coarse_n,
                                            " entries"));
      }
      out.memory[v] = cb[c];
    }
    return out;
  }

  em::Context& ctx = map.external.context();
  em::ExternalArray<em::NodeValue> converted;
  if (coarse.mode == Model::kSemiExternal) {
    converted = external_partition(ctx, coarse.memory).external;
  }
  const auto& coarse_blocks = coarse.mode == Model::kSemiExternal ? converted : coarse.external;

  // (coarse, fine) pairs grouped by coarse node.
  auto flipped = em::ExternalArray<em::NodeValue>::temporary(ctx, "project-flipped");
  {
    auto w = flipped.writer();
    map.external.scan([&](const em::NodeValue& p) { w.push({p.value, p.node}); });
  }
  auto by_coarse = em::external_sort(
      flipped,
      [](const em::NodeValue& a, const em::NodeValue& b) {
        return a.node != b.node ? a.node < b.node : a.value < b.value;
      },
      "project-by-coarse");
  flipped = em::ExternalArray<em::NodeValue>();
  auto joined = em::ExternalArray<em::NodeValue>::temporary(ctx, "project-joined");
  {
    auto w = joined.writer();
    auto cb = coarse_blocks.reader();
    by_coarse.scan([&](const em::NodeValue& p) {
      while (cb.has_next() && cb.peek().node < p.node) cb.advance();
      if (!cb.has_next() || cb.peek().node != p.node) {
        throw IntegrityError(detail::concat("node ", p.value, " maps to coarse node ", p.node,
                                            " which has no block"));
      }
      w.push({p.value, cb.peek().value});
    });
  }
  by_coarse = em::ExternalArray<em::NodeValue>();
  Partition out;
  out.mode = Model::kExternal;
  out.external = em::external_sort(
      joined, [](const em::NodeValue& a, const em::NodeValue& b) { return a.node < b.node; },
      "project-by-fine");
  return out;
}

struct RefineConfig {
  BlockId k = 2;
  double epsilon = 0.03;
  std::uint64_t rounds = 3;
  std::size_t workers = 1;           // semi-external: > 1 selects the parallel round
  SizeMode bucket_mode = SizeMode::kMap;  // external: map or priority-queue variant
  std::uint64_t class_bound = 0;     // external: 0 selects default_coloring
  TieBreaker tie_break{};
};

struct RefineResult {
  Partition partition;
  std::uint64_t rounds_run = 0;
  LpStats stats;
};

/// Size-constrained LP on a feasible k-partition: clusters are the blocks,
/// the constraint is L_max in node weight and moves go only to existing
/// blocks. A node moves only for a strictly larger connection, so the cut
/// never increases, and the size bound keeps the partition feasible. The
/// semi-external model runs se_lp_round (par_se_lp_round with gain
/// re-validation for several workers); the external model runs bucket rounds
/// with the blocks as initial clusters. Stops early after a round without
/// moves. An infeasible input raises ParameterError.
inline RefineResult refine_level(const DiskGraph& g, const Partition& p, const RefineConfig& cfg) {
  const Balance before = partition_balance(g, p, cfg.k, cfg.epsilon);
  if (!before.feasible) {
    throw ParameterError(detail::concat("refinement needs a feasible partition: heaviest block ",
                                        before.max_block_weight, " > L_max=", before.l_max));
  }
  RefineResult res;
  res.partition.mode = p.mode;
  if (p.mode == Model::kSemiExternal) {
    ClusterState s = ClusterState::from_assignment(g, p.memory, cfg.k);
    for (std::uint64_t r = 1; r <= cfg.rounds; ++r) {
      const LpStats st = cfg.workers > 1
                             ? par_se_lp_round(g, s, before.l_max, cfg.tie_break, r,
                                               {cfg.workers, /*revalidate_gain=*/true})
                             : se_lp_round(g, s, before.l_max, cfg.tie_break, r);
      res.stats += st;
      ++res.rounds_run;
      if (st.moves == 0) break;
    }
    res.partition.memory = std::move(s.cluster);
    return res;
  }
  if (cfg.bucket_mode == SizeMode::kUnconstrained) {
    throw ParameterError("refinement needs the map or priority-queue bucket variant");
  }
  BucketClustering bc(g,
                      cfg.class_bound != 0 ? tfp_greedy_coloring(g, cfg.class_bound)
                                           : default_coloring(g, cfg.bucket_mode),
                      cfg.bucket_mode, before.l_max,
                      cfg.tie_break, &p.external, cfg.k);
  for (std::uint64_t r = 1; r <= cfg.rounds; ++r) {
    const BucketRoundStats st = bc.round(r);
    res.stats += st.lp;
    ++res.rounds_run;
    if (st.lp.moves == 0) break;
  }
  bc.close();
  res.partition.external = bc.assignment();
  return res;
}

}  // namespace extpart
