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

#include <algorithm>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "extpart/common.hpp"
#include "extpart/em/external_array.hpp"
#include "extpart/em/sort.hpp"
#include "extpart/graph/builder.hpp"
#include "extpart/graph/disk_graph.hpp"
#include "extpart/lp/external.hpp"
#include "extpart/lp/lp_cluster.hpp"

namespace extpart {

/// Fine-to-coarse node mapping with dense coarse IDs 0..coarse_n-1. Resident
/// in memory (semi-external model) or a node-sorted external array of
/// (fine node, coarse node) pairs (external model).
struct ContractionMap {
  Model mode = Model::kSemiExternal;
  std::vector<NodeId> memory;
  em::ExternalArray<em::NodeValue> external;
  NodeId coarse_n = 0;
  em::MemoryBudget::Reservation reservation;  // for `memory`

  NodeId fine_n() const {
    return mode == Model::kSemiExternal ? memory.size() : external.size();
  }

  std::vector<NodeId> to_vector() const {
    if (mode == Model::kSemiExternal) return memory;
    std::vector<NodeId> out;
    out.reserve(external.size());
    external.scan([&](const em::NodeValue& p) { out.push_back(p.value); });
    return out;
  }
};

/// Dense renumbering with a resident array over the cluster-ID space: IDs
/// are assigned in increasing order of the original cluster ID. No external
/// I/O.
inline ContractionMap renumber_semi_external(em::Context& ctx,
                                             std::span<const ClusterId> assignment) {
  ClusterId max_id = 0;
  for (ClusterId c : assignment) max_id = std::max(max_id, c);
  const std::size_t space = assignment.empty() ? 0 : max_id + 1;
  auto scratch = ctx.budget().reserve(8 * space, "renumbering table");
  std::vector<NodeId> dense(space, kSentinel);
  for (ClusterId c : assignment) dense[c] = 0;
  ContractionMap map;
  map.mode = Model::kSemiExternal;
  for (auto& d : dense) {
    if (d != kSentinel) d = map.coarse_n++;
  }
  map.reservation = ctx.budget().reserve(8 * assignment.size(), "contraction map");
  map.memory.resize(assignment.size());
  for (std::size_t v = 0; v < assignment.size(); ++v) map.memory[v] = dense[assignment[v]];
  return map;
}

/// External renumbering: sort the (node, cluster) pairs by cluster, assign
/// dense IDs in one scan, sort back by node. Sort(n) I/Os.
inline ContractionMap renumber_external(em::Context& ctx,
                                        const em::ExternalArray<em::NodeValue>& assignment) {
  auto by_cluster = em::external_sort(
      assignment,
      [](const em::NodeValue& a, const em::NodeValue& b) {
        return a.value != b.value ? a.value < b.value : a.node < b.node;
      },
      "renumber-by-cluster");
  auto dense = em::ExternalArray<em::NodeValue>::temporary(ctx, "renumber-dense");
  ContractionMap map;
  map.mode = Model::kExternal;
  {
    auto w = dense.writer();
    bool first = true;
    ClusterId last = 0;
    by_cluster.scan([&](const em::NodeValue& p) {
      if (first || p.value != last) {
        if (!first) ++map.coarse_n;
        first = false;
        last = p.value;
      }
      w.push({p.node, map.coarse_n});
    });
    if (!first) ++map.coarse_n;
  }
  by_cluster = em::ExternalArray<em::NodeValue>();
  map.external = em::external_sort(
      dense, [](const em::NodeValue& a, const em::NodeValue& b) { return a.node < b.node; },
      "renumber-by-node");
  return map;
}

/// Renumbers an assignment in the model it is stored in.
inline ContractionMap renumber(em::Context& ctx, const ClusterAssignment& assignment) {
  return assignment.mode == Model::kSemiExternal
             ? renumber_semi_external(ctx, assignment.memory)
             : renumber_external(ctx, assignment.external);
}

namespace internal {

inline void check_map(const DiskGraph& g, const ContractionMap& map) {
  if (map.fine_n() != g.n()) {
    throw DimensionError(detail::concat("contraction map has ", map.fine_n(),
                                        " entries for n=", g.n()));
  }
  if (g.n() > 0 && map.coarse_n == 0) {
    throw IntegrityError("contraction map of a non-empty graph has no coarse nodes");
  }
}

inline em::ExternalArray<em::NodeValue> external_map(em::Context& ctx,
                                                     const ContractionMap& map) {
  auto a = em::ExternalArray<em::NodeValue>::temporary(ctx, "contraction-map");
  auto w = a.writer();
  for (NodeId v = 0; v < map.memory.size(); ++v) w.push({v, map.memory[v]});
  w.close();
  return a;
}

}  // namespace internal

/// Quotient graph by sorting. Every edge slot (u, v, w) becomes the triple
/// (map[u], map[v], w) (the target side through a sort-based join); pairs
/// inside one coarse node are dropped, the rest are sorted lexicographically
/// and parallel triples merged by summing weights. Coarse node weights are
/// the sums of the fine ones (one more sort of n pairs). O(Sort(m)) I/Os.
inline DiskGraph contract_external(const DiskGraph& g, const ContractionMap& map) {
  internal::check_map(g, map);
  em::Context& ctx = g.context();
  em::ExternalArray<em::NodeValue> converted;
  if (map.mode == Model::kSemiExternal) converted = internal::external_map(ctx, map);
  const auto& fine_to_coarse = map.mode == Model::kSemiExternal ? converted : map.external;

  auto annotated = annotate_targets(g, fine_to_coarse);
  auto arcs = em::ExternalArray<Arc>::temporary(ctx, "contract-arcs");
  auto weighted = em::ExternalArray<em::NodeValue>::temporary(ctx, "contract-node-weights");
  {
    auto aw = arcs.writer();
    auto ww = weighted.writer();
    auto m = fine_to_coarse.reader();
    auto c = g.node_weights().reader();
    auto e = annotated.reader();
    for (NodeId u = 0; u < g.n(); ++u) {
      const NodeId cu = m.peek().value;
      if (m.peek().node != u || cu >= map.coarse_n) {
        throw IntegrityError(detail::concat("contraction map entry ", m.peek().node, "->", cu,
                                            " is invalid at node ", u));
      }
      m.advance();
      ww.push({cu, c.peek()});
      c.advance();
      for (;;) {
        const AnnotatedEdge r = e.peek();
        e.advance();
        if (r.is_sentinel()) break;
        if (r.value != cu) aw.push({cu, r.value, r.weight});
      }
    }
  }
  annotated = em::ExternalArray<AnnotatedEdge>();

  auto by_coarse = em::external_sort(
      weighted, [](const em::NodeValue& a, const em::NodeValue& b) { return a.node < b.node; },
      "contract-node-weights");
  weighted = em::ExternalArray<em::NodeValue>();
  auto coarse_weights = em::ExternalArray<Weight>::temporary(ctx, "graph-node-weights");
  {
    auto w = coarse_weights.writer();
    NodeId next = 0;
    Weight sum = 0;
    by_coarse.scan([&](const em::NodeValue& p) {
      if (p.node != next) {
        if (p.node != next + 1) {
          throw IntegrityError(detail::concat("contraction map is not dense: coarse node ",
                                              next + 1, " has no fine node"));
        }
        w.push(sum);
        sum = 0;
        next = p.node;
      }
      sum += p.value;
    });
    if (g.n() > 0) w.push(sum);
    if (g.n() > 0 && next + 1 != map.coarse_n) {
      throw IntegrityError(detail::concat("contraction map is not dense: coarse nodes above ",
                                          next, " have no fine node"));
    }
  }
  return internal::assemble(ctx, map.coarse_n, arcs, std::move(coarse_weights),
                            g.total_node_weight(), /*check_symmetry=*/false);
}

/// Bytes charged per distinct coarse edge slot by contract_semi_external: a
/// hash-table node with its bucket pointer plus the sorted output entry.
inline constexpr std::size_t kContractBytesPerPair = 64 + sizeof(Arc);

/// Quotient graph with one edge scan: coarse pairs (map[u], map[v]) are
/// accumulated in an in-memory hash table, then laid out in sorted order.
/// Produces exactly the arrays of contract_external. Scan(m) reads and no
/// sorting I/O. Throws ConfigError, before exceeding the budget, when the
/// coarse edge set does not fit; callers then fall back to contract_external.
inline DiskGraph contract_semi_external(const DiskGraph& g, const ContractionMap& map) {
  internal::check_map(g, map);
  em::Context& ctx = g.context();
  std::vector<NodeId> loaded;
  em::MemoryBudget::Reservation loaded_memory;
  if (map.mode == Model::kExternal) {
    loaded_memory = ctx.budget().reserve(8 * g.n(), "contraction map");
    loaded = map.to_vector();
  }
  const std::vector<NodeId>& fine_to_coarse =
      map.mode == Model::kSemiExternal ? map.memory : loaded;

  struct PairHash {
    std::size_t operator()(const std::pair<NodeId, NodeId>& p) const {
      std::uint64_t h = p.first * 0x9E3779B97F4A7C15ULL ^ (p.second + 0x632BE59BD9B4E019ULL);
      h ^= h >> 29;
      return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ULL);
    }
  };
  auto weights_memory = ctx.budget().reserve(8 * map.coarse_n, "coarse node weights");
  std::vector<Weight> coarse_weight(map.coarse_n, 0);
  auto table_memory = ctx.budget().reserve(0, "coarse edge table");
  std::unordered_map<std::pair<NodeId, NodeId>, Weight, PairHash> table;
  std::size_t charged_pairs = 0;
  for_each_adjacency(g, [&](NodeId u, Weight c, std::span<const EdgeRecord> list) {
    const NodeId cu = fine_to_coarse[u];
    if (cu >= map.coarse_n) {
      throw IntegrityError(detail::concat("contraction map sends node ", u, " to ", cu,
                                          " >= n'=", map.coarse_n));
    }
    coarse_weight[cu] += c;
    for (const auto& e : list) {
      const NodeId cv = fine_to_coarse[e.target];
      if (cv == cu) continue;
      auto [it, inserted] = table.try_emplace({cu, cv}, 0);
      it->second += e.weight;
      if (inserted && table.size() > charged_pairs) {
        const std::size_t want = std::max<std::size_t>(1024, 2 * charged_pairs);
        const std::size_t extra = (want - charged_pairs) * kContractBytesPerPair;
        if (extra > ctx.budget().available()) {
          throw ConfigError(detail::concat("coarse edge set exceeds the memory budget after ",
                                           table.size(), " pairs"));
        }
        table_memory.resize(want * kContractBytesPerPair, "coarse edge table");
        charged_pairs = want;
      }
    }
  });
  for (NodeId c = 0; c < map.coarse_n; ++c) {
    if (coarse_weight[c] == 0) {
      throw IntegrityError(detail::concat("contraction map is not dense: coarse node ", c,
                                          " has no fine node"));
    }
  }

  std::vector<Arc> arcs;
  arcs.reserve(table.size());
  for (const auto& [key, w] : table) arcs.push_back({key.first, key.second, w});
  table = {};
  std::sort(arcs.begin(), arcs.end(), internal::arc_less);

  auto edges = em::ExternalArray<EdgeRecord>::temporary(ctx, "graph-edges");
  auto offsets = em::ExternalArray<std::uint64_t>::temporary(ctx, "graph-offsets");
  {
    auto ew = edges.writer();
    auto ow = offsets.writer();
    std::uint64_t records = 0;
    std::size_t i = 0;
    for (NodeId u = 0; u < map.coarse_n; ++u) {
      ow.push(records);
      for (; i < arcs.size() && arcs[i].source == u; ++i) {
        ew.push({arcs[i].target, arcs[i].weight});
        ++records;
      }
      ew.push(EdgeRecord::sentinel());
      ++records;
    }
  }
  auto node_weights = em::ExternalArray<Weight>::from_span(
      ctx, std::span<const Weight>(coarse_weight), "graph-node-weights");
  return DiskGraph(map.coarse_n, arcs.size() / 2, g.total_node_weight(), std::move(edges),
                   std::move(offsets), std::move(node_weights));
}

}  // namespace extpart
