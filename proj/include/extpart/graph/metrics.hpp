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
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "extpart/common.hpp"
#include "extpart/em/external_array.hpp"
#include "extpart/em/sort.hpp"
#include "extpart/graph/disk_graph.hpp"

namespace extpart {

/// L_max = floor((1 + epsilon) * ceil(total / k)). Flooring never admits a
/// block the real-valued bound excludes; the small slack absorbs binary
/// rounding of products such as 1.15 * 100.
inline Weight l_max(Weight total, BlockId k, double epsilon) {
  if (k < 1) throw ParameterError("k must be at least 1");
  if (epsilon < 0) throw ParameterError("epsilon must be non-negative");
  const auto base = static_cast<double>(detail::ceil_div(total, k));
  return static_cast<Weight>(std::floor((1.0 + epsilon) * base + 1e-9));
}

struct Balance {
  Weight max_block_weight = 0;
  Weight l_max = 0;
  bool feasible = false;
  std::vector<Weight> block_weights;
};

inline void check_blocks(std::span<const BlockId> assignment, NodeId n, BlockId k) {
  if (assignment.size() != n) {
    throw DimensionError(detail::concat("assignment has ", assignment.size(),
                                        " entries for a graph with n=", n));
  }
  for (BlockId b : assignment) {
    if (b >= k) throw ParameterError(detail::concat("block ID ", b, " is outside [0, ", k, ")"));
  }
}

/// Cut weight with the assignment resident in memory: one edge scan.
inline Weight compute_cut(const DiskGraph& g, std::span<const BlockId> assignment) {
  if (assignment.size() != g.n()) {
    throw DimensionError(detail::concat("assignment has ", assignment.size(),
                                        " entries for a graph with n=", g.n()));
  }
  Weight twice = 0;
  NodeId u = 0;
  g.edges().scan([&](const EdgeRecord& r) {
    if (r.is_sentinel()) {
      ++u;
    } else if (assignment[u] != assignment[r.target]) {
      twice += r.weight;
    }
  });
  return twice / 2;
}

/// Cut weight with the assignment in an external array of node-sorted
/// (node, block) pairs. Joins each edge with both endpoint blocks by sorting
/// on the target: O(Sort(m)) I/Os and no random access.
inline Weight compute_cut_external(const DiskGraph& g,
                                   const em::ExternalArray<em::NodeValue>& assignment) {
  if (assignment.size() != g.n()) {
    throw DimensionError(detail::concat("assignment has ", assignment.size(),
                                        " entries for a graph with n=", g.n()));
  }
  em::Context& ctx = g.context();
  // (target, source block, weight)
  struct Half {
    NodeId target;
    BlockId source_block;
    Weight weight;
  };
  auto halves = em::ExternalArray<Half>::temporary(ctx, "cut-halves");
  {
    auto w = halves.writer();
    auto a = assignment.reader();
    auto e = g.edges().reader();
    for (NodeId u = 0; u < g.n(); ++u) {
      if (a.peek().node != u) {
        throw IntegrityError(detail::concat("assignment is not node-sorted at node ", u));
      }
      const BlockId bu = a.peek().value;
      a.advance();
      for (;;) {
        const EdgeRecord r = e.peek();
        e.advance();
        if (r.is_sentinel()) break;
        w.push({r.target, bu, r.weight});
      }
    }
  }
  auto sorted = em::external_sort(
      halves, [](const Half& x, const Half& y) { return x.target < y.target; }, "cut-halves");
  halves = em::ExternalArray<Half>();
  Weight twice = 0;
  auto h = sorted.reader();
  auto a = assignment.reader();
  while (h.has_next()) {
    while (a.peek().node < h.peek().target) a.advance();
    if (h.peek().source_block != a.peek().value) twice += h.peek().weight;
    h.advance();
  }
  return twice / 2;
}

/// Block weights (sum of c(v) per block) and L_max feasibility. The balance
/// constraint is on node weight, which equals the node count for unit
/// weights. I/O: Scan(n).
inline Balance compute_balance(const DiskGraph& g, std::span<const BlockId> assignment, BlockId k,
                               double epsilon) {
  if (k < 2) throw ParameterError(detail::concat("k must be at least 2, got ", k));
  check_blocks(assignment, g.n(), k);
  Balance b;
  b.block_weights.assign(k, 0);
  NodeId v = 0;
  g.node_weights().scan([&](Weight c) { b.block_weights[assignment[v++]] += c; });
  b.l_max = l_max(g.total_node_weight(), k, epsilon);
  b.max_block_weight = *std::max_element(b.block_weights.begin(), b.block_weights.end());
  b.feasible = b.max_block_weight <= b.l_max;
  return b;
}

/// External-assignment variant: co-scans node weights and the node-sorted
/// assignment (k counters stay in memory).
inline Balance compute_balance_external(const DiskGraph& g,
                                        const em::ExternalArray<em::NodeValue>& assignment,
                                        BlockId k, double epsilon) {
  if (k < 2) throw ParameterError(detail::concat("k must be at least 2, got ", k));
  if (assignment.size() != g.n()) {
    throw DimensionError(detail::concat("assignment has ", assignment.size(),
                                        " entries for a graph with n=", g.n()));
  }
  Balance b;
  b.block_weights.assign(k, 0);
  auto a = assignment.reader();
  g.node_weights().scan([&](Weight c) {
    if (a.peek().value >= k) {
      throw ParameterError(detail::concat("block ID ", a.peek().value, " is outside [0, ", k,
                                          ")"));
    }
    b.block_weights[a.peek().value] += c;
    a.advance();
  });
  b.l_max = l_max(g.total_node_weight(), k, epsilon);
  b.max_block_weight = *std::max_element(b.block_weights.begin(), b.block_weights.end());
  b.feasible = b.max_block_weight <= b.l_max;
  return b;
}

}  // namespace extpart
