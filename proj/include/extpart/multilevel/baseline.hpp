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
#include <numeric>
#include <vector>

#include "extpart/common.hpp"
#include "extpart/graph/memory_graph.hpp"
#include "extpart/graph/metrics.hpp"
#include "extpart/lp/best_move.hpp"
#include "extpart/multilevel/initial.hpp"

namespace extpart {

/// Single-level reference partitioner working entirely in memory, used to
/// judge the multilevel pipeline: size-constrained LP clustering from
/// singletons (bound L_max, node-ID order, `rounds` rounds), the clusters
/// packed into k blocks heaviest first (each into the currently lightest
/// block), rebalancing, and size-constrained LP refinement on the blocks.
/// Throws InfeasibleError if rebalancing fails.
inline std::vector<BlockId> constrained_lp_baseline(const MemoryGraph& g, BlockId k,
                                                    double epsilon, std::uint64_t seed,
                                                    std::uint64_t rounds = 10) {
  if (k < 2 || k > g.n) throw ParameterError(detail::concat("k=", k, " is invalid for n=", g.n));
  const Weight bound = l_max(g.total_node_weight(), k, epsilon);
  std::vector<ClusterId> cluster(g.n);
  std::iota(cluster.begin(), cluster.end(), ClusterId{0});
  std::vector<Weight> size(g.node_weight);
  const TieBreaker tb{TieBreak::kRandom, seed};
  std::vector<ClusterWeight> conn;
  auto size_of = [&](ClusterId c) { return size[c]; };
  for (std::uint64_t r = 1; r <= rounds; ++r) {
    std::uint64_t moves = 0;
    for (NodeId v = 0; v < g.n; ++v) {
      conn.clear();
      for (const auto& e : g.neighbors(v)) conn.push_back({cluster[e.target], e.weight});
      aggregate(conn);
      const ClusterId own = cluster[v];
      const ClusterId to = best_move(v, own, g.node_weight[v], conn, size_of, bound, tb, r);
      if (to == own) continue;
      size[own] -= g.node_weight[v];
      size[to] += g.node_weight[v];
      cluster[v] = to;
      ++moves;
    }
    if (moves == 0) break;
  }

  std::vector<ClusterId> order;
  for (ClusterId c = 0; c < g.n; ++c) {
    if (size[c] > 0) order.push_back(c);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](ClusterId a, ClusterId b) { return size[a] > size[b]; });
  std::vector<BlockId> block_of_cluster(g.n, 0);
  std::vector<Weight> load(k, 0);
  for (ClusterId c : order) {
    const auto lightest =
        static_cast<BlockId>(std::min_element(load.begin(), load.end()) - load.begin());
    block_of_cluster[c] = lightest;
    load[lightest] += size[c];
  }
  std::vector<BlockId> block(g.n);
  for (NodeId v = 0; v < g.n; ++v) block[v] = block_of_cluster[cluster[v]];
  if (!internal::rebalance(g, block, k, bound, 64)) {
    throw InfeasibleError("baseline could not rebalance the packed clusters");
  }
  memory_refine(g, block, k, bound, rounds);
  return block;
}

}  // namespace extpart
