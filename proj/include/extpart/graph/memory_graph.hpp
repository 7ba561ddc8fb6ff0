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

#include "extpart/common.hpp"
#include "extpart/graph/disk_graph.hpp"

namespace extpart {

/// Compressed adjacency arrays in internal memory. Used for the coarsest
/// level and as the reference structure of test oracles.
struct MemoryGraph {
  NodeId n = 0;
  std::vector<std::uint64_t> first;  // n + 1 entries
  std::vector<EdgeRecord> adjacency;  // no sentinels
  std::vector<Weight> node_weight;

  std::span<const EdgeRecord> neighbors(NodeId v) const {
    return {adjacency.data() + first[v], adjacency.data() + first[v + 1]};
  }
  std::uint64_t m() const { return adjacency.size() / 2; }
  Weight total_node_weight() const {
    Weight t = 0;
    for (Weight c : node_weight) t += c;
    return t;
  }
  std::uint64_t bytes() const {
    return first.size() * 8 + adjacency.size() * sizeof(EdgeRecord) + node_weight.size() * 8;
  }
};

/// Loads a DiskGraph into memory with one adjacency scan. The caller is
/// responsible for the graph fitting; the bytes are charged to the budget
/// through the returned reservation.
inline MemoryGraph load_in_memory(const DiskGraph& g,
                                  em::MemoryBudget::Reservation* reservation = nullptr) {
  MemoryGraph mg;
  mg.n = g.n();
  if (reservation != nullptr) {
    *reservation = g.context().budget().reserve(
        (g.n() + 1) * 8 + 2 * g.m() * sizeof(EdgeRecord) + g.n() * 8, "in-memory graph");
  }
  mg.first.reserve(g.n() + 1);
  mg.adjacency.reserve(2 * g.m());
  mg.node_weight.reserve(g.n());
  mg.first.push_back(0);
  for_each_adjacency(g, [&](NodeId, Weight c, std::span<const EdgeRecord> list) {
    mg.adjacency.insert(mg.adjacency.end(), list.begin(), list.end());
    mg.first.push_back(mg.adjacency.size());
    mg.node_weight.push_back(c);
  });
  return mg;
}

/// Cut of an in-memory graph.
inline Weight memory_cut(const MemoryGraph& g, std::span<const BlockId> assignment) {
  Weight twice = 0;
  for (NodeId u = 0; u < g.n; ++u) {
    for (const auto& e : g.neighbors(u)) {
      if (assignment[u] != assignment[e.target]) twice += e.weight;
    }
  }
  return twice / 2;
}

inline std::vector<Weight> memory_block_weights(const MemoryGraph& g,
                                                std::span<const BlockId> assignment, BlockId k) {
  std::vector<Weight> w(k, 0);
  for (NodeId v = 0; v < g.n; ++v) w[assignment[v]] += g.node_weight[v];
  return w;
}

}  // namespace extpart
