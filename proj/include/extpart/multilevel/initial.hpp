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
#include <queue>
#include <random>
#include <span>
#include <tuple>
#include <vector>

#include "extpart/common.hpp"
#include "extpart/graph/memory_graph.hpp"
#include "extpart/graph/metrics.hpp"

namespace extpart {

/// Knobs of the in-memory partitioner used on the coarsest level.
struct InitialOptions {
  std::size_t attempts = 8;         // region-growing restarts; the best feasible wins
  std::uint64_t lp_rounds = 16;     // refinement rounds after each attempt
  std::size_t rebalance_passes = 64;
};

namespace internal {

/// Per-node connection to the blocks of its neighbors, kept in a dense k-sized
/// array plus the list of touched blocks.
class BlockConnection {
 public:
  explicit BlockConnection(BlockId k) : weight_(k, 0) {}

  void collect(const MemoryGraph& g, NodeId v, std::span<const BlockId> block) {
    for (BlockId b : touched_) weight_[b] = 0;
    touched_.clear();
    for (const auto& e : g.neighbors(v)) {
      const BlockId b = block[e.target];
      if (weight_[b] == 0) touched_.push_back(b);
      weight_[b] += e.weight;
    }
    std::sort(touched_.begin(), touched_.end());
  }
  Weight operator[](BlockId b) const { return weight_[b]; }
  std::span<const BlockId> touched() const { return touched_; }

 private:
  std::vector<Weight> weight_;
  std::vector<BlockId> touched_;
};

/// Greedy region growing: blocks 0..k-2 are grown one after another from a
/// random seed, always absorbing the unassigned node most strongly connected
/// to the block, until the block reaches its share of the remaining weight.
/// A node is only absorbed if the block stays within `l_max`. Whatever is
/// left forms block k-1.
inline std::vector<BlockId> grow_regions(const MemoryGraph& g, BlockId k, Weight l_max,
                                         std::mt19937_64& rng) {
  constexpr BlockId kNone = kSentinel;
  std::vector<BlockId> block(g.n, kNone);
  std::vector<Weight> gain(g.n, 0);
  Weight remaining = g.total_node_weight();
  std::vector<NodeId> order(g.n);
  for (NodeId v = 0; v < g.n; ++v) order[v] = v;
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t order_pos = 0;
  for (BlockId b = 0; b + 1 < k; ++b) {
    const Weight target = detail::ceil_div(remaining, k - b);
    Weight w = 0;
    std::priority_queue<std::tuple<Weight, NodeId>> frontier;
    std::vector<NodeId> touched;
    std::size_t scan = order_pos;
    auto absorb = [&](NodeId v) {
      block[v] = b;
      w += g.node_weight[v];
      for (const auto& e : g.neighbors(v)) {
        if (block[e.target] != kNone) continue;
        if (gain[e.target] == 0) touched.push_back(e.target);
        gain[e.target] += e.weight;
        frontier.push({gain[e.target], e.target});
      }
    };
    while (w < target) {
      bool grew = false;
      while (!frontier.empty()) {
        const auto [gv, v] = frontier.top();
        frontier.pop();
        if (block[v] != kNone || gv != gain[v]) continue;
        if (w + g.node_weight[v] > l_max) continue;
        absorb(v);
        grew = true;
        break;
      }
      if (grew) continue;
      // Frontier exhausted: restart from the next unassigned node that fits.
      while (scan < order.size() &&
             (block[order[scan]] != kNone || w + g.node_weight[order[scan]] > l_max)) {
        ++scan;
      }
      if (scan == order.size()) break;
      absorb(order[scan]);
    }
    for (NodeId v : touched) gain[v] = 0;
    while (order_pos < order.size() && block[order[order_pos]] != kNone) ++order_pos;
    remaining -= w;
  }
  for (auto& b : block) {
    if (b == kNone) b = k - 1;
  }
  return block;
}

/// Moves nodes out of blocks heavier than `l_max`, preferring moves that
/// lose the least cut, until every block fits. Returns false if a pass makes
/// no progress or the pass limit is reached.
inline bool rebalance(const MemoryGraph& g, std::vector<BlockId>& block, BlockId k, Weight l_max,
                      std::size_t passes) {
  auto weight = memory_block_weights(g, block, k);
  BlockConnection conn(k);
  struct Candidate {
    std::int64_t gain;
    NodeId node;
    BlockId to;
  };
  std::vector<Candidate> cand;
  for (std::size_t pass = 0; pass < passes; ++pass) {
    if (*std::max_element(weight.begin(), weight.end()) <= l_max) return true;
    BlockId lightest = 0;
    for (BlockId b = 1; b < k; ++b) {
      if (weight[b] < weight[lightest]) lightest = b;
    }
    cand.clear();
    for (NodeId v = 0; v < g.n; ++v) {
      const BlockId from = block[v];
      if (weight[from] <= l_max) continue;
      const Weight c = g.node_weight[v];
      conn.collect(g, v, block);
      bool found = false;
      Candidate best{};
      auto consider = [&](BlockId t) {
        if (t == from || weight[t] + c > l_max) return;
        const auto gain =
            static_cast<std::int64_t>(conn[t]) - static_cast<std::int64_t>(conn[from]);
        if (!found || gain > best.gain || (gain == best.gain && weight[t] < weight[best.to])) {
          best = {gain, v, t};
          found = true;
        }
      };
      for (BlockId t : conn.touched()) consider(t);
      consider(lightest);
      if (found) cand.push_back(best);
    }
    std::stable_sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
      return a.gain > b.gain;
    });
    std::size_t moved = 0;
    for (const auto& cd : cand) {
      const BlockId from = block[cd.node];
      const Weight c = g.node_weight[cd.node];
      if (weight[from] <= l_max || weight[cd.to] + c > l_max) continue;
      weight[from] -= c;
      weight[cd.to] += c;
      block[cd.node] = cd.to;
      ++moved;
    }
    if (moved == 0) break;
  }
  return *std::max_element(weight.begin(), weight.end()) <= l_max;
}

}  // namespace internal

/// Size-constrained label propagation over the k blocks of an in-memory
/// graph. Nodes are visited in ID order; a node moves to the neighboring
/// block with the largest connection if that is strictly larger than the
/// connection to its own block and the target stays within `l_max` (ties:
/// lowest block ID). Every move strictly lowers the cut and keeps feasible
/// blocks feasible. Returns the number of moves.
inline std::uint64_t memory_refine(const MemoryGraph& g, std::vector<BlockId>& block, BlockId k,
                                   Weight l_max, std::uint64_t rounds) {
  auto weight = memory_block_weights(g, block, k);
  internal::BlockConnection conn(k);
  std::uint64_t total = 0;
  for (std::uint64_t r = 0; r < rounds; ++r) {
    std::uint64_t moves = 0;
    for (NodeId v = 0; v < g.n; ++v) {
      const BlockId own = block[v];
      const Weight c = g.node_weight[v];
      conn.collect(g, v, block);
      BlockId best = own;
      Weight best_w = conn[own];
      for (BlockId t : conn.touched()) {
        if (t != own && conn[t] > best_w && weight[t] + c <= l_max) {
          best = t;
          best_w = conn[t];
        }
      }
      if (best == own) continue;
      weight[own] -= c;
      weight[best] += c;
      block[v] = best;
      ++moves;
    }
    total += moves;
    if (moves == 0) break;
  }
  return total;
}

/// In-memory k-partition of a (coarse) graph: greedy region growing from
/// random seeds, an explicit rebalancing step and size-constrained LP
/// refinement; the feasible result with the smallest cut over all attempts is
/// returned. Balance is measured in node weight against
/// L_max = floor((1+epsilon) * ceil(total/k)). k = 1 puts every node in
/// block 0. Throws ParameterError if k exceeds the node count and
/// InfeasibleError if no attempt reaches a feasible partition.
inline std::vector<BlockId> partition_memory_graph(const MemoryGraph& g, BlockId k,
                                                   double epsilon, std::uint64_t seed,
                                                   const InitialOptions& opt = {}) {
  if (k == 0) throw ParameterError("k must be at least 1");
  if (k > g.n) {
    throw ParameterError(detail::concat("k=", k, " exceeds the ", g.n, " nodes of the graph"));
  }
  if (k == 1) return std::vector<BlockId>(g.n, 0);
  const Weight total = g.total_node_weight();
  const Weight bound = l_max(total, k, epsilon);
  const Weight heaviest = *std::max_element(g.node_weight.begin(), g.node_weight.end());
  if (heaviest > bound) {
    throw InfeasibleError(detail::concat("a node of weight ", heaviest,
                                         " exceeds the block bound L_max=", bound));
  }
  std::vector<BlockId> best;
  Weight best_cut = kUnbounded;
  std::mt19937_64 rng(seed);
  for (std::size_t a = 0; a < std::max<std::size_t>(1, opt.attempts); ++a) {
    auto block = internal::grow_regions(g, k, bound, rng);
    if (!internal::rebalance(g, block, k, bound, opt.rebalance_passes)) continue;
    memory_refine(g, block, k, bound, opt.lp_rounds);
    const Weight cut = memory_cut(g, block);
    if (cut < best_cut) {
      best_cut = cut;
      best = std::move(block);
    }
  }
  if (best.empty()) {
    throw InfeasibleError(detail::concat("no feasible ", k, "-partition found with L_max=",
                                         bound, " after ", opt.attempts,
                                         " region-growing attempts"));
  }
  return best;
}

/// Loads `g` into memory (charged to the budget) and partitions it with
/// partition_memory_graph.
inline std::vector<BlockId> partition_coarsest(const DiskGraph& g, BlockId k, double epsilon,
                                               std::uint64_t seed,
                                               const InitialOptions& opt = {}) {
  if (k == 0) throw ParameterError("k must be at least 1");
  if (k > g.n()) {
    throw ParameterError(detail::concat("k=", k, " exceeds the ", g.n(),
                                        " nodes of the coarsest graph"));
  }
  em::MemoryBudget::Reservation resident;
  const MemoryGraph mg = load_in_memory(g, &resident);
  auto blocks_memory = g.context().budget().reserve(8 * g.n(), "initial partition");
  return partition_memory_graph(mg, k, epsilon, seed, opt);
}

}  // namespace extpart
