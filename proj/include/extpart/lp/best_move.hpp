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
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "extpart/common.hpp"

namespace extpart {

enum class TieBreak { kLowestId, kRandom };

inline std::string_view tie_break_name(TieBreak t) {
  return t == TieBreak::kLowestId ? "lowest-id" : "random";
}

/// Chooses among equally good clusters. In random mode the choice depends
/// only on (seed, node, round) and the candidate set, so every LP variant
/// that presents a node with the same candidates makes the same choice.
struct TieBreaker {
  TieBreak mode = TieBreak::kRandom;
  std::uint64_t seed = 0;

  /// Index in [0, count) of the winner among `count` tied candidates that
  /// are listed in increasing cluster-ID order.
  std::size_t pick(std::size_t count, NodeId node, std::uint64_t round) const {
    if (count <= 1 || mode == TieBreak::kLowestId) return 0;
    std::seed_seq seq{seed, static_cast<std::uint64_t>(node), round};
    std::mt19937_64 rng(seq);
    return std::uniform_int_distribution<std::size_t>(0, count - 1)(rng);
  }
};

/// Connection weight of a node to one cluster.
struct ClusterWeight {
  ClusterId cluster;
  Weight weight;
};

/// Sorts by cluster ID and sums duplicate entries in place.
inline void aggregate(std::vector<ClusterWeight>& conn) {
  std::sort(conn.begin(), conn.end(),
            [](const ClusterWeight& a, const ClusterWeight& b) { return a.cluster < b.cluster; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < conn.size(); ++i) {
    if (out > 0 && conn[out - 1].cluster == conn[i].cluster) {
      conn[out - 1].weight += conn[i].weight;
    } else {
      conn[out++] = conn[i];
    }
  }
  conn.resize(out);
}

/// True if a node of weight `node_weight` fits into a cluster of size `size`.
inline bool fits(Weight size, Weight node_weight, Weight bound) {
  return bound == kUnbounded || size + node_weight <= bound;
}

/// The label-propagation decision for node v in cluster `own`.
///
/// `conn` holds v's connection weight per neighboring cluster, aggregated and
/// sorted by cluster ID (see aggregate()). `size_of(c)` returns the current
/// size of cluster c. The own cluster is always a candidate; v moves only to
/// a feasible cluster (size + c(v) <= bound) whose connection is strictly
/// larger than the connection to `own`. Ties among the best feasible
/// clusters go to `tb`. Returns `own` when nothing is strictly better.
template <typename SizeOf>
ClusterId best_move(NodeId v, ClusterId own, Weight node_weight,
                    std::span<const ClusterWeight> conn, SizeOf&& size_of, Weight bound,
                    const TieBreaker& tb, std::uint64_t round) {
  Weight own_weight = 0;
  Weight best = 0;
  std::size_t ties = 0;
  for (const auto& cw : conn) {
    if (cw.cluster == own) {
      own_weight = cw.weight;
      continue;
    }
    if (cw.weight < best || !fits(size_of(cw.cluster), node_weight, bound)) continue;
    if (cw.weight > best) {
      best = cw.weight;
      ties = 0;
    }
    ++ties;
  }
  if (ties == 0 || best <= own_weight) return own;
  std::size_t pick = tb.pick(ties, v, round);
  for (const auto& cw : conn) {
    if (cw.cluster == own || cw.weight != best || !fits(size_of(cw.cluster), node_weight, bound)) {
      continue;
    }
    if (pick == 0) return cw.cluster;
    --pick;
  }
  return own;  // unreachable
}

/// Counters shared by all LP round variants.
struct LpStats {
  std::uint64_t evaluations = 0;  // best_move calls
  std::uint64_t moves = 0;

  LpStats& operator+=(const LpStats& o) {
    evaluations += o.evaluations;
    moves += o.moves;
    return *this;
  }
};

}  // namespace extpart
