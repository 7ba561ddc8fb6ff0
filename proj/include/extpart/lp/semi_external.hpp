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
#include <functional>
#include <queue>
#include <span>
#include <thread>
#include <unordered_map>
#include <vector>

#include "extpart/common.hpp"
#include "extpart/graph/disk_graph.hpp"
#include "extpart/lp/best_move.hpp"

namespace extpart {

/// Semi-external clustering state: the cluster of every node and the size of
/// every cluster ID, both resident in internal memory and charged to the
/// budget. Sizes are node-weight sums (node counts for unit weights).
struct ClusterState {
  std::vector<ClusterId> cluster;
  std::vector<Weight> size;
  em::MemoryBudget::Reservation reservation;

  /// Every node in its own cluster: cluster[v] = v, size[v] = c(v).
  static ClusterState singletons(const DiskGraph& g) {
    ClusterState s;
    s.reservation = g.context().budget().reserve(16 * g.n(), "cluster IDs and sizes");
    s.cluster.resize(g.n());
    for (NodeId v = 0; v < g.n(); ++v) s.cluster[v] = v;
    s.size.reserve(g.n());
    g.node_weights().scan([&](Weight c) { s.size.push_back(c); });
    return s;
  }

  /// Start from an existing assignment with IDs in [0, num_clusters).
  static ClusterState from_assignment(const DiskGraph& g, std::vector<ClusterId> assignment,
                                      ClusterId num_clusters) {
    if (assignment.size() != g.n()) {
      throw DimensionError(detail::concat("assignment has ", assignment.size(),
                                          " entries for n=", g.n()));
    }
    ClusterState s;
    s.reservation = g.context().budget().reserve(8 * g.n() + 8 * num_clusters,
                                                 "cluster IDs and sizes");
    s.cluster = std::move(assignment);
    s.size.assign(num_clusters, 0);
    NodeId v = 0;
    g.node_weights().scan([&](Weight c) {
      if (s.cluster[v] >= num_clusters) {
        throw ParameterError(detail::concat("cluster ID ", s.cluster[v], " of node ", v,
                                            " is outside [0, ", num_clusters, ")"));
      }
      s.size[s.cluster[v++]] += c;
    });
    return s;
  }
};

/// Recomputes sizes from the assignment (one Scan(n)).
inline std::vector<Weight> recount_sizes(const DiskGraph& g, std::span<const ClusterId> cluster,
                                         std::size_t num_ids) {
  std::vector<Weight> size(num_ids, 0);
  NodeId v = 0;
  g.node_weights().scan([&](Weight c) { size[cluster[v++]] += c; });
  return size;
}

namespace internal {

inline void neighbor_clusters(std::span<const EdgeRecord> list,
                              std::span<const ClusterId> cluster,
                              std::vector<ClusterWeight>& conn) {
  conn.clear();
  for (const auto& e : list) conn.push_back({cluster[e.target], e.weight});
  aggregate(conn);
}

}  // namespace internal

/// One round of sequential semi-external label propagation. Nodes are visited
/// in increasing ID and every move is applied at once, so later nodes see it.
/// I/O: exactly Scan(2m+n) + Scan(n) block reads and no writes.
inline LpStats se_lp_round(const DiskGraph& g, ClusterState& s, Weight bound,
                           const TieBreaker& tb, std::uint64_t round) {
  LpStats stats;
  std::vector<ClusterWeight> conn;
  auto size_of = [&](ClusterId c) { return s.size[c]; };
  for_each_adjacency(g, [&](NodeId v, Weight c, std::span<const EdgeRecord> list) {
    internal::neighbor_clusters(list, s.cluster, conn);
    ++stats.evaluations;
    const ClusterId own = s.cluster[v];
    const ClusterId to = best_move(v, own, c, conn, size_of, bound, tb, round);
    if (to != own) {
      s.size[own] -= c;
      s.size[to] += c;
      s.cluster[v] = to;
      ++stats.moves;
    }
  });
  return stats;
}

/// Active-node sets of the semi-external variant: min-queues of node IDs for
/// the current and the next round. Duplicates are allowed and skipped when
/// draining.
struct ActiveSet {
  using MinQueue = std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>>;
  MinQueue current;
  MinQueue next;

  static ActiveSet all(NodeId n) {
    ActiveSet a;
    std::vector<NodeId> ids(n);
    for (NodeId v = 0; v < n; ++v) ids[v] = v;
    a.current = MinQueue(std::greater<>(), std::move(ids));
    return a;
  }
  void advance() {
    std::swap(current, next);
    next = MinQueue();
  }
};

/// Semi-external LP round restricted to active nodes. Only nodes drained from
/// `act.current` are evaluated. When v moves, neighbors with larger IDs are
/// still ahead in this round and join `current`; neighbors with smaller IDs
/// were already visited and join `next`. Without a size constraint the result
/// equals se_lp_round's, because a node whose neighborhood did not change
/// would make the same decision again. The edge array is still scanned once.
inline LpStats active_lp_round(const DiskGraph& g, ClusterState& s, Weight bound,
                               const TieBreaker& tb, std::uint64_t round, ActiveSet& act) {
  LpStats stats;
  std::vector<ClusterWeight> conn;
  auto size_of = [&](ClusterId c) { return s.size[c]; };
  for_each_adjacency(g, [&](NodeId v, Weight c, std::span<const EdgeRecord> list) {
    bool active = false;
    while (!act.current.empty() && act.current.top() <= v) {
      active |= act.current.top() == v;
      act.current.pop();
    }
    if (!active) return;
    internal::neighbor_clusters(list, s.cluster, conn);
    ++stats.evaluations;
    const ClusterId own = s.cluster[v];
    const ClusterId to = best_move(v, own, c, conn, size_of, bound, tb, round);
    if (to == own) return;
    s.size[own] -= c;
    s.size[to] += c;
    s.cluster[v] = to;
    ++stats.moves;
    for (const auto& e : list) (e.target > v ? act.current : act.next).push(e.target);
  });
  act.advance();
  return stats;
}

/// Half-open record range [begin, end) of a resident edge block.
struct RecordRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool empty() const { return begin == end; }
  friend bool operator==(const RecordRange&, const RecordRange&) = default;
};

/// Splits a resident span of edge records among t workers so that every
/// adjacency list is processed by exactly one worker. The span is cut into t
/// equal ranges; each cut is then shifted forward to the next list start
/// (the record after a sentinel). If the span begins in the middle of a list
/// (`begins_mid_list`), that partial list belongs to the previous block and
/// is skipped. Lists running past the last cut belong to the last worker.
/// Surplus workers receive empty ranges.
inline std::vector<RecordRange> split_block_ranges(std::span<const EdgeRecord> block,
                                                   std::size_t t, bool begins_mid_list = false) {
  if (t == 0) throw ParameterError("worker count must be at least 1");
  const std::size_t len = block.size();
  auto next_list_start = [&](std::size_t pos) {
    if (pos == 0 && !begins_mid_list) return std::size_t{0};
    if (pos > 0 && block[pos - 1].is_sentinel()) return pos;
    while (pos < len && !block[pos].is_sentinel()) ++pos;
    return pos < len ? pos + 1 : len;
  };
  std::vector<std::size_t> cuts(t + 1);
  for (std::size_t i = 0; i < t; ++i) cuts[i] = next_list_start(i * len / t);
  cuts[t] = len;
  for (std::size_t i = 1; i <= t; ++i) cuts[i] = std::max(cuts[i], cuts[i - 1]);
  std::vector<RecordRange> ranges(t);
  for (std::size_t i = 0; i < t; ++i) ranges[i] = {cuts[i], cuts[i + 1]};
  return ranges;
}

/// A move proposed by a worker during the parallel round.
struct MoveRecord {
  NodeId node;
  ClusterId from;
  ClusterId to;
  Weight gain;  // connection to `to` minus connection to `from`
};

struct ParallelOptions {
  std::size_t workers = 1;
  /// Also re-check at apply time that the move still has positive gain
  /// against the current assignment (used by refinement so the cut never
  /// increases).
  bool revalidate_gain = false;
};

/// One round of parallel semi-external label propagation.
///
/// The edge array is read block by block. A resident chunk holds every list
/// whose first record lies in the current disk block (a list running past the
/// block end is completed from the next one). The chunk is split with
/// split_block_ranges and each worker evaluates its lists against the
/// assignment and sizes as of the block start, plus its own tentative moves.
/// Afterwards the moves are applied one at a time in node order; a move whose
/// target no longer fits the bound is dropped. With one worker this is
/// exactly se_lp_round.
inline LpStats par_se_lp_round(const DiskGraph& g, ClusterState& s, Weight bound,
                               const TieBreaker& tb, std::uint64_t round,
                               const ParallelOptions& opt) {
  if (opt.workers == 0) throw ParameterError("worker count must be at least 1");
  em::Context& ctx = g.context();
  const std::size_t block = ctx.block_size();
  auto block_of = [&](std::uint64_t record) { return record * sizeof(EdgeRecord) / block; };

  auto edges = g.edges().reader();
  auto weights = g.node_weights().reader();
  auto chunk_memory = ctx.budget().reserve(0, "parallel LP chunk");
  std::vector<EdgeRecord> chunk;
  std::vector<std::size_t> list_start;  // index in chunk of each list's first record
  std::vector<Weight> chunk_weight;
  std::uint64_t position = 0;
  NodeId next_node = 0;
  LpStats total;

  struct Worker {
    std::vector<MoveRecord> moves;
    std::unordered_map<NodeId, ClusterId> moved;
    std::unordered_map<ClusterId, std::int64_t> size_delta;
    std::vector<ClusterWeight> conn;
    std::uint64_t evaluations = 0;
  };
  std::vector<Worker> workers(opt.workers);

  while (next_node < g.n()) {
    // Load the lists that start in the current disk block.
    chunk.clear();
    list_start.clear();
    chunk_weight.clear();
    const NodeId first_node = next_node;
    const std::uint64_t chunk_block = block_of(position);
    do {
      list_start.push_back(chunk.size());
      for (;;) {
        if (!edges.has_next()) {
          throw IntegrityError(detail::concat("adjacency list of node ", next_node,
                                              " is missing its sentinel"));
        }
        const EdgeRecord r = edges.peek();
        edges.advance();
        ++position;
        if (chunk.size() == chunk.capacity()) {
          const std::size_t cap = std::max<std::size_t>(64, 2 * chunk.capacity());
          chunk_memory.resize(cap * (sizeof(EdgeRecord) + 16), "parallel LP chunk");
          chunk.reserve(cap);
        }
        chunk.push_back(r);
        if (r.is_sentinel()) break;
        if (r.target >= g.n()) {
          throw IntegrityError(detail::concat("adjacency list of node ", next_node,
                                              " holds invalid target ", r.target));
        }
      }
      chunk_weight.push_back(weights.peek());
      weights.advance();
      ++next_node;
    } while (next_node < g.n() && block_of(position) == chunk_block);

    const auto ranges = split_block_ranges(chunk, opt.workers);
    auto work = [&](std::size_t w) {
      Worker& wk = workers[w];
      wk.moves.clear();
      wk.moved.clear();
      wk.size_delta.clear();
      wk.evaluations = 0;
      auto cluster_of = [&](NodeId u) {
        auto it = wk.moved.find(u);
        return it == wk.moved.end() ? s.cluster[u] : it->second;
      };
      auto size_of = [&](ClusterId c) {
        auto it = wk.size_delta.find(c);
        return it == wk.size_delta.end()
                   ? s.size[c]
                   : static_cast<Weight>(static_cast<std::int64_t>(s.size[c]) + it->second);
      };
      auto li = static_cast<std::size_t>(
          std::lower_bound(list_start.begin(), list_start.end(), ranges[w].begin) -
          list_start.begin());
      for (; li < list_start.size() && list_start[li] < ranges[w].end; ++li) {
        const NodeId v = first_node + li;
        const std::size_t end =
            li + 1 < list_start.size() ? list_start[li + 1] - 1 : chunk.size() - 1;
        std::span<const EdgeRecord> list(chunk.data() + list_start[li], end - list_start[li]);
        wk.conn.clear();
        for (const auto& e : list) wk.conn.push_back({cluster_of(e.target), e.weight});
        aggregate(wk.conn);
        ++wk.evaluations;
        const ClusterId own = cluster_of(v);
        const Weight c = chunk_weight[li];
        const ClusterId to = best_move(v, own, c, wk.conn, size_of, bound, tb, round);
        if (to == own) continue;
        Weight w_own = 0, w_to = 0;
        for (const auto& cw : wk.conn) {
          if (cw.cluster == own) w_own = cw.weight;
          if (cw.cluster == to) w_to = cw.weight;
        }
        wk.moves.push_back({v, own, to, w_to - w_own});
        wk.moved[v] = to;
        wk.size_delta[own] -= static_cast<std::int64_t>(c);
        wk.size_delta[to] += static_cast<std::int64_t>(c);
      }
    };
    if (opt.workers == 1) {
      work(0);
    } else {
      std::vector<std::jthread> threads;
      threads.reserve(opt.workers);
      for (std::size_t w = 0; w < opt.workers; ++w) threads.emplace_back(work, w);
    }

    // Sequential apply phase in node order (workers own increasing ranges).
    std::vector<ClusterWeight> conn;
    for (auto& wk : workers) {
      total.evaluations += wk.evaluations;
      for (const auto& mv : wk.moves) {
        const std::size_t li = mv.node - first_node;
        const Weight c = chunk_weight[li];
        if (!fits(s.size[mv.to], c, bound)) continue;
        if (opt.revalidate_gain) {
          const std::size_t end =
              li + 1 < list_start.size() ? list_start[li + 1] - 1 : chunk.size() - 1;
          Weight w_own = 0, w_to = 0;
          for (std::size_t i = list_start[li]; i < end; ++i) {
            const ClusterId cl = s.cluster[chunk[i].target];
            if (cl == mv.from) w_own += chunk[i].weight;
            if (cl == mv.to) w_to += chunk[i].weight;
          }
          if (w_to <= w_own) continue;
        }
        s.size[mv.from] -= c;
        s.size[mv.to] += c;
        s.cluster[mv.node] = mv.to;
        ++total.moves;
      }
    }
  }
  if (edges.has_next()) {
    throw IntegrityError(detail::concat("edge array has records after the sentinel of node ",
                                        g.n() - 1));
  }
  return total;
}

}  // namespace extpart
