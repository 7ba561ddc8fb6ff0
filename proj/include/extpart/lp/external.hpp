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
#include <tuple>
#include <utility>
#include <vector>

#include "extpart/common.hpp"
#include "extpart/em/external_array.hpp"
#include "extpart/em/priority_queue.hpp"
#include "extpart/em/sort.hpp"
#include "extpart/graph/disk_graph.hpp"
#include "extpart/lp/best_move.hpp"

namespace extpart {

/// Time-forward message (v, cluster of the sender, w(sender, v)), keyed by v.
struct LpMessage {
  NodeId key;
  ClusterId cluster;
  Weight weight;
};
static_assert(sizeof(LpMessage) == 24);

struct LpMessageLess {
  bool operator()(const LpMessage& a, const LpMessage& b) const {
    return std::tie(a.key, a.cluster, a.weight) < std::tie(b.key, b.cluster, b.weight);
  }
};

using LpQueue = em::ExternalPriorityQueue<LpMessage, LpMessageLess>;

/// Memory for each of `queues` priority queues once `blocks` block buffers for
/// scans are set aside.
inline std::size_t queue_memory(const em::Context& ctx, std::size_t queues, std::size_t blocks) {
  const std::size_t avail = ctx.budget().available();
  const std::size_t set_aside = blocks * ctx.block_size();
  if (avail <= set_aside) {
    throw ConfigError(detail::concat("memory budget leaves no room for priority queues: ",
                                     avail, " bytes available, ", set_aside,
                                     " needed for scan buffers"));
  }
  return (avail - set_aside) / queues;
}

/// Node-sorted (node, cluster) pairs with every node in its own cluster.
inline em::ExternalArray<em::NodeValue> identity_assignment(em::Context& ctx, NodeId n) {
  auto a = em::ExternalArray<em::NodeValue>::temporary(ctx, "assignment");
  auto w = a.writer();
  for (NodeId v = 0; v < n; ++v) w.push({v, v});
  w.close();
  return a;
}

/// Seeds the current-round queue: for every edge (u, v) with v < u the message
/// (v, cluster[u], w) is pushed, so that v learns about its larger neighbors
/// before they are processed. One scan of edges and assignment.
inline void seed_ext_lp(const DiskGraph& g, const em::ExternalArray<em::NodeValue>& assignment,
                        LpQueue& cur) {
  if (assignment.size() != g.n()) {
    throw DimensionError(detail::concat("assignment has ", assignment.size(),
                                        " entries for n=", g.n()));
  }
  auto a = assignment.reader();
  auto e = g.edges().reader();
  for (NodeId u = 0; u < g.n(); ++u) {
    const ClusterId cu = a.peek().value;
    a.advance();
    for (;;) {
      const EdgeRecord r = e.peek();
      e.advance();
      if (r.is_sentinel()) break;
      if (r.target < u) cur.push({r.target, cu, r.weight});
    }
  }
}

/// One round of external label propagation with time-forward processing (no
/// size constraint). Nodes are processed in increasing ID. Node u pops
/// exactly deg(u) messages keyed u from `cur`, which give the current cluster
/// of every neighbor; its new cluster is computed with best_move, and
/// (v, new cluster, w) is pushed to `cur` for neighbors v > u (still ahead in
/// this round) and to `nxt` for v < u. At the end the queues are swapped and
/// `assignment` is replaced by the new node-sorted array. I/O: O(Sort(m)).
inline LpStats ext_lp_round(const DiskGraph& g, em::ExternalArray<em::NodeValue>& assignment,
                            LpQueue& cur, LpQueue& nxt, const TieBreaker& tb,
                            std::uint64_t round) {
  em::Context& ctx = g.context();
  if (assignment.size() != g.n()) {
    throw DimensionError(detail::concat("assignment has ", assignment.size(),
                                        " entries for n=", g.n()));
  }
  LpStats stats;
  auto updated = em::ExternalArray<em::NodeValue>::temporary(ctx, "assignment");
  {
    auto in = assignment.reader();
    auto out = updated.writer();
    AdjacencyStream adj(g);
    std::vector<ClusterWeight> conn;
    auto no_sizes = [](ClusterId) { return Weight{0}; };
    while (adj.next()) {
      const NodeId u = adj.node();
      conn.clear();
      while (!cur.empty() && cur.top().key <= u) {
        const LpMessage msg = cur.pop_min();
        if (msg.key < u) {
          throw IntegrityError(detail::concat("stale message for node ", msg.key,
                                              " found while processing node ", u));
        }
        conn.push_back({msg.cluster, msg.weight});
      }
      const auto list = adj.list();
      if (conn.size() != list.size()) {
        throw IntegrityError(detail::concat("node ", u, " received ", conn.size(),
                                            " messages for degree ", list.size()));
      }
      aggregate(conn);
      const ClusterId own = in.peek().value;
      in.advance();
      ++stats.evaluations;
      const ClusterId to = best_move(u, own, 0, conn, no_sizes, kUnbounded, tb, round);
      if (to != own) ++stats.moves;
      out.push({u, to});
      for (const auto& e : list) (e.target > u ? cur : nxt).push({e.target, to, e.weight});
    }
  }
  if (!cur.empty()) {
    throw IntegrityError(detail::concat(cur.size(), " messages left over after the round"));
  }
  std::swap(cur, nxt);
  assignment = std::move(updated);
  return stats;
}

/// Edge slot annotated with a per-node value of its target: the target's
/// cluster as last announced (active LP) or its color (bucket clustering).
struct AnnotatedEdge {
  NodeId target;
  Weight weight;
  std::uint64_t value;
  bool is_sentinel() const { return target == kSentinel; }
};
static_assert(sizeof(AnnotatedEdge) == 24);

/// "sender moved to cluster", addressed to receiver.
struct ChangeNotice {
  NodeId receiver;
  NodeId sender;
  ClusterId cluster;
};

struct ChangeNoticeLess {
  bool operator()(const ChangeNotice& a, const ChangeNotice& b) const {
    return std::tie(a.receiver, a.sender, a.cluster) < std::tie(b.receiver, b.sender, b.cluster);
  }
};

using NoticeQueue = em::ExternalPriorityQueue<ChangeNotice, ChangeNoticeLess>;

/// Builds the annotated edge array: every slot (u, v, w) gets values[v] for a
/// node-sorted (node, value) array. The join runs through two sorts (by
/// target, then back by slot index). Sentinels carry value 0.
inline em::ExternalArray<AnnotatedEdge> annotate_targets(
    const DiskGraph& g, const em::ExternalArray<em::NodeValue>& values) {
  em::Context& ctx = g.context();
  if (values.size() != g.n()) {
    throw DimensionError(detail::concat("per-node array has ", values.size(),
                                        " entries for n=", g.n()));
  }
  const auto& assignment = values;
  struct Slot {
    NodeId target;
    std::uint64_t index;
    Weight weight;
  };
  struct Joined {
    std::uint64_t index;
    Weight weight;
    ClusterId cluster;
    NodeId target;
  };
  auto slots = em::ExternalArray<Slot>::temporary(ctx, "annotate-slots");
  {
    auto w = slots.writer();
    std::uint64_t index = 0;
    g.edges().scan([&](const EdgeRecord& r) {
      w.push({r.target, index++, r.weight});
    });
  }
  auto by_target = em::external_sort(
      slots,
      [](const Slot& a, const Slot& b) {
        return std::tie(a.target, a.index) < std::tie(b.target, b.index);
      },
      "annotate-by-target");
  slots = em::ExternalArray<Slot>();
  auto joined = em::ExternalArray<Joined>::temporary(ctx, "annotate-joined");
  {
    auto w = joined.writer();
    auto a = assignment.reader();
    by_target.scan([&](const Slot& s) {
      if (s.target == kSentinel) {
        w.push({s.index, 0, 0, kSentinel});
        return;
      }
      while (a.peek().node < s.target) a.advance();
      w.push({s.index, s.weight, a.peek().value, s.target});
    });
  }
  by_target = em::ExternalArray<Slot>();
  auto by_index = em::external_sort(
      joined, [](const Joined& a, const Joined& b) { return a.index < b.index; },
      "annotate-by-index");
  joined = em::ExternalArray<Joined>();
  auto out = em::ExternalArray<AnnotatedEdge>::temporary(ctx, "annotated-edges");
  {
    auto w = out.writer();
    by_index.scan([&](const Joined& j) { w.push({j.target, j.weight, j.cluster}); });
  }
  return out;
}

/// Annotates every edge slot with the current cluster of its target.
inline em::ExternalArray<AnnotatedEdge> annotate_with_clusters(
    const DiskGraph& g, const em::ExternalArray<em::NodeValue>& assignment) {
  return annotate_targets(g, assignment);
}

/// State of the external active-nodes variant: the annotated edge array, the
/// node-sorted assignment and the notice queues for this and the next round.
struct ExternalActiveState {
  em::ExternalArray<AnnotatedEdge> annotated;
  em::ExternalArray<em::NodeValue> assignment;
  NoticeQueue cur;
  NoticeQueue nxt;
  bool all_active = true;  // first round evaluates every node

  ExternalActiveState(const DiskGraph& g, em::ExternalArray<em::NodeValue> initial,
                      std::size_t queue_bytes)
      : annotated(annotate_with_clusters(g, initial)), assignment(std::move(initial)),
        cur(g.context(), queue_bytes), nxt(g.context(), queue_bytes) {}
};

/// External LP round restricted to active nodes. A node is active in a round
/// iff it receives at least one change notice (or in the first round). Each
/// node's slot annotations are brought up to date from its notices while its
/// list is copied to the next annotated array, so an active node sees the
/// current cluster of every neighbor without a message per edge. Notices of a
/// mover go to `cur` for larger neighbors and to `nxt` for smaller ones.
/// Unconstrained, exactly like ext_lp_round, and equivalent to it.
inline LpStats ext_active_lp_round(const DiskGraph& g, ExternalActiveState& st,
                                   const TieBreaker& tb, std::uint64_t round) {
  em::Context& ctx = g.context();
  LpStats stats;
  auto next_annotated = em::ExternalArray<AnnotatedEdge>::temporary(ctx, "annotated-edges");
  auto next_assignment = em::ExternalArray<em::NodeValue>::temporary(ctx, "assignment");
  {
    auto ain = st.annotated.reader();
    auto aout = next_annotated.writer();
    auto cin = st.assignment.reader();
    auto cout = next_assignment.writer();
    auto list_memory = ctx.budget().reserve(0, "annotated list buffer");
    std::vector<AnnotatedEdge> list;
    std::vector<ClusterWeight> conn;
    auto no_sizes = [](ClusterId) { return Weight{0}; };
    for (NodeId u = 0; u < g.n(); ++u) {
      list.clear();
      for (;;) {
        if (!ain.has_next()) {
          throw IntegrityError(detail::concat("annotated list of node ", u,
                                              " is missing its sentinel"));
        }
        const AnnotatedEdge r = ain.peek();
        ain.advance();
        if (r.is_sentinel()) break;
        if (list.size() == list.capacity()) {
          const std::size_t cap = std::max<std::size_t>(16, 2 * list.capacity());
          list_memory.resize(cap * sizeof(AnnotatedEdge), "annotated list buffer");
          list.reserve(cap);
        }
        list.push_back(r);
      }
      bool active = st.all_active;
      std::size_t slot = 0;
      while (!st.cur.empty() && st.cur.top().receiver <= u) {
        const ChangeNotice note = st.cur.pop_min();
        if (note.receiver < u) {
          throw IntegrityError(detail::concat("stale notice for node ", note.receiver,
                                              " found while processing node ", u));
        }
        while (slot < list.size() && list[slot].target < note.sender) ++slot;
        if (slot == list.size() || list[slot].target != note.sender) {
          throw IntegrityError(detail::concat("notice from ", note.sender, " to node ", u,
                                              " which is not its neighbor"));
        }
        list[slot].value = note.cluster;
        active = true;
      }
      const ClusterId own = cin.peek().value;
      cin.advance();
      ClusterId to = own;
      if (active) {
        conn.clear();
        for (const auto& e : list) conn.push_back({e.value, e.weight});
        aggregate(conn);
        ++stats.evaluations;
        to = best_move(u, own, 0, conn, no_sizes, kUnbounded, tb, round);
        if (to != own) {
          ++stats.moves;
          for (const auto& e : list) (e.target > u ? st.cur : st.nxt).push({e.target, u, to});
        }
      }
      cout.push({u, to});
      for (const auto& e : list) aout.push(e);
      aout.push({kSentinel, 0, 0});
    }
  }
  if (!st.cur.empty()) {
    throw IntegrityError(detail::concat(st.cur.size(), " notices left over after the round"));
  }
  std::swap(st.cur, st.nxt);
  st.annotated = std::move(next_annotated);
  st.assignment = std::move(next_assignment);
  st.all_active = false;
  return stats;
}

}  // namespace extpart
