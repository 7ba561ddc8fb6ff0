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

// Coloring-based ("bucket") label propagation. Every color class is an
// independent set, so all nodes of one class can be decided together: for
// each class there is a bucket of tuples telling its nodes the current
// cluster of every neighbor, and deciding the class sends one reply per
// tuple to the bucket of the neighbor's class. Optionally a size bound on
// the clusters is enforced, with cluster sizes kept in an external array and
// brought into memory either as a per-bucket map or, when a bucket does not
// fit, forwarded node to node through an external priority queue.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "extpart/coloring/coloring.hpp"
#include "extpart/common.hpp"
#include "extpart/em/external_array.hpp"
#include "extpart/em/priority_queue.hpp"
#include "extpart/em/sort.hpp"
#include "extpart/graph/disk_graph.hpp"
#include "extpart/lp/best_move.hpp"
#include "extpart/lp/external.hpp"
#include "extpart/lp/lp_cluster.hpp"

namespace extpart {

/// (v, cluster[u], u, w(u, v), color[u]): node u tells v its cluster. Lives in
/// the bucket of color[v].
struct BucketTuple {
  NodeId v;
  ClusterId cluster_u;
  NodeId u;
  Weight weight;
  Color color_u;
};
static_assert(sizeof(BucketTuple) == 40);

struct BucketTupleLess {
  bool operator()(const BucketTuple& a, const BucketTuple& b) const {
    return std::tie(a.v, a.cluster_u, a.u) < std::tie(b.v, b.cluster_u, b.u);
  }
};

/// A node of one color class with its current cluster, weight and degree.
struct Member {
  NodeId node;
  ClusterId cluster;
  Weight weight;
  std::uint64_t degree;
};

/// Entry (c, v) of the adjacent-cluster list N: member v is adjacent to, or
/// contained in, cluster c.
struct ClusterNode {
  ClusterId cluster;
  NodeId node;
};

/// Entry (v, c, u) of the forward list M: after deciding, v passes the size
/// of cluster c on to u, the next member adjacent to c.
struct ForwardTriple {
  NodeId node;
  ClusterId cluster;
  NodeId next;
};

/// (v, c, size): the current size of cluster c, addressed to member v.
struct SizeMessage {
  NodeId node;
  ClusterId cluster;
  Weight size;
};

struct SizeMessageLess {
  bool operator()(const SizeMessage& a, const SizeMessage& b) const {
    return std::tie(a.node, a.cluster) < std::tie(b.node, b.cluster);
  }
};

enum class SizeMode {
  kUnconstrained,
  kMap,  // per-bucket in-memory map of cluster sizes
  kPq,   // sizes forwarded along N/M through an external priority queue
};

/// Block buffers a bucket round needs besides one write buffer per color
/// class: readers and writers of the bucket pass and the bucket sort, and
/// with a size bound also the size scan and two minimum-size priority queues
/// (the map variant falls back to the queue variant when memory is short).
inline std::uint64_t bucket_work_blocks(SizeMode mode) {
  return mode == SizeMode::kUnconstrained ? 8 : 18;
}

/// Largest number of color classes bucket clustering can run with under the
/// given memory and block size; 0 if there is not enough memory at all.
inline std::uint64_t max_bucket_colors(const em::BlockConfig& cfg, SizeMode mode) {
  const std::uint64_t blocks = cfg.memory_blocks();
  const std::uint64_t work = bucket_work_blocks(mode);
  return blocks > work ? blocks - work : 0;
}

/// Coloring for bucket clustering with the default class bound. Greedy
/// coloring may need more classes than the bound alone forces (up to the
/// maximum degree plus one on top), so while there are more classes than
/// max_bucket_colors allows, the bound is doubled and the graph recolored;
/// with an unlimited bound greedy needs at most max degree + 1 colors. The
/// last attempt is returned even if it still has too many colors.
inline Coloring default_coloring(const DiskGraph& g, SizeMode mode) {
  const std::uint64_t limit = max_bucket_colors(g.context().config(), mode);
  std::uint64_t bound = default_class_bound(g.n(), g.context().config());
  for (;;) {
    Coloring c = tfp_greedy_coloring(g, bound);
    if (c.num_colors() <= limit || bound >= g.n()) return c;
    bound = std::min<std::uint64_t>(2 * bound, std::max<std::uint64_t>(g.n(), 1));
  }
}

namespace internal {

/// Walks the members of one color class together with their (sorted) bucket
/// tuples and checks the routing invariants on the way. For every member the
/// connection weight per neighboring cluster is aggregated; the tuples
/// themselves are kept only if `keep_tuples` is set.
class MemberTuples {
 public:
  MemberTuples(const em::ExternalArray<Member>& members,
               const em::ExternalArray<BucketTuple>& sorted, Color color, std::size_t num_colors,
               bool keep_tuples = true)
      : members_(members.reader()), tuples_(sorted.reader()), color_(color),
        num_colors_(num_colors), keep_tuples_(keep_tuples),
        list_memory_(members.context().budget().reserve(0, "bucket node buffer")),
        conn_memory_(members.context().budget().reserve(0, "bucket node connections")) {}

  bool next() {
    if (!members_.has_next()) {
      if (tuples_.has_next()) {
        throw IntegrityError(detail::concat("bucket of color ", color_, " holds a tuple for node ",
                                            tuples_.peek().v, " which has a different color"));
      }
      return false;
    }
    member_ = members_.peek();
    members_.advance();
    list_.clear();
    conn_.clear();
    std::uint64_t count = 0;
    while (tuples_.has_next() && tuples_.peek().v <= member_.node) {
      const BucketTuple t = tuples_.peek();
      if (t.v < member_.node) {
        throw IntegrityError(detail::concat("bucket of color ", color_, " holds a tuple for node ",
                                            t.v, " which has a different color"));
      }
      if (t.color_u == color_ || t.color_u >= num_colors_) {
        throw IntegrityError(detail::concat("tuple from node ", t.u, " to node ", t.v,
                                            " carries invalid sender color ", t.color_u));
      }
      ++count;
      if (keep_tuples_) push_grow(list_, list_memory_, t);
      if (!conn_.empty() && conn_.back().cluster == t.cluster_u) {
        conn_.back().weight += t.weight;
      } else {
        push_grow(conn_, conn_memory_, ClusterWeight{t.cluster_u, t.weight});
      }
      tuples_.advance();
    }
    if (count != member_.degree) {
      throw IntegrityError(detail::concat("node ", member_.node, " received ", count,
                                          " tuples for degree ", member_.degree));
    }
    return true;
  }

  const Member& member() const { return member_; }
  /// Tuples of the current member (empty unless tuples are kept).
  std::span<const BucketTuple> list() const { return list_; }
  /// Connection weight per neighboring cluster, sorted by cluster.
  std::span<const ClusterWeight> conn() const { return conn_; }

 private:
  template <typename T>
  static void push_grow(std::vector<T>& v, em::MemoryBudget::Reservation& r, const T& x) {
    if (v.size() == v.capacity()) {
      const std::size_t cap = std::max<std::size_t>(16, 2 * v.capacity());
      r.resize(cap * sizeof(T), "bucket node buffer");
      v.reserve(cap);
    }
    v.push_back(x);
  }

  em::ArrayReader<Member> members_;
  em::ArrayReader<BucketTuple> tuples_;
  Color color_;
  std::size_t num_colors_;
  bool keep_tuples_;
  em::MemoryBudget::Reservation list_memory_;
  em::MemoryBudget::Reservation conn_memory_;
  Member member_{};
  std::vector<BucketTuple> list_;
  std::vector<ClusterWeight> conn_;
};

/// Cursor over an in-memory sorted sequence, shaped like em::ArrayReader.
template <typename T>
class SpanCursor {
 public:
  explicit SpanCursor(std::span<const T> data) : data_(data) {}
  bool has_next() const { return pos_ < data_.size(); }
  const T& peek() const { return data_[pos_]; }
  void advance() { ++pos_; }

 private:
  std::span<const T> data_;
  std::size_t pos_ = 0;
};

/// Cursor over N that yields only the first pair of every cluster slice.
class FirstOfCluster {
 public:
  explicit FirstOfCluster(const em::ExternalArray<ClusterNode>& n) : reader_(n.reader()) {}
  bool has_next() const { return reader_.has_next(); }
  const ClusterNode& peek() const { return reader_.peek(); }
  void advance() {
    const ClusterId c = reader_.peek().cluster;
    while (reader_.has_next() && reader_.peek().cluster == c) reader_.advance();
  }

 private:
  em::ArrayReader<ClusterNode> reader_;
};

inline void connections(std::span<const BucketTuple> list, std::vector<ClusterWeight>& conn) {
  conn.clear();
  for (const auto& t : list) {
    if (!conn.empty() && conn.back().cluster == t.cluster_u) {
      conn.back().weight += t.weight;
    } else {
      conn.push_back({t.cluster_u, t.weight});
    }
  }
}

}  // namespace internal

/// The two derived lists of the priority-queue variant for one bucket.
struct ForwardStructures {
  em::ExternalArray<ClusterNode> adjacent;  // N, sorted by (cluster, node), no duplicates
  em::ExternalArray<ForwardTriple> forward;  // M, sorted by (node, cluster)
};

/// Builds N and M for one bucket: N holds (c, v) for every tuple (v, c, ...)
/// and (cluster[v], v) for every member v, deduplicated and sorted by
/// cluster; M holds (v, c, u) for consecutive v, u in each slice N_c, sorted
/// by v. Two sorts of O(|T|) records.
inline ForwardStructures build_forward_structures(const em::ExternalArray<BucketTuple>& sorted,
                                                  const em::ExternalArray<Member>& members,
                                                  Color color, std::size_t num_colors) {
  em::Context& ctx = sorted.context();
  auto pairs = em::ExternalArray<ClusterNode>::temporary(ctx, "adjacent-pairs");
  {
    internal::MemberTuples it(members, sorted, color, num_colors, /*keep_tuples=*/false);
    auto w = pairs.writer();
    while (it.next()) {
      const Member& m = it.member();
      bool own_written = false;
      for (const auto& cw : it.conn()) {  // distinct clusters in increasing order
        if (!own_written && m.cluster <= cw.cluster) {
          if (m.cluster != cw.cluster) w.push({m.cluster, m.node});
          own_written = true;
        }
        w.push({cw.cluster, m.node});
      }
      if (!own_written) w.push({m.cluster, m.node});
    }
  }
  ForwardStructures out;
  out.adjacent = em::external_sort(
      pairs,
      [](const ClusterNode& a, const ClusterNode& b) {
        return std::tie(a.cluster, a.node) < std::tie(b.cluster, b.node);
      },
      "adjacent-clusters");
  pairs = em::ExternalArray<ClusterNode>();
  auto triples = em::ExternalArray<ForwardTriple>::temporary(ctx, "forward-raw");
  {
    auto w = triples.writer();
    auto r = out.adjacent.reader();
    std::optional<ClusterNode> prev;
    while (r.has_next()) {
      const ClusterNode cur = r.peek();
      r.advance();
      if (prev && prev->cluster == cur.cluster) w.push({prev->node, cur.cluster, cur.node});
      prev = cur;
    }
  }
  out.forward = em::external_sort(
      triples,
      [](const ForwardTriple& a, const ForwardTriple& b) {
        return std::tie(a.node, a.cluster) < std::tie(b.node, b.cluster);
      },
      "forward-list");
  return out;
}

struct BucketRoundStats {
  LpStats lp;
  std::uint64_t map_chunks = 0;   // map-variant chunks (each costs one size scan)
  std::uint64_t pq_buckets = 0;   // buckets processed with the priority-queue variant
};

/// State of a bucket clustering run: per-color buckets with open write
/// buffers, per-color member arrays and, with a size bound, the external
/// cluster-size array.
class BucketClustering {
 public:
  /// `initial` is a node-sorted (node, cluster) array; null means singletons.
  /// Cluster IDs must be below `cluster_space` (0 means n). With a size bound
  /// the clustering never creates a cluster heavier than `bound`.
  BucketClustering(const DiskGraph& g, Coloring coloring, SizeMode mode, Weight bound,
                   TieBreaker tb, const em::ExternalArray<em::NodeValue>* initial = nullptr,
                   std::uint64_t cluster_space = 0)
      : g_(&g), ctx_(&g.context()), coloring_(std::move(coloring)), mode_(mode),
        bound_(mode == SizeMode::kUnconstrained ? kUnbounded : bound), tb_(tb),
        cluster_space_(cluster_space == 0 ? g.n() : cluster_space),
        pending_memory_(g.context().budget().reserve(0, "pending cluster sizes")) {
    if (coloring_.color.size() != g.n()) {
      throw DimensionError(detail::concat("coloring has ", coloring_.color.size(),
                                          " entries for n=", g.n()));
    }
    init_buckets(initial);
  }

  BucketClustering(const BucketClustering&) = delete;
  BucketClustering& operator=(const BucketClustering&) = delete;

  std::size_t num_colors() const { return coloring_.num_colors(); }
  const Coloring& coloring() const { return coloring_; }
  std::uint64_t max_degree() const { return max_degree_; }
  std::uint64_t bucket_tuples(Color c) const { return writers_[c]->size(); }

  /// One round: every color class in increasing color order.
  BucketRoundStats round(std::uint64_t r) {
    BucketRoundStats stats;
    for (Color c = 0; c < num_colors(); ++c) {
      switch (mode_) {
        case SizeMode::kUnconstrained:
          stats.lp += process_bucket(c, r);
          break;
        case SizeMode::kMap:
          if (map_fits()) {
            auto [lp, chunks] = process_bucket_sized_map(c, r);
            stats.lp += lp;
            stats.map_chunks += chunks;
          } else {
            stats.lp += process_bucket_sized_pq(c, r);
            ++stats.pq_buckets;
          }
          break;
        case SizeMode::kPq:
          stats.lp += process_bucket_sized_pq(c, r);
          ++stats.pq_buckets;
          break;
      }
    }
    return stats;
  }

  /// Unconstrained processing of the bucket of `color`: sort by (v, cluster),
  /// decide every member with best_move, reply to every sender. Sort(|T|).
  LpStats process_bucket(Color color, std::uint64_t round) {
    auto sorted = take_sorted_bucket(color);
    LpStats stats;
    auto updated = em::ExternalArray<Member>::temporary(*ctx_, "members");
    {
      internal::MemberTuples it(members_[color], sorted, color, num_colors());
      auto w = updated.writer();
      auto no_sizes = [](ClusterId) { return Weight{0}; };
      while (it.next()) {
        const Member& m = it.member();
        ++stats.evaluations;
        const ClusterId to =
            best_move(m.node, m.cluster, m.weight, it.conn(), no_sizes, kUnbounded, tb_, round);
        if (to != m.cluster) ++stats.moves;
        w.push({m.node, to, m.weight, m.degree});
        reply(it.list(), m.node, to, color);
      }
    }
    members_[color] = std::move(updated);
    return stats;
  }

  /// Size-bounded processing with in-memory maps. Members are taken in
  /// chunks of consecutive IDs whose tuples fit in memory (normally the whole
  /// bucket is one chunk); the sizes of all clusters a chunk touches are
  /// fetched with one scan of the size array, updated live while deciding,
  /// and written back during the next scan. Returns the stats and the number
  /// of chunks.
  std::pair<LpStats, std::uint64_t> process_bucket_sized_map(Color color, std::uint64_t round) {
    require_sizes();
    auto sorted = take_sorted_bucket(color);
    LpStats stats;
    std::uint64_t chunks = 0;
    auto updated = em::ExternalArray<Member>::temporary(*ctx_, "members");
    {
      internal::MemberTuples it(members_[color], sorted, color, num_colors());
      auto w = updated.writer();
      const std::size_t capacity = map_capacity();
      auto chunk_memory = ctx_->budget().reserve(0, "bucket map chunk");
      std::vector<Member> chunk_members;
      std::vector<std::size_t> offsets;
      std::vector<BucketTuple> chunk_tuples;
      std::vector<ClusterId> ids;
      std::vector<Weight> sizes;
      std::vector<ClusterWeight> conn;
      bool have = it.next();
      while (have) {
        chunk_members.clear();
        chunk_tuples.clear();
        offsets.assign(1, 0);
        std::size_t used = 0;
        while (have) {
          const std::size_t cost = it.list().size() + 1;
          if (cost > capacity) {
            throw ConfigError(detail::concat("node ", it.member().node, " has ", cost - 1,
                                             " bucket tuples, more than the in-memory map "
                                             "variant can hold; use the priority-queue variant"));
          }
          if (used + cost > capacity) break;
          chunk_memory.resize((used + cost) * (kMapBytesPerItem - sizeof(em::NodeValue)),
                              "bucket map chunk");
          chunk_members.push_back(it.member());
          chunk_tuples.insert(chunk_tuples.end(), it.list().begin(), it.list().end());
          offsets.push_back(chunk_tuples.size());
          used += cost;
          have = it.next();
        }
        ++chunks;
        ids.clear();
        for (const auto& m : chunk_members) ids.push_back(m.cluster);
        for (const auto& t : chunk_tuples) ids.push_back(t.cluster_u);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        sizes.assign(ids.size(), 0);
        {
          std::size_t next = 0;
          internal::SpanCursor<ClusterId> wanted(ids);
          sync_sizes(
              wanted, [](ClusterId c) { return c; },
              [&](ClusterId, Weight s) { sizes[next++] = s; });
        }
        auto slot = [&](ClusterId c) {
          return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), c) -
                                          ids.begin());
        };
        auto size_of = [&](ClusterId c) { return sizes[slot(c)]; };
        for (std::size_t i = 0; i < chunk_members.size(); ++i) {
          const Member& m = chunk_members[i];
          const std::span<const BucketTuple> list(chunk_tuples.data() + offsets[i],
                                                  offsets[i + 1] - offsets[i]);
          internal::connections(list, conn);
          ++stats.evaluations;
          const ClusterId to =
              best_move(m.node, m.cluster, m.weight, conn, size_of, bound_, tb_, round);
          if (to != m.cluster) {
            ++stats.moves;
            sizes[slot(m.cluster)] -= m.weight;
            sizes[slot(to)] += m.weight;
          }
          w.push({m.node, to, m.weight, m.degree});
          reply(list, m.node, to, color);
        }
        pending_memory_.resize(ids.size() * sizeof(em::NodeValue), "pending cluster sizes");
        pending_.clear();
        for (std::size_t i = 0; i < ids.size(); ++i) pending_.push_back({ids[i], sizes[i]});
      }
    }
    members_[color] = std::move(updated);
    return {stats, chunks};
  }

  /// Size-bounded processing without holding the bucket in memory. Cluster
  /// sizes travel along the chains N_c through an external priority queue:
  /// the first member of each N_c receives the size from the size array, and
  /// every member passes the sizes of its adjacent clusters on to their next
  /// members (list M). Sizes of clusters whose chain ends are written back
  /// during the next scan of the size array. Sort(|T|) plus one size scan.
  LpStats process_bucket_sized_pq(Color color, std::uint64_t round) {
    require_sizes();
    auto sorted = take_sorted_bucket(color);
    auto fs = build_forward_structures(sorted, members_[color], color, num_colors());
    LpStats stats;
    using SizeQueue = em::ExternalPriorityQueue<SizeMessage, SizeMessageLess>;
    SizeQueue queue(*ctx_, em_queue_bytes());
    {
      internal::FirstOfCluster wanted(fs.adjacent);
      sync_sizes(
          wanted, [](const ClusterNode& p) { return p.cluster; },
          [&](const ClusterNode& p, Weight s) { queue.push({p.node, p.cluster, s}); });
    }
    fs.adjacent = em::ExternalArray<ClusterNode>();
    auto terminals = em::ExternalArray<em::NodeValue>::temporary(*ctx_, "terminal-sizes");
    auto updated = em::ExternalArray<Member>::temporary(*ctx_, "members");
    {
      internal::MemberTuples it(members_[color], sorted, color, num_colors(),
                                /*keep_tuples=*/false);
      auto forward = fs.forward.reader();
      auto tw = terminals.writer();
      auto w = updated.writer();
      auto known_memory = ctx_->budget().reserve(0, "bucket node sizes");
      std::vector<ClusterWeight> known;  // (cluster, current size) popped for this node
      while (it.next()) {
        const Member& m = it.member();
        known.clear();
        while (!queue.empty() && queue.top().node <= m.node) {
          const SizeMessage msg = queue.pop_min();
          if (msg.node < m.node) {
            throw IntegrityError(detail::concat("size message for node ", msg.node,
                                                " was not consumed before node ", m.node));
          }
          if (known.size() == known.capacity()) {
            const std::size_t cap = std::max<std::size_t>(16, 2 * known.capacity());
            known_memory.resize(cap * sizeof(ClusterWeight), "bucket node sizes");
            known.reserve(cap);
          }
          known.push_back({msg.cluster, msg.size});
        }
        auto find = [&](ClusterId c) -> ClusterWeight& {
          auto pos = std::lower_bound(
              known.begin(), known.end(), c,
              [](const ClusterWeight& a, ClusterId b) { return a.cluster < b; });
          if (pos == known.end() || pos->cluster != c) {
            throw IntegrityError(detail::concat("node ", m.node, " received no size for cluster ",
                                                c, "; the forwarding chain is broken"));
          }
          return *pos;
        };
        find(m.cluster);
        for (const auto& cw : it.conn()) find(cw.cluster);
        auto size_of = [&](ClusterId c) { return find(c).weight; };
        ++stats.evaluations;
        const ClusterId to =
            best_move(m.node, m.cluster, m.weight, it.conn(), size_of, bound_, tb_, round);
        if (to != m.cluster) {
          ++stats.moves;
          find(m.cluster).weight -= m.weight;
          find(to).weight += m.weight;
        }
        for (const auto& k : known) {
          if (forward.has_next() && forward.peek().node == m.node &&
              forward.peek().cluster == k.cluster) {
            queue.push({forward.peek().next, k.cluster, k.weight});
            forward.advance();
          } else {
            tw.push({k.cluster, k.weight});
          }
        }
        if (forward.has_next() && forward.peek().node <= m.node) {
          throw IntegrityError(detail::concat("node ", m.node, " must forward cluster ",
                                              forward.peek().cluster,
                                              " but received no size for it"));
        }
        w.push({m.node, to, m.weight, m.degree});
      }
    }
    // Second pass over the bucket: every tuple is answered with the new
    // cluster of its receiver, so no node's tuples need to be held.
    {
      auto members = updated.reader();
      auto tuples = sorted.reader();
      while (tuples.has_next()) {
        const BucketTuple t = tuples.peek();
        tuples.advance();
        while (members.peek().node < t.v) members.advance();
        writers_[t.color_u]->push({t.u, members.peek().cluster, t.v, t.weight, color});
      }
    }
    if (!queue.empty()) {
      throw IntegrityError(detail::concat(queue.size(), " size messages left after the bucket"));
    }
    members_[color] = std::move(updated);
    pending_.clear();
    pending_memory_.resize(0);
    pending_external_ = em::external_sort(
        terminals, [](const em::NodeValue& a, const em::NodeValue& b) { return a.node < b.node; },
        "terminal-sizes");
    return stats;
  }

  /// Writes back any size updates still held and returns the sizes of all
  /// clusters (cluster_space entries).
  const em::ExternalArray<Weight>& flush_sizes() {
    require_sizes();
    internal::SpanCursor<ClusterId> none{std::span<const ClusterId>()};
    sync_sizes(none, [](ClusterId c) { return c; }, [](ClusterId, Weight) {});
    return sizes_;
  }

  /// Current (node-sorted) assignment. Closes no buckets; costs one merge of
  /// the member arrays.
  em::ExternalArray<em::NodeValue> assignment() const {
    auto out = em::ExternalArray<em::NodeValue>::temporary(*ctx_, "assignment");
    std::vector<em::ArrayReader<Member>> readers;
    readers.reserve(members_.size());
    for (const auto& m : members_) readers.push_back(m.reader());
    auto w = out.writer();
    em::kway_merge(
        readers, [](const Member& a, const Member& b) { return a.node < b.node; },
        [&](const Member& m) { w.push({m.node, m.cluster}); });
    w.close();
    return out;
  }

  const em::ExternalArray<Member>& members(Color c) const { return members_[c]; }

  /// Contents of a bucket in arrival order (tests and diagnostics).
  std::vector<BucketTuple> peek_bucket(Color c) {
    writers_[c].reset();
    auto out = buckets_[c].to_vector();
    writers_[c].emplace(buckets_[c].writer());
    return out;
  }

  /// Releases the bucket write buffers; no further rounds are possible.
  void close() {
    for (auto& w : writers_) w.reset();
  }

 private:
  // Per chunk item (a tuple or a member): the record itself, its cluster ID
  // and size in the map, a connection entry and a pending write-back entry.
  static constexpr std::size_t kMapBytesPerItem =
      sizeof(BucketTuple) + 2 * sizeof(Weight) + sizeof(ClusterWeight) + sizeof(em::NodeValue);

  void init_buckets(const em::ExternalArray<em::NodeValue>* initial) {
    const std::size_t colors = num_colors();
    const std::uint64_t limit = max_bucket_colors(ctx_->config(), mode_);
    if (g_->n() > 0 && colors > limit) {
      throw ConfigError(detail::concat(
          "coloring has ", colors, " colors but M/B = ", ctx_->config().memory_blocks(),
          " block buffers hold one bucket buffer per color plus ", bucket_work_blocks(mode_),
          " working buffers (at most ", limit,
          " colors); raise the memory budget or the class bound, or lower the block size"));
    }
    if (initial != nullptr && initial->size() != g_->n()) {
      throw DimensionError(detail::concat("initial assignment has ", initial->size(),
                                          " entries for n=", g_->n()));
    }
    auto annotated = annotate_edges_with_colors(*g_, coloring_);
    buckets_.reserve(colors);
    writers_.resize(colors);
    for (std::size_t c = 0; c < colors; ++c) {
      buckets_.push_back(em::ExternalArray<BucketTuple>::temporary(*ctx_, "bucket"));
    }
    for (std::size_t c = 0; c < colors; ++c) writers_[c].emplace(buckets_[c].writer());

    struct Staged {
      Color color;
      Member member;
    };
    auto staged = em::ExternalArray<Staged>::temporary(*ctx_, "members-staged");
    auto weights = em::ExternalArray<em::NodeValue>::temporary(*ctx_, "cluster-weights");
    {
      auto slots = annotated.reader();
      auto colors_in = coloring_.color.reader();
      auto node_weights = g_->node_weights().reader();
      std::optional<em::ArrayReader<em::NodeValue>> clusters_in;
      if (initial != nullptr) clusters_in.emplace(initial->reader());
      auto sw = staged.writer();
      std::optional<em::ArrayWriter<em::NodeValue>> ww;
      if (mode_ != SizeMode::kUnconstrained) ww.emplace(weights.writer());
      for (NodeId u = 0; u < g_->n(); ++u) {
        const Color cu = colors_in.peek().value;
        colors_in.advance();
        ClusterId ku = u;
        if (clusters_in) {
          ku = clusters_in->peek().value;
          clusters_in->advance();
        }
        if (ku >= cluster_space_) {
          throw DimensionError(detail::concat("cluster ", ku, " of node ", u,
                                              " is outside the cluster ID space of size ",
                                              cluster_space_));
        }
        const Weight cw = node_weights.peek();
        node_weights.advance();
        std::uint64_t degree = 0;
        for (;;) {
          if (!slots.has_next()) {
            throw IntegrityError(detail::concat("edge list of node ", u,
                                                " is missing its sentinel"));
          }
          const AnnotatedEdge e = slots.peek();
          slots.advance();
          if (e.is_sentinel()) break;
          ++degree;
          if (e.value == cu) {
            throw IntegrityError(detail::concat("adjacent nodes ", u, " and ", e.target,
                                                " share color ", cu));
          }
          if (e.value < cu) writers_[e.value]->push({e.target, ku, u, e.weight, cu});
        }
        max_degree_ = std::max(max_degree_, degree);
        sw.push({cu, {u, ku, cw, degree}});
        if (ww) ww->push({ku, cw});
      }
    }
    annotated = em::ExternalArray<AnnotatedEdge>();

    auto by_color = em::external_sort(
        staged,
        [](const Staged& a, const Staged& b) {
          return std::tie(a.color, a.member.node) < std::tie(b.color, b.member.node);
        },
        "members-by-color");
    staged = em::ExternalArray<Staged>();
    members_.reserve(colors);
    for (std::size_t c = 0; c < colors; ++c) {
      members_.push_back(em::ExternalArray<Member>::temporary(*ctx_, "members"));
    }
    {
      auto r = by_color.reader();
      std::optional<em::ArrayWriter<Member>> w;
      Color current = 0;
      while (r.has_next()) {
        const Staged s = r.peek();
        r.advance();
        if (!w || s.color != current) {
          w.reset();
          current = s.color;
          w.emplace(members_[current].writer());
        }
        w->push(s.member);
      }
    }

    if (mode_ != SizeMode::kUnconstrained) {
      auto sorted = em::external_sort(
          weights,
          [](const em::NodeValue& a, const em::NodeValue& b) { return a.node < b.node; },
          "cluster-weights");
      weights = em::ExternalArray<em::NodeValue>();
      sizes_ = em::ExternalArray<Weight>::temporary(*ctx_, "cluster-sizes");
      auto r = sorted.reader();
      auto w = sizes_.writer();
      for (ClusterId c = 0; c < cluster_space_; ++c) {
        Weight s = 0;
        while (r.has_next() && r.peek().node == c) {
          s += r.peek().value;
          r.advance();
        }
        w.push(s);
      }
    }
  }

  em::ExternalArray<BucketTuple> take_sorted_bucket(Color color) {
    if (color >= num_colors()) {
      throw ParameterError(detail::concat("color ", color, " out of range"));
    }
    if (!writers_[color]) throw ParameterError("bucket clustering was closed");
    writers_[color].reset();
    auto sorted = em::external_sort(buckets_[color], BucketTupleLess{}, "bucket-sorted");
    buckets_[color].clear();
    writers_[color].emplace(buckets_[color].writer());
    return sorted;
  }

  void reply(std::span<const BucketTuple> list, NodeId v, ClusterId to, Color color) {
    for (const auto& t : list) writers_[t.color_u]->push({t.u, to, v, t.weight, color});
  }

  void require_sizes() const {
    if (mode_ == SizeMode::kUnconstrained) {
      throw ParameterError("cluster sizes are only tracked with a size-bounded mode");
    }
  }

  /// Items one map chunk may hold with the memory currently available,
  /// keeping room for the size scan's reader and writer.
  std::size_t map_capacity() const {
    const std::size_t avail = ctx_->budget().available();
    const std::size_t scan = 2 * ctx_->block_size();
    return avail > scan ? (avail - scan) / kMapBytesPerItem : 0;
  }

  /// Whether the map variant can hold the largest possible node (degree + 1
  /// items) once its readers and writer are open.
  bool map_fits() const {
    const std::size_t avail = ctx_->budget().available();
    const std::size_t reserved = 6 * ctx_->block_size();
    if (avail <= reserved) return false;
    return (avail - reserved) / kMapBytesPerItem >= max_degree_ + 1;
  }

    // Half of what is left once the five scan buffers open during the bucket
  // pass are set aside; the other half holds per-node connection and size
  // lists.
  std::size_t em_queue_bytes() const { return queue_memory(*ctx_, 2, 5); }

  /// One co-scan of the size array: applies pending updates (sorted by
  /// cluster), reports the size of every wanted cluster (sorted by cluster)
  /// to `sink`, and writes the new array.
  template <typename Wanted, typename KeyOf, typename Sink>
  void sync_sizes(Wanted& wanted, KeyOf key, Sink&& sink) {
    if (!pending_external_.valid() || pending_external_.empty()) {
      internal::SpanCursor<em::NodeValue> pending(pending_);
      sync_sizes_with(pending, wanted, key, sink);
    } else {
      auto pending = pending_external_.reader();
      sync_sizes_with(pending, wanted, key, sink);
    }
    pending_.clear();
    pending_memory_.resize(0);
    pending_external_ = em::ExternalArray<em::NodeValue>();
  }

  template <typename Pending, typename Wanted, typename KeyOf, typename Sink>
  void sync_sizes_with(Pending& pending, Wanted& wanted, KeyOf key, Sink& sink) {
    auto next = em::ExternalArray<Weight>::temporary(*ctx_, "cluster-sizes");
    {
      auto in = sizes_.reader();
      auto out = next.writer();
      for (ClusterId c = 0; c < sizes_.size(); ++c) {
        Weight s = in.peek();
        in.advance();
        if (pending.has_next() && pending.peek().node == c) {
          s = pending.peek().value;
          pending.advance();
        }
        while (wanted.has_next() && key(wanted.peek()) == c) {
          sink(wanted.peek(), s);
          wanted.advance();
        }
        out.push(s);
      }
    }
    if (pending.has_next() || wanted.has_next()) {
      throw IntegrityError("cluster ID outside the size array, or size requests out of order");
    }
    sizes_ = std::move(next);
  }

  const DiskGraph* g_;
  em::Context* ctx_;
  Coloring coloring_;
  SizeMode mode_;
  Weight bound_;
  TieBreaker tb_;
  std::uint64_t cluster_space_;
  em::MemoryBudget::Reservation pending_memory_;
  std::uint64_t max_degree_ = 0;
  std::vector<em::ExternalArray<BucketTuple>> buckets_;
  std::vector<std::optional<em::ArrayWriter<BucketTuple>>> writers_;
  std::vector<em::ExternalArray<Member>> members_;
  em::ExternalArray<Weight> sizes_;
  std::vector<em::NodeValue> pending_;  // (cluster, size) of the last map chunk
  em::ExternalArray<em::NodeValue> pending_external_;  // terminal sizes of the last pq bucket
};

struct BucketConfig {
  std::uint64_t rounds = 3;
  SizeMode mode = SizeMode::kUnconstrained;
  Weight constraint = kUnbounded;
  std::uint64_t class_bound = 0;  // 0: default_coloring
  TieBreaker tie_break{};
};

struct BucketResult {
  ClusterAssignment assignment;
  std::uint64_t rounds_run = 0;
  std::vector<BucketRoundStats> per_round;
  std::size_t num_colors = 0;
  LpStats total() const {
    LpStats t;
    for (const auto& s : per_round) t += s.lp;
    return t;
  }
};

/// Colors the graph once and runs up to `rounds` bucket rounds, stopping
/// after a round without moves. The result is an external assignment.
inline BucketResult bucket_cluster(const DiskGraph& g, const BucketConfig& cfg) {
  if (cfg.mode != SizeMode::kUnconstrained && cfg.constraint == kUnbounded) {
    throw ParameterError("size-bounded bucket clustering needs a finite constraint");
  }
  if (cfg.mode == SizeMode::kUnconstrained && cfg.constraint != kUnbounded) {
    throw ParameterError("a size constraint needs the map or priority-queue bucket variant");
  }
  BucketClustering bc(g,
                      cfg.class_bound != 0 ? tfp_greedy_coloring(g, cfg.class_bound)
                                           : default_coloring(g, cfg.mode),
                      cfg.mode, cfg.constraint, cfg.tie_break);
  BucketResult res;
  res.num_colors = bc.num_colors();
  for (std::uint64_t r = 1; r <= cfg.rounds; ++r) {
    res.per_round.push_back(bc.round(r));
    ++res.rounds_run;
    if (res.per_round.back().lp.moves == 0) break;
  }
  bc.close();
  res.assignment.mode = Model::kExternal;
  res.assignment.external = bc.assignment();
  return res;
}

}  // namespace extpart
