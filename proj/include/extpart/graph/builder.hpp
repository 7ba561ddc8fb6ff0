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
#include <charconv>
#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "extpart/common.hpp"
#include "extpart/em/external_array.hpp"
#include "extpart/em/sort.hpp"
#include "extpart/graph/disk_graph.hpp"

namespace extpart {

/// Directed edge slot (source, target, weight); 24 bytes on disk.
struct Arc {
  NodeId source;
  NodeId target;
  Weight weight;
  friend bool operator==(const Arc&, const Arc&) = default;
};
static_assert(sizeof(Arc) == 24);

/// Undirected weighted edge for in-memory construction.
struct WeightedEdge {
  NodeId u;
  NodeId v;
  Weight w = 1;
};

namespace internal {

inline bool arc_less(const Arc& a, const Arc& b) {
  return std::tie(a.source, a.target) < std::tie(b.source, b.target);
}

/// Sorts `arcs` by (source, target), merges parallel arcs by summing weights
/// and lays out the sentinel-terminated adjacency array. When `check_symmetry`
/// is set every (u, v, w) must have a matching (v, u, w), verified with a
/// second sort. I/O: O(Sort(m)).
inline DiskGraph assemble(em::Context& ctx, NodeId n, const em::ExternalArray<Arc>& arcs,
                          em::ExternalArray<Weight> node_weights, Weight total_node_weight,
                          bool check_symmetry) {
  auto sorted = em::external_sort(arcs, arc_less, "build-arcs");

  // Merge parallel arcs.
  auto merged = em::ExternalArray<Arc>::temporary(ctx, "build-merged");
  {
    auto w = merged.writer();
    auto r = sorted.reader();
    bool have = false;
    Arc cur{};
    while (r.has_next()) {
      const Arc& a = r.peek();
      if (a.source >= n || a.target >= n) {
        throw FormatError(detail::concat("edge (", a.source, ",", a.target,
                                         ") names a node >= n=", n));
      }
      if (have && a.source == cur.source && a.target == cur.target) {
        cur.weight += a.weight;
      } else {
        if (have) w.push(cur);
        cur = a;
        have = true;
      }
      r.advance();
    }
    if (have) w.push(cur);
  }
  sorted = em::ExternalArray<Arc>();

  if (check_symmetry) {
    auto flipped = em::ExternalArray<Arc>::temporary(ctx, "build-flipped");
    {
      auto w = flipped.writer();
      merged.scan([&](const Arc& a) { w.push({a.target, a.source, a.weight}); });
    }
    auto flipped_sorted = em::external_sort(flipped, arc_less, "build-flipped");
    auto a = merged.reader();
    auto b = flipped_sorted.reader();
    while (a.has_next() || b.has_next()) {
      if (!a.has_next() || !b.has_next() || !(a.peek() == b.peek())) {
        const Arc& bad = a.has_next() ? a.peek() : b.peek();
        throw FormatError(detail::concat("edge (", bad.source + 1, ",", bad.target + 1,
                                         ") has no reverse entry with equal weight"));
      }
      a.advance();
      b.advance();
    }
  }

  auto edges = em::ExternalArray<EdgeRecord>::temporary(ctx, "graph-edges");
  auto offsets = em::ExternalArray<std::uint64_t>::temporary(ctx, "graph-offsets");
  std::uint64_t records = 0;
  {
    auto ew = edges.writer();
    auto ow = offsets.writer();
    auto r = merged.reader();
    for (NodeId u = 0; u < n; ++u) {
      ow.push(records);
      while (r.has_next() && r.peek().source == u) {
        ew.push({r.peek().target, r.peek().weight});
        ++records;
        r.advance();
      }
      ew.push(EdgeRecord::sentinel());
      ++records;
    }
  }
  const std::uint64_t arcs_total = records - n;
  return DiskGraph(n, arcs_total / 2, total_node_weight, std::move(edges), std::move(offsets),
                   std::move(node_weights));
}

inline em::ExternalArray<Weight> unit_weights(em::Context& ctx, NodeId n) {
  auto a = em::ExternalArray<Weight>::temporary(ctx, "graph-node-weights");
  auto w = a.writer();
  for (NodeId v = 0; v < n; ++v) w.push(1);
  w.close();
  return a;
}

/// Splits a line into whitespace-separated unsigned integers.
class LineParser {
 public:
  LineParser(std::string_view line, std::uint64_t line_no) : s_(line), line_(line_no) {}

  bool next(std::int64_t& out) {
    while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
    if (pos_ == s_.size()) return false;
    auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), out);
    if (ec != std::errc() || (p != s_.data() + s_.size() && !is_space(*p))) {
      throw FormatError(detail::concat("line ", line_, ": not an integer near '",
                                       s_.substr(pos_, 16), "'"));
    }
    pos_ = static_cast<std::size_t>(p - s_.data());
    return true;
  }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }
  std::string_view s_;
  std::uint64_t line_;
  std::size_t pos_ = 0;
};

inline bool is_comment_or_blank(std::string_view line, bool allow_blank) {
  std::size_t i = line.find_first_not_of(" \t\r");
  if (i == std::string_view::npos) return allow_blank;
  return line[i] == '%' || line[i] == '#';
}

}  // namespace internal

/// Builds a DiskGraph from METIS text: a header "n m [fmt [ncon]]" followed by
/// one line per node listing 1-indexed neighbors (with edge weights when fmt
/// ends in 1, preceded by a node weight when fmt's middle digit is 1). Lines
/// starting with '%' are comments. Every edge must be listed by both
/// endpoints with the same weight.
inline DiskGraph build_from_metis(em::Context& ctx, std::istream& in) {
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!internal::is_comment_or_blank(line, true)) break;
  }
  if (!in && line.empty()) throw FormatError("METIS input is empty");
  internal::LineParser header(line, line_no);
  std::int64_t n_decl = -1, m_decl = -1, fmt = 0, ncon = 1;
  if (!header.next(n_decl) || !header.next(m_decl) || n_decl < 0 || m_decl < 0) {
    throw FormatError(detail::concat("line ", line_no, ": METIS header needs 'n m'"));
  }
  if (header.next(fmt) && header.next(ncon) && ncon != 1) {
    throw FormatError(detail::concat("line ", line_no, ": only one node-weight constraint "
                                                       "is supported, got ncon=", ncon));
  }
  const bool has_sizes = (fmt / 100) % 10 == 1;
  const bool has_node_weights = (fmt / 10) % 10 == 1;
  const bool has_edge_weights = fmt % 10 == 1;
  if (fmt < 0 || fmt > 111 || fmt % 10 > 1 || (fmt / 10) % 10 > 1 || has_sizes) {
    throw FormatError(detail::concat("line ", line_no, ": unsupported METIS fmt ", fmt));
  }

  const auto n = static_cast<NodeId>(n_decl);
  auto arcs = em::ExternalArray<Arc>::temporary(ctx, "build-input");
  auto node_weights = em::ExternalArray<Weight>::temporary(ctx, "graph-node-weights");
  Weight total = 0;
  std::uint64_t entries = 0;
  {
    auto aw = arcs.writer();
    auto ww = node_weights.writer();
    NodeId u = 0;
    while (u < n && std::getline(in, line)) {
      ++line_no;
      if (internal::is_comment_or_blank(line, false)) continue;
      internal::LineParser p(line, line_no);
      std::int64_t c = 1;
      if (has_node_weights && (!p.next(c) || c <= 0)) {
        throw FormatError(detail::concat("line ", line_no, ": node ", u + 1,
                                         " needs a positive node weight"));
      }
      ww.push(static_cast<Weight>(c));
      total += static_cast<Weight>(c);
      std::int64_t v = 0;
      while (p.next(v)) {
        std::int64_t w = 1;
        if (has_edge_weights && !p.next(w)) {
          throw FormatError(detail::concat("line ", line_no, ": neighbor ", v,
                                           " of node ", u + 1, " lacks an edge weight"));
        }
        if (v < 1 || static_cast<NodeId>(v) > n) {
          throw FormatError(detail::concat("line ", line_no, ": neighbor ", v, " of node ",
                                           u + 1, " is outside [1, ", n, "]"));
        }
        if (static_cast<NodeId>(v) == u + 1) {
          throw FormatError(detail::concat("line ", line_no, ": self-loop at node ", u + 1));
        }
        if (w <= 0) {
          throw FormatError(detail::concat("line ", line_no, ": edge (", u + 1, ",", v,
                                           ") has non-positive weight ", w));
        }
        aw.push({u, static_cast<NodeId>(v - 1), static_cast<Weight>(w)});
        ++entries;
      }
      ++u;
    }
    if (u < n) {
      throw FormatError(detail::concat("METIS input ends after ", u, " of ", n, " node lines"));
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!internal::is_comment_or_blank(line, true)) {
      throw FormatError(detail::concat("line ", line_no, ": unexpected data after ", n,
                                       " node lines"));
    }
  }
  if (entries != 2 * static_cast<std::uint64_t>(m_decl)) {
    throw FormatError(detail::concat("METIS header declares m=", m_decl, " but the lists hold ",
                                     entries, " entries (expected ", 2 * m_decl, ")"));
  }
  return internal::assemble(ctx, n, arcs, std::move(node_weights), total,
                            /*check_symmetry=*/true);
}

/// Builds a DiskGraph from edge-list text: one "u v [w]" per line, 0-indexed,
/// each undirected edge listed once (listing both directions sums them as
/// parallel edges). n is the largest ID + 1, or `min_nodes` if larger.
inline DiskGraph build_from_edge_list(em::Context& ctx, std::istream& in, NodeId min_nodes = 0) {
  auto arcs = em::ExternalArray<Arc>::temporary(ctx, "build-input");
  NodeId n = min_nodes;
  {
    auto aw = arcs.writer();
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (internal::is_comment_or_blank(line, true)) continue;
      internal::LineParser p(line, line_no);
      std::int64_t u = 0, v = 0, w = 1, extra = 0;
      if (!p.next(u) || !p.next(v)) {
        throw FormatError(detail::concat("line ", line_no, ": expected 'u v [w]'"));
      }
      if (p.next(w) && p.next(extra)) {
        throw FormatError(detail::concat("line ", line_no, ": too many fields"));
      }
      if (u < 0 || v < 0) {
        throw FormatError(detail::concat("line ", line_no, ": negative node ID"));
      }
      if (u == v) throw FormatError(detail::concat("line ", line_no, ": self-loop at node ", u));
      if (w <= 0) {
        throw FormatError(detail::concat("line ", line_no, ": edge (", u, ",", v,
                                         ") has non-positive weight ", w));
      }
      aw.push({static_cast<NodeId>(u), static_cast<NodeId>(v), static_cast<Weight>(w)});
      aw.push({static_cast<NodeId>(v), static_cast<NodeId>(u), static_cast<Weight>(w)});
      n = std::max<NodeId>(n, static_cast<NodeId>(std::max(u, v)) + 1);
    }
  }
  return internal::assemble(ctx, n, arcs, internal::unit_weights(ctx, n), n,
                            /*check_symmetry=*/false);
}

/// Builds from an arc stream holding both directions of every edge, e.g. one
/// produced by a generator. Parallel arcs are merged. Node weights default to 1.
inline DiskGraph build_from_arcs(em::Context& ctx, NodeId n, const em::ExternalArray<Arc>& arcs,
                                 bool check_symmetry = false) {
  arcs.scan([&](const Arc& a) {
    if (a.source == a.target) throw FormatError(detail::concat("self-loop at node ", a.source));
    if (a.weight == 0) throw FormatError("edge with non-positive weight");
  });
  return internal::assemble(ctx, n, arcs, internal::unit_weights(ctx, n), n, check_symmetry);
}

/// Builds from an in-memory undirected edge list (tests, generators).
inline DiskGraph build_from_edges(em::Context& ctx, NodeId n, std::span<const WeightedEdge> edges,
                                  std::span<const Weight> node_weights = {}) {
  auto arcs = em::ExternalArray<Arc>::temporary(ctx, "build-input");
  {
    auto aw = arcs.writer();
    for (const auto& e : edges) {
      if (e.u == e.v) throw FormatError(detail::concat("self-loop at node ", e.u));
      if (e.w == 0) throw FormatError("edge with non-positive weight");
      aw.push({e.u, e.v, e.w});
      aw.push({e.v, e.u, e.w});
    }
  }
  if (node_weights.empty()) {
    return internal::assemble(ctx, n, arcs, internal::unit_weights(ctx, n), n, false);
  }
  if (node_weights.size() != n) {
    throw DimensionError(detail::concat("node weight count ", node_weights.size(), " != n=", n));
  }
  Weight total = 0;
  for (Weight c : node_weights) {
    if (c == 0) throw FormatError("node weight must be positive");
    total += c;
  }
  auto weights = em::ExternalArray<Weight>::from_span(ctx, node_weights, "graph-node-weights");
  return internal::assemble(ctx, n, arcs, std::move(weights), total, false);
}

}  // namespace extpart
