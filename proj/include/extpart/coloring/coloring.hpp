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
#include <vector>

#include "extpart/common.hpp"
#include "extpart/em/external_array.hpp"
#include "extpart/em/priority_queue.hpp"
#include "extpart/graph/disk_graph.hpp"
#include "extpart/lp/external.hpp"

namespace extpart {

using Color = std::uint64_t;

/// Proper node coloring with bounded color classes. `color` is a node-sorted
/// array of (node, color) pairs; the class counters are kept in memory.
struct Coloring {
  em::ExternalArray<em::NodeValue> color;
  std::vector<std::uint64_t> class_size;
  std::uint64_t class_bound = 0;

  std::size_t num_colors() const { return class_size.size(); }
};

/// Default bound on the size of a color class for n nodes, memory M and
/// block size B: max(ceil(n / (M/B - 1)), ceil(n / 64)). The first term keeps
/// the number of classes forced by the bound below M/B, the second keeps
/// individual classes small.
inline std::uint64_t default_class_bound(NodeId n, const em::BlockConfig& cfg) {
  const std::uint64_t buffers = cfg.memory_blocks();
  const std::uint64_t slots = buffers > 1 ? buffers - 1 : 1;
  return std::max<std::uint64_t>({1, detail::ceil_div(n, slots), detail::ceil_div(n, 64)});
}

/// Greedy coloring by time-forward processing. Nodes are colored in
/// increasing ID with the smallest color that no lower-ID neighbor uses and
/// whose class still has room; each color is then sent to the higher-ID
/// neighbors through an external priority queue. Sort(m) I/Os.
inline Coloring tfp_greedy_coloring(const DiskGraph& g, std::uint64_t class_bound) {
  if (class_bound == 0) throw ParameterError("color class bound must be at least 1");
  em::Context& ctx = g.context();
  Coloring out;
  out.class_bound = class_bound;
  out.color = em::ExternalArray<em::NodeValue>::temporary(ctx, "coloring");
  struct Less {
    bool operator()(const em::NodeValue& a, const em::NodeValue& b) const {
      return a.node != b.node ? a.node < b.node : a.value < b.value;
    }
  };
  em::ExternalPriorityQueue<em::NodeValue, Less> queue(ctx, queue_memory(ctx, 2, 4));  // half: the rest buffers adjacency lists
  auto writer = out.color.writer();
  AdjacencyStream adj(g);
  std::vector<Color> used;
  while (adj.next()) {
    const NodeId u = adj.node();
    used.clear();
    while (!queue.empty() && queue.top().node == u) used.push_back(queue.pop_min().value);
    // Popped in increasing color order; duplicates possible.
    Color c = 0;
    std::size_t i = 0;
    for (;;) {
      while (i < used.size() && used[i] < c) ++i;
      const bool taken = i < used.size() && used[i] == c;
      const bool full = c < out.class_size.size() && out.class_size[c] >= class_bound;
      if (!taken && !full) break;
      ++c;
    }
    if (c >= out.class_size.size()) out.class_size.resize(c + 1, 0);
    ++out.class_size[c];
    writer.push({u, c});
    for (const auto& e : adj.list()) {
      if (e.target > u) queue.push({e.target, c});
    }
  }
  writer.close();
  return out;
}


/// Augments every edge slot (u, v, w) with color[v]; a join by target that
/// costs Sort(m) I/Os. Sentinel slots carry color 0.
inline em::ExternalArray<AnnotatedEdge> annotate_edges_with_colors(const DiskGraph& g,
                                                                   const Coloring& coloring) {
  if (coloring.color.size() != g.n()) {
    throw DimensionError(detail::concat("coloring has ", coloring.color.size(),
                                        " entries for n=", g.n()));
  }
  return annotate_targets(g, coloring.color);
}

/// Full check of a coloring: adjacent nodes differ and class sizes match the
/// counters and the bound. Returns an empty string when valid.
inline std::string validate_coloring(const DiskGraph& g, const Coloring& coloring) {
  if (coloring.color.size() != g.n()) return "coloring length differs from n";
  const auto color = coloring.color.to_vector();
  std::vector<std::uint64_t> counted(coloring.num_colors(), 0);
  std::string error;
  for_each_adjacency(g, [&](NodeId u, Weight, std::span<const EdgeRecord> list) {
    const Color cu = color[u].value;
    if (cu >= counted.size()) {
      if (error.empty()) error = detail::concat("node ", u, " has unknown color ", cu);
      return;
    }
    ++counted[cu];
    for (const auto& e : list) {
      if (color[e.target].value == cu && error.empty()) {
        error = detail::concat("adjacent nodes ", u, " and ", e.target, " share color ", cu);
      }
    }
  });
  if (!error.empty()) return error;
  for (std::size_t c = 0; c < counted.size(); ++c) {
    if (counted[c] != coloring.class_size[c]) {
      return detail::concat("class ", c, " counter says ", coloring.class_size[c], " but has ",
                            counted[c], " nodes");
    }
    if (counted[c] > coloring.class_bound) {
      return detail::concat("class ", c, " exceeds the bound ", coloring.class_bound);
    }
  }
  return "";
}

}  // namespace extpart
