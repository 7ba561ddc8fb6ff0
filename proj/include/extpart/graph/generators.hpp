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
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "extpart/common.hpp"
#include "extpart/graph/builder.hpp"

namespace extpart::generators {

/// Two triangles {0,1,2} and {3,4,5} joined by the bridge (2,3).
inline std::vector<WeightedEdge> two_triangles() {
  return {{0, 1, 1}, {0, 2, 1}, {1, 2, 1}, {2, 3, 1}, {3, 4, 1}, {3, 5, 1}, {4, 5, 1}};
}

inline std::vector<WeightedEdge> path(NodeId n) {
  std::vector<WeightedEdge> e;
  for (NodeId v = 0; v + 1 < n; ++v) e.push_back({v, v + 1, 1});
  return e;
}

/// Side x side grid, row-major IDs.
inline std::vector<WeightedEdge> grid(NodeId side) {
  std::vector<WeightedEdge> e;
  for (NodeId r = 0; r < side; ++r) {
    for (NodeId c = 0; c < side; ++c) {
      const NodeId v = r * side + c;
      if (c + 1 < side) e.push_back({v, v + 1, 1});
      if (r + 1 < side) e.push_back({v, v + side, 1});
    }
  }
  return e;
}

/// `width` x `length` grid numbered row by row (rows of `width` nodes). With a
/// fixed width, every edge spans at most `width` IDs however long the strip.
inline std::vector<WeightedEdge> strip(NodeId width, NodeId length) {
  std::vector<WeightedEdge> e;
  for (NodeId r = 0; r < length; ++r) {
    for (NodeId c = 0; c < width; ++c) {
      const NodeId v = r * width + c;
      if (c + 1 < width) e.push_back({v, v + 1, 1});
      if (r + 1 < length) e.push_back({v, v + width, 1});
    }
  }
  return e;
}

/// Erdos-Renyi style graph with `edges` distinct random edges (capped at the
/// complete graph) and weights uniform in [1, max_weight].
inline std::vector<WeightedEdge> random_graph(NodeId n, std::uint64_t edges, Weight max_weight,
                                              std::mt19937_64& rng) {
  std::vector<WeightedEdge> out;
  if (n < 2) return out;
  edges = std::min<std::uint64_t>(edges, n * (n - 1) / 2);
  std::set<std::pair<NodeId, NodeId>> seen;
  std::uniform_int_distribution<NodeId> node(0, n - 1);
  std::uniform_int_distribution<Weight> weight(1, std::max<Weight>(1, max_weight));
  while (out.size() < edges) {
    NodeId u = node(rng), v = node(rng);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (!seen.insert({u, v}).second) continue;
    out.push_back({u, v, weight(rng)});
  }
  return out;
}

/// Random geometric graph: n random points in the unit square, an edge for
/// every pair closer than radius_factor * sqrt(ln n / n) (0.55 makes the graph
/// almost surely connected). Node IDs follow a row-major walk over grid cells
/// of side r, so IDs are spatially local. Calls emit(u, v) once per edge with
/// u < v.
template <typename Emit>
void random_geometric(NodeId n, double radius_factor, std::uint64_t seed, Emit&& emit) {
  if (n < 2) return;
  const double r = radius_factor * std::sqrt(std::log(static_cast<double>(n)) /
                                             static_cast<double>(n));
  const auto cells = static_cast<std::uint64_t>(std::max(1.0, std::floor(1.0 / r)));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, 1.0);
  struct Point {
    double x, y;
    std::uint64_t cell;
  };
  std::vector<Point> pts(n);
  auto cell_of = [&](double c) {
    return std::min<std::uint64_t>(cells - 1, static_cast<std::uint64_t>(c * cells));
  };
  for (auto& p : pts) {
    p.x = coord(rng);
    p.y = coord(rng);
    p.cell = cell_of(p.y) * cells + cell_of(p.x);
  }
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.cell != b.cell ? a.cell < b.cell : a.x < b.x;
  });
  std::vector<std::uint64_t> cell_start(cells * cells + 1, 0);
  for (const auto& p : pts) ++cell_start[p.cell + 1];
  for (std::size_t i = 1; i < cell_start.size(); ++i) cell_start[i] += cell_start[i - 1];
  const double r2 = r * r;
  for (NodeId u = 0; u < n; ++u) {
    const auto cy = static_cast<std::int64_t>(pts[u].cell / cells);
    const auto cx = static_cast<std::int64_t>(pts[u].cell % cells);
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const std::int64_t y = cy + dy, x = cx + dx;
        if (y < 0 || x < 0 || y >= static_cast<std::int64_t>(cells) ||
            x >= static_cast<std::int64_t>(cells)) {
          continue;
        }
        const auto c = static_cast<std::uint64_t>(y) * cells + static_cast<std::uint64_t>(x);
        for (auto v = cell_start[c]; v < cell_start[c + 1]; ++v) {
          if (v <= u) continue;
          const double ddx = pts[u].x - pts[v].x, ddy = pts[u].y - pts[v].y;
          if (ddx * ddx + ddy * ddy < r2) emit(u, static_cast<NodeId>(v));
        }
      }
    }
  }
}

inline std::vector<WeightedEdge> random_geometric(NodeId n, double radius_factor,
                                                  std::uint64_t seed) {
  std::vector<WeightedEdge> e;
  random_geometric(n, radius_factor, seed, [&](NodeId u, NodeId v) { e.push_back({u, v, 1}); });
  return e;
}

/// Streams a random geometric graph straight into a DiskGraph (no in-memory
/// edge list; the point set takes 24 bytes per node).
inline DiskGraph random_geometric_graph(em::Context& ctx, NodeId n, double radius_factor,
                                        std::uint64_t seed) {
  auto arcs = em::ExternalArray<Arc>::temporary(ctx, "rgg-arcs");
  {
    auto w = arcs.writer();
    random_geometric(n, radius_factor, seed, [&](NodeId u, NodeId v) {
      w.push({u, v, 1});
      w.push({v, u, 1});
    });
  }
  return build_from_arcs(ctx, n, arcs);
}

}  // namespace extpart::generators
