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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "extpart/coloring/bucket.hpp"
#include "extpart/common.hpp"
#include "extpart/graph/disk_graph.hpp"
#include "extpart/graph/metrics.hpp"
#include "extpart/lp/lp_cluster.hpp"
#include "extpart/lp/semi_external.hpp"
#include "extpart/multilevel/contraction.hpp"
#include "extpart/multilevel/initial.hpp"
#include "extpart/multilevel/refinement.hpp"
#include "json.hpp"

namespace extpart {

struct PartitionConfig {
  BlockId k = 2;
  double epsilon = 0.03;
  Weight coarsening_constraint = 0;    // cluster size bound while coarsening; 0 selects L_max
  std::uint64_t rounds = 3;            // LP rounds per coarsening level
  std::uint64_t refinement_rounds = 3; // LP rounds per refinement level
  std::uint64_t seed = 0;
  Model model = Model::kSemiExternal;
  std::size_t workers = 1;             // semi-external only: parallel LP rounds
  SizeMode bucket_mode = SizeMode::kMap;  // external only: size-bounded bucket variant
  std::uint64_t class_bound = 0;       // external only: 0 selects default_coloring
  std::uint64_t stop_threshold = 0;    // bytes; 0 selects a quarter of the memory budget
  double shrink_factor = 0.95;         // a level keeping more than this fraction stalls
  std::size_t max_levels = 64;
  InitialOptions initial{};

  void validate() const {
    if (k < 2) throw ParameterError(detail::concat("k must be at least 2, got ", k));
    if (!(epsilon >= 0)) throw ParameterError("epsilon must be non-negative");
    if (!(shrink_factor > 0 && shrink_factor <= 1)) {
      throw ParameterError("shrink factor must lie in (0, 1]");
    }
    if (workers == 0) throw ParameterError("worker count must be at least 1");
    if (model == Model::kExternal && workers > 1) {
      throw ParameterError("parallel rounds exist only in the semi-external model");
    }
    if (model == Model::kExternal && bucket_mode == SizeMode::kUnconstrained) {
      throw ParameterError("external coarsening needs a size-bounded bucket variant");
    }
  }

  Weight l_max_for(Weight total) const { return l_max(total, k, epsilon); }
  Weight constraint_for(Weight total) const {
    return coarsening_constraint != 0 ? coarsening_constraint : l_max_for(total);
  }
  std::uint64_t threshold_for(const em::Context& ctx) const {
    return stop_threshold != 0 ? stop_threshold : ctx.config().memory_budget_bytes / 4;
  }
};

/// The graphs of a multilevel run, finest first. Level 0 is the input graph
/// (borrowed); every coarser level is the contraction of the level above it
/// by map(i).
class Hierarchy {
 public:
  Hierarchy(const DiskGraph& finest, std::uint64_t stop_threshold)
      : finest_(&finest), stop_threshold_(stop_threshold) {}

  std::size_t levels() const { return 1 + coarse_.size(); }
  const DiskGraph& graph(std::size_t level) const {
    return level == 0 ? *finest_ : coarse_.at(level - 1);
  }
  const DiskGraph& coarsest() const { return graph(levels() - 1); }
  /// Map from level `level` to level `level + 1`.
  const ContractionMap& map(std::size_t level) const { return maps_.at(level); }
  std::uint64_t stop_threshold() const { return stop_threshold_; }

  void push(ContractionMap map, DiskGraph coarse) {
    maps_.push_back(std::move(map));
    coarse_.push_back(std::move(coarse));
  }
  /// Drops the coarsest level (and the map leading to it).
  void pop() {
    if (coarse_.empty()) throw ParameterError("the finest level cannot be dropped");
    coarse_.pop_back();
    maps_.pop_back();
  }

  /// Writes level_<i>/ graph directories for the coarse levels and
  /// map_<i>.bin files of node-sorted (fine, coarse) pairs.
  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < coarse_.size(); ++i) {
      coarse_[i].save(dir / detail::concat("level_", i + 1));
      em::Context& ctx = coarse_[i].context();
      auto out = em::ExternalArray<em::NodeValue>::create(ctx, dir / detail::concat("map_", i, ".bin"));
      {
        auto w = out.writer();
        if (maps_[i].mode == Model::kSemiExternal) {
          for (NodeId v = 0; v < maps_[i].memory.size(); ++v) w.push({v, maps_[i].memory[v]});
        } else {
          maps_[i].external.scan([&](const em::NodeValue& p) { w.push(p); });
        }
      }
      out.save_metadata();
    }
  }

 private:
  const DiskGraph* finest_;
  std::uint64_t stop_threshold_;
  std::vector<DiskGraph> coarse_;
  std::vector<ContractionMap> maps_;
};

namespace internal {

inline double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

/// One size-constrained clustering of a level in the configured model.
inline ClusterAssignment cluster_level(const DiskGraph& g, const PartitionConfig& cfg,
                                       Weight bound, std::size_t level) {
  const TieBreaker tb{TieBreak::kRandom, cfg.seed * 1000003 + level};
  if (cfg.model == Model::kSemiExternal) {
    ClusterState s = ClusterState::singletons(g);
    for (std::uint64_t r = 1; r <= cfg.rounds; ++r) {
      const LpStats st = cfg.workers > 1
                             ? par_se_lp_round(g, s, bound, tb, r, {cfg.workers, false})
                             : se_lp_round(g, s, bound, tb, r);
      if (st.moves == 0) break;
    }
    ClusterAssignment a;
    a.mode = Model::kSemiExternal;
    a.memory = std::move(s.cluster);
    return a;
  }
  BucketConfig bcfg;
  bcfg.rounds = cfg.rounds;
  bcfg.mode = cfg.bucket_mode;
  bcfg.constraint = bound;
  bcfg.class_bound = cfg.class_bound;
  bcfg.tie_break = tb;
  return bucket_cluster(g, bcfg).assignment;
}

}  // namespace internal

/// Contracts in the given model. The semi-external model uses the hash-table
/// contraction and falls back to the sorting one when the coarse edge set
/// does not fit the budget.
inline DiskGraph contract(const DiskGraph& g, const ContractionMap& map, Model model) {
  if (model == Model::kSemiExternal) {
    try {
      return contract_semi_external(g, map);
    } catch (const ConfigError&) {
      // fall through to the external contraction
    }
  }
  return contract_external(g, map);
}

/// Builds the hierarchy: size-constrained clustering (bound in node weight,
/// L_max by default), renumbering and contraction, repeated until a level's
/// resident size 16n + 32m + 8 fits the stop threshold. A clustering pass that
/// keeps more than shrink_factor of the nodes stalls the process; if the
/// level still exceeds the threshold this raises ConfigError. A contraction
/// below k nodes is discarded and ends the process.
inline Hierarchy coarsen(const DiskGraph& g, const PartitionConfig& cfg) {
  cfg.validate();
  em::Context& ctx = g.context();
  Hierarchy h(g, cfg.threshold_for(ctx));
  const Weight bound = cfg.constraint_for(g.total_node_weight());
  for (;;) {
    const std::size_t level = h.levels() - 1;
    const DiskGraph& cur = h.coarsest();
    if (cur.resident_bytes() <= h.stop_threshold() || cur.n() <= cfg.k) break;
    if (h.levels() >= cfg.max_levels) {
      throw ConfigError(detail::concat("coarsening reached ", cfg.max_levels,
                                       " levels without fitting ", h.stop_threshold(),
                                       " bytes; raise the memory budget"));
    }
    auto clustering = internal::cluster_level(cur, cfg, bound, level);
    ContractionMap map = renumber(ctx, clustering);
    clustering = ClusterAssignment();
    if (map.coarse_n < cfg.k) break;
    if (static_cast<double>(map.coarse_n) > cfg.shrink_factor * static_cast<double>(cur.n())) {
      throw ConfigError(detail::concat(
          "coarsening stalled at level ", level, ": clustering kept ", map.coarse_n, " of ",
          cur.n(), " nodes while the level needs ", cur.resident_bytes(),
          " bytes, above the stop threshold of ", h.stop_threshold(),
          " bytes; raise the memory budget"));
    }
    DiskGraph coarse = contract(cur, map, cfg.model);
    h.push(std::move(map), std::move(coarse));
  }
  return h;
}

/// Result numbers of a partitioning or clustering job.
struct MetricsReport {
  std::string algorithm;
  std::uint64_t seed = 0;
  BlockId k = 0;
  double epsilon = 0;
  Weight cut = 0;
  Weight max_block_weight = 0;
  Weight l_max = 0;
  bool feasible = false;
  std::vector<std::pair<std::string, double>> phase_seconds;
  em::IoStats io;
  std::size_t peak_memory_bytes = 0;
  std::uint64_t budget_violations = 0;
  std::vector<std::pair<NodeId, std::uint64_t>> levels;  // (n, m) finest first
  std::size_t initial_level = 0;   // level that was partitioned in memory
  std::uint64_t refinement_moves = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["algorithm"] = algorithm;
    j["seed"] = seed;
    j["k"] = k;
    j["epsilon"] = epsilon;
    j["cut"] = cut;
    j["max_block_weight"] = max_block_weight;
    j["l_max"] = l_max;
    j["feasible"] = feasible;
    nlohmann::json phases = nlohmann::json::object();
    for (const auto& [name, s] : phase_seconds) phases[name] = s;
    j["seconds"] = phases;
    nlohmann::json read = nlohmann::json::object(), written = nlohmann::json::object();
    for (std::size_t t = 0; t < em::kIoTagCount; ++t) {
      const auto name = std::string(em::tag_name(static_cast<em::IoTag>(t)));
      read[name] = io.read[t];
      written[name] = io.written[t];
    }
    j["blocks_read"] = read;
    j["blocks_written"] = written;
    j["peak_memory_bytes"] = peak_memory_bytes;
    j["budget_violations"] = budget_violations;
    nlohmann::json lv = nlohmann::json::array();
    for (const auto& [n, m] : levels) lv.push_back({{"n", n}, {"m", m}});
    j["levels"] = lv;
    j["initial_level"] = initial_level;
    j["refinement_moves"] = refinement_moves;
    return j;
  }
  /// One line of JSON.
  std::string to_line() const { return to_json().dump(); }
};

struct PartitionResult {
  Partition partition;
  MetricsReport report;
};

/// The multilevel pipeline: coarsen, partition the coarsest level in memory,
/// then project and refine level by level back to the input graph. If no
/// feasible partition of the coarsest level exists (heavy coarse nodes), the
/// coarsest level is dropped and the next finer one is partitioned instead.
/// The partition is resident in the semi-external model and an external array
/// in the external model. Raises InfeasibleError if even the finest level
/// admits no feasible partition found by the in-memory partitioner.
inline PartitionResult partition(const DiskGraph& g, const PartitionConfig& cfg) {
  cfg.validate();
  if (cfg.k > g.n()) {
    throw ParameterError(detail::concat("k=", cfg.k, " exceeds the ", g.n(), " nodes"));
  }
  em::Context& ctx = g.context();
  const auto io_start = ctx.io_report();
  const auto t_start = std::chrono::steady_clock::now();
  PartitionResult res;
  MetricsReport& rep = res.report;
  rep.seed = cfg.seed;
  rep.k = cfg.k;
  rep.epsilon = cfg.epsilon;

  auto t = std::chrono::steady_clock::now();
  Hierarchy h = coarsen(g, cfg);
  for (std::size_t i = 0; i < h.levels(); ++i) rep.levels.push_back({h.graph(i).n(), h.graph(i).m()});
  rep.phase_seconds.push_back({"coarsening", internal::seconds_since(t)});

  t = std::chrono::steady_clock::now();
  std::vector<BlockId> coarse_blocks;
  for (;;) {
    try {
      coarse_blocks = partition_coarsest(h.coarsest(), cfg.k, cfg.epsilon, cfg.seed, cfg.initial);
      break;
    } catch (const InfeasibleError&) {
      if (h.levels() == 1) throw;
      h.pop();
    }
  }
  rep.initial_level = h.levels() - 1;
  Partition p = cfg.model == Model::kSemiExternal
                    ? memory_partition(std::move(coarse_blocks))
                    : external_partition(ctx, coarse_blocks);
  coarse_blocks = {};
  rep.phase_seconds.push_back({"initial", internal::seconds_since(t)});

  t = std::chrono::steady_clock::now();
  RefineConfig rcfg;
  rcfg.k = cfg.k;
  rcfg.epsilon = cfg.epsilon;
  rcfg.rounds = cfg.refinement_rounds;
  rcfg.workers = cfg.workers;
  rcfg.bucket_mode = cfg.bucket_mode;
  rcfg.class_bound = cfg.class_bound;
  while (h.levels() > 1) {
    const std::size_t level = h.levels() - 2;
    p = project(p, h.map(level));
    h.pop();
    rcfg.tie_break = TieBreaker{TieBreak::kRandom, cfg.seed * 1000003 + 500009 + level};
    auto refined = refine_level(h.graph(level), p, rcfg);
    rep.refinement_moves += refined.stats.moves;
    p = std::move(refined.partition);
  }
  rep.phase_seconds.push_back({"uncoarsening", internal::seconds_since(t)});

  t = std::chrono::steady_clock::now();
  rep.cut = partition_cut(g, p);
  const Balance b = partition_balance(g, p, cfg.k, cfg.epsilon);
  rep.max_block_weight = b.max_block_weight;
  rep.l_max = b.l_max;
  rep.feasible = b.feasible;
  rep.phase_seconds.push_back({"evaluation", internal::seconds_since(t)});
  rep.phase_seconds.push_back({"total", internal::seconds_since(t_start)});
  rep.io = ctx.io_report() - io_start;
  rep.peak_memory_bytes = ctx.budget().peak();
  rep.budget_violations = ctx.budget().violations();
  if (!b.feasible) {
    throw InfeasibleError(detail::concat("pipeline produced an infeasible partition: heaviest "
                                         "block ", b.max_block_weight, " > L_max=", b.l_max));
  }
  res.partition = std::move(p);
  return res;
}

}  // namespace extpart
