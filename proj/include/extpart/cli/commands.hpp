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

// The four batch commands. Each takes a JobConfig, writes one line of JSON
// to `out` and a human-readable summary to `err`, and returns an exit code.

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include "extpart/cli/job.hpp"
#include "extpart/coloring/bucket.hpp"
#include "extpart/common.hpp"
#include "extpart/em/context.hpp"
#include "extpart/graph/builder.hpp"
#include "extpart/graph/disk_graph.hpp"
#include "extpart/graph/metrics.hpp"
#include "extpart/lp/lp_cluster.hpp"
#include "extpart/multilevel/contraction.hpp"
#include "extpart/multilevel/pipeline.hpp"
#include "extpart/multilevel/refinement.hpp"
#include "json.hpp"

namespace extpart::cli {

namespace internal {

inline nlohmann::json io_json(const em::IoStats& io) {
  nlohmann::json read = nlohmann::json::object(), written = nlohmann::json::object();
  for (std::size_t t = 0; t < em::kIoTagCount; ++t) {
    const auto name = std::string(em::tag_name(static_cast<em::IoTag>(t)));
    read[name] = io.read[t];
    written[name] = io.written[t];
  }
  return {{"blocks_read", read}, {"blocks_written", written}};
}

inline void require_inputs(const JobConfig& job, std::size_t count) {
  if (job.inputs.size() != count) {
    throw ParameterError(detail::concat(job.command, " needs ", count, " input path(s), got ",
                                        job.inputs.size()));
  }
  for (const auto& p : job.inputs) {
    if (!std::filesystem::exists(p)) throw FormatError("input " + p + " does not exist");
  }
}

/// Flag combinations of `cluster`, checked before any I/O.
inline void check_cluster_flags(const JobConfig& job) {
  switch (job.algorithm) {
    case Algorithm::kExtLp:
    case Algorithm::kBucket:
      if (job.constraint) {
        throw ParameterError(detail::concat(
            algorithm_name(job.algorithm),
            " has no size constraint; use se-lp, se-lp-par, bucket-sc-map or bucket-sc-pq"));
      }
      break;
    case Algorithm::kBucketScMap:
    case Algorithm::kBucketScPq:
      if (!job.constraint) {
        throw ParameterError(
            detail::concat(algorithm_name(job.algorithm), " needs --constraint"));
      }
      break;
    case Algorithm::kSeLp:
    case Algorithm::kSeLpPar:
      break;
  }
  if (job.constraint && *job.constraint == 0) {
    throw ParameterError("--constraint must be positive");
  }
  if (job.workers == 0) throw ParameterError("--workers must be at least 1");
  if (job.workers > 1 && job.algorithm != Algorithm::kSeLpPar) {
    throw ParameterError("--workers applies only to se-lp-par");
  }
  if (job.ties != "lowest-id" && job.ties != "random") {
    throw ParameterError("--ties must be lowest-id or random, got " + job.ties);
  }
}

inline void check_partition_flags(const JobConfig& job) {
  if (job.k < 2) throw ParameterError(detail::concat("--k must be at least 2, got ", job.k));
  if (!(job.epsilon >= 0)) throw ParameterError("--epsilon must be non-negative");
  if (job.algorithm == Algorithm::kExtLp || job.algorithm == Algorithm::kBucket) {
    throw ParameterError(detail::concat(
        "partition coarsens with size-constrained clustering; ", algorithm_name(job.algorithm),
        " has no size constraint (use se-lp, se-lp-par, bucket-sc-map or bucket-sc-pq)"));
  }
  if (job.constraint && *job.constraint == 0) {
    throw ParameterError("--constraint must be positive");
  }
  if (job.workers == 0) throw ParameterError("--workers must be at least 1");
  if (job.workers > 1 && job.algorithm != Algorithm::kSeLpPar) {
    throw ParameterError("--workers applies only to se-lp-par");
  }
}

/// Runs `body(ctx)` in a fresh context; scratch files are removed on success
/// and kept (and named on `err`) on failure.
template <typename Body>
int with_context(const JobConfig& job, std::ostream& err, Body&& body) {
  em::Context ctx(job.block_config());
  try {
    return body(ctx);
  } catch (...) {
    ctx.keep_scratch(true);
    err << "scratch files kept in " << ctx.scratch_dir().string() << "\n";
    throw;
  }
}

}  // namespace internal

/// build: METIS or edge-list text -> graph directory. Prints "n=.. m=.. bytes=..".
inline int run_build(const JobConfig& job, std::ostream& out, std::ostream& err) {
  internal::require_inputs(job, 1);
  if (job.format != "metis" && job.format != "edgelist") {
    throw ParameterError("--format must be metis or edgelist, got " + job.format);
  }
  if (job.output.empty()) throw ParameterError("build needs an output directory");
  return internal::with_context(job, err, [&](em::Context& ctx) {
    std::ifstream in(job.inputs[0]);
    if (!in) throw FormatError("cannot read " + job.inputs[0]);
    DiskGraph g = job.format == "metis" ? build_from_metis(ctx, in) : build_from_edge_list(ctx, in);
    g.save(job.output);
    const std::uint64_t bytes = g.edges().size() * sizeof(EdgeRecord) +
                                g.offsets().size() * 8 + g.node_weights().size() * 8;
    out << "n=" << g.n() << " m=" << g.m() << " bytes=" << bytes << "\n";
    err << "built " << job.output << " from " << job.inputs[0] << "\n";
    return kExitOk;
  });
}

/// cluster: graph directory -> assignment file + report.
inline int run_cluster(const JobConfig& job, std::ostream& out, std::ostream& err) {
  internal::check_cluster_flags(job);
  internal::require_inputs(job, 1);
  if (job.output.empty()) throw ParameterError("cluster needs an output file");
  return internal::with_context(job, err, [&](em::Context& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    DiskGraph g = DiskGraph::open(ctx, job.inputs[0]);
    const TieBreaker tb{job.ties == "random" ? TieBreak::kRandom : TieBreak::kLowestId, job.seed};
    const Weight bound = job.constraint.value_or(kUnbounded);
    ClusterAssignment assignment;
    std::uint64_t rounds_run = 0;
    LpStats totals;
    nlohmann::json extra = nlohmann::json::object();
    switch (job.algorithm) {
      case Algorithm::kSeLp:
      case Algorithm::kSeLpPar:
      case Algorithm::kExtLp: {
        LpConfig cfg;
        cfg.rounds = job.rounds;
        cfg.constraint = bound;
        cfg.model = job.algorithm == Algorithm::kExtLp ? Model::kExternal : Model::kSemiExternal;
        cfg.variant = job.algorithm == Algorithm::kSeLpPar ? LpVariant::kParallel
                                                           : LpVariant::kSequential;
        cfg.workers = job.workers;
        cfg.tie_break = tb;
        auto res = lp_cluster(g, cfg);
        assignment = std::move(res.assignment);
        rounds_run = res.rounds_run;
        totals = res.total();
        break;
      }
      case Algorithm::kBucket:
      case Algorithm::kBucketScMap:
      case Algorithm::kBucketScPq: {
        BucketConfig cfg;
        cfg.rounds = job.rounds;
        cfg.mode = job.algorithm == Algorithm::kBucket      ? SizeMode::kUnconstrained
                   : job.algorithm == Algorithm::kBucketScMap ? SizeMode::kMap
                                                              : SizeMode::kPq;
        cfg.constraint = bound;
        cfg.tie_break = tb;
        auto res = bucket_cluster(g, cfg);
        assignment = std::move(res.assignment);
        rounds_run = res.rounds_run;
        totals = res.total();
        extra["colors"] = res.num_colors;
        break;
      }
    }
    if (assignment.mode == Model::kSemiExternal) {
      assignment = external_partition(ctx, assignment.memory);
    }
    const Weight cut = compute_cut_external(g, assignment.external);
    const NodeId clusters = renumber_external(ctx, assignment.external).coarse_n;
    write_node_value_file(job.output, "assignment", 0, assignment.external);
    nlohmann::json rep{{"command", "cluster"},
                       {"algorithm", algorithm_name(job.algorithm)},
                       {"seed", job.seed},
                       {"ties", job.ties},
                       {"n", g.n()},
                       {"m", g.m()},
                       {"clusters", clusters},
                       {"cut", cut},
                       {"rounds_run", rounds_run},
                       {"moves", totals.moves},
                       {"evaluations", totals.evaluations},
                       {"peak_memory_bytes", ctx.budget().peak()},
                       {"budget_violations", ctx.budget().violations()},
                       {"seconds", std::chrono::duration<double>(
                                       std::chrono::steady_clock::now() - t0)
                                       .count()}};
    rep.update(internal::io_json(ctx.io_report()));
    rep.update(extra);
    if (job.constraint) rep["constraint"] = *job.constraint;
    out << rep.dump() << "\n";
    err << algorithm_name(job.algorithm) << ": " << clusters << " clusters, cut " << cut
        << ", " << rounds_run << " rounds\n";
    return kExitOk;
  });
}

/// partition: graph directory -> partition file + report. Never writes an
/// infeasible partition (InfeasibleError propagates to exit code 1).
inline int run_partition(const JobConfig& job, std::ostream& out, std::ostream& err) {
  internal::check_partition_flags(job);
  internal::require_inputs(job, 1);
  if (job.output.empty()) throw ParameterError("partition needs an output file");
  return internal::with_context(job, err, [&](em::Context& ctx) {
    DiskGraph g = DiskGraph::open(ctx, job.inputs[0]);
    PartitionConfig cfg;
    cfg.k = job.k;
    cfg.epsilon = job.epsilon;
    cfg.rounds = job.rounds;
    cfg.refinement_rounds = job.rounds;
    cfg.seed = job.seed;
    cfg.workers = job.workers;
    cfg.coarsening_constraint = job.constraint.value_or(0);
    switch (job.algorithm) {
      case Algorithm::kBucketScMap:
        cfg.model = Model::kExternal;
        cfg.bucket_mode = SizeMode::kMap;
        break;
      case Algorithm::kBucketScPq:
        cfg.model = Model::kExternal;
        cfg.bucket_mode = SizeMode::kPq;
        break;
      default:
        cfg.model = Model::kSemiExternal;
        break;
    }
    auto res = partition(g, cfg);
    res.report.algorithm = std::string(algorithm_name(job.algorithm));
    Partition& p = res.partition;
    if (p.mode == Model::kSemiExternal) p = external_partition(ctx, p.memory);
    write_node_value_file(job.output, "partition", job.k, p.external);
    nlohmann::json rep = res.report.to_json();
    rep["command"] = "partition";
    rep["n"] = g.n();
    rep["m"] = g.m();
    out << rep.dump() << "\n";
    err << "k=" << job.k << " cut " << res.report.cut << ", heaviest block "
        << res.report.max_block_weight << " / L_max " << res.report.l_max << ", "
        << res.report.levels.size() << " level(s)\n";
    return kExitOk;
  });
}

/// evaluate: recompute cut and balance of a partition file from scratch.
/// Exit 0 iff the partition is feasible.
inline int run_evaluate(const JobConfig& job, std::ostream& out, std::ostream& err) {
  if (job.k < 2) throw ParameterError(detail::concat("--k must be at least 2, got ", job.k));
  internal::require_inputs(job, 2);
  return internal::with_context(job, err, [&](em::Context& ctx) {
    DiskGraph g = DiskGraph::open(ctx, job.inputs[0]);
    NodeValueFileHeader header;
    auto p = read_node_value_file(ctx, job.inputs[1], &header);
    const Weight cut = compute_cut_external(g, p);
    const Balance b = compute_balance_external(g, p, job.k, job.epsilon);
    nlohmann::json rep{{"command", "evaluate"},
                       {"k", job.k},
                       {"epsilon", job.epsilon},
                       {"cut", cut},
                       {"max_block_weight", b.max_block_weight},
                       {"l_max", b.l_max},
                       {"feasible", b.feasible},
                       {"block_weights", b.block_weights}};
    out << rep.dump() << "\n";
    err << "cut " << cut << ", heaviest block " << b.max_block_weight << " / L_max " << b.l_max
        << (b.feasible ? " (feasible)" : " (INFEASIBLE)") << "\n";
    return b.feasible ? kExitOk : kExitInfeasible;
  });
}

/// Maps a library exception to an exit code.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InfeasibleError*>(&e) != nullptr) return kExitInfeasible;
  if (dynamic_cast<const FormatError*>(&e) != nullptr ||
      dynamic_cast<const ParameterError*>(&e) != nullptr ||
      dynamic_cast<const DimensionError*>(&e) != nullptr ||
      dynamic_cast<const IntegrityError*>(&e) != nullptr) {
    return kExitInputError;
  }
  return kExitResourceError;
}

/// Dispatches on job.command and converts exceptions into exit codes with a
/// diagnostic on `err`.
inline int run(const JobConfig& job, std::ostream& out, std::ostream& err) {
  try {
    if (job.command == "build") return run_build(job, out, err);
    if (job.command == "cluster") return run_cluster(job, out, err);
    if (job.command == "partition") return run_partition(job, out, err);
    if (job.command == "evaluate") return run_evaluate(job, out, err);
    throw ParameterError("unknown command '" + job.command + "'");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace extpart::cli
