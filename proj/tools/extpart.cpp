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

// Command-line front end: build, cluster, partition, evaluate.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "extpart/cli/commands.hpp"
#include "extpart/cli/job.hpp"

namespace {

using extpart::cli::JobConfig;

struct RawFlags {
  std::string algorithm = "se-lp";
  std::string memory_budget = "512MiB";
  std::string block_size = "1MiB";
  std::uint64_t constraint = 0;
};

void add_resources(CLI::App* sub, JobConfig& job, RawFlags& raw) {
  sub->add_option("--memory-budget", raw.memory_budget,
                  "internal memory M, e.g. 8MiB (default 512MiB)");
  sub->add_option("--block-size", raw.block_size, "block size B, e.g. 64KiB (default 1MiB)");
  sub->add_option("--scratch", job.scratch, "directory for scratch files");
}

void add_algorithm(CLI::App* sub, JobConfig& job, RawFlags& raw) {
  sub->add_option("--algo", raw.algorithm,
                  "se-lp | se-lp-par | ext-lp | bucket | bucket-sc-map | bucket-sc-pq");
  sub->add_option("--rounds", job.rounds, "label propagation rounds (default 3)");
  sub->add_option("--constraint", raw.constraint, "cluster size bound U in node weight");
  sub->add_option("--seed", job.seed, "random seed (default 0)");
  sub->add_option("--workers", job.workers, "threads for se-lp-par (default 1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"extpart: external-memory graph clustering and partitioning"};
  app.require_subcommand(1);
  JobConfig job;
  RawFlags raw;
  std::string input, second;

  auto* build = app.add_subcommand("build", "build a graph directory from METIS or edge-list text");
  build->add_option("input", input, "input text file")->required();
  build->add_option("output", job.output, "output graph directory")->required();
  build->add_option("--format", job.format, "metis | edgelist (default metis)");
  add_resources(build, job, raw);

  auto* cluster = app.add_subcommand("cluster", "label propagation clustering");
  cluster->add_option("graph", input, "graph directory")->required();
  cluster->add_option("output", job.output, "assignment file to write")->required();
  add_algorithm(cluster, job, raw);
  cluster->add_option("--ties", job.ties, "tie breaking: lowest-id (default) or random");
  add_resources(cluster, job, raw);

  auto* part = app.add_subcommand("partition", "multilevel k-way partitioning");
  part->add_option("graph", input, "graph directory")->required();
  part->add_option("output", job.output, "partition file to write")->required();
  part->add_option("--k", job.k, "number of blocks (default 2)");
  part->add_option("--epsilon", job.epsilon, "imbalance (default 0.03)");
  add_algorithm(part, job, raw);
  add_resources(part, job, raw);

  auto* eval = app.add_subcommand("evaluate", "recompute cut and balance of a partition file");
  eval->add_option("graph", input, "graph directory")->required();
  eval->add_option("partition", second, "partition file")->required();
  eval->add_option("--k", job.k, "number of blocks (default 2)");
  eval->add_option("--epsilon", job.epsilon, "imbalance (default 0.03)");
  add_resources(eval, job, raw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? extpart::cli::kExitOk : extpart::cli::kExitInputError;
  }

  try {
    for (auto* sub : {build, cluster, part, eval}) {
      if (sub->parsed()) {
        job.command = sub->get_name();
        const auto* opt = sub->get_option_no_throw("--constraint");
        if (opt != nullptr && opt->count() > 0) job.constraint = raw.constraint;
      }
    }
    job.inputs = {input};
    if (!second.empty()) job.inputs.push_back(second);
    job.algorithm = extpart::cli::parse_algorithm(raw.algorithm);
    job.memory_budget = extpart::cli::parse_bytes(raw.memory_budget);
    job.block_size = extpart::cli::parse_bytes(raw.block_size);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return extpart::cli::kExitInputError;
  }
  return extpart::cli::run(job, std::cout, std::cerr);
}
