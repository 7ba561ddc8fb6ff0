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

// Job description, file formats and exit codes shared by the command-line
// tool and its tests.

#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "extpart/common.hpp"
#include "extpart/em/context.hpp"
#include "extpart/em/external_array.hpp"
#include "json.hpp"

namespace extpart::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitInfeasible = 1,
  kExitInputError = 2,
  kExitResourceError = 3,
};

enum class Algorithm { kSeLp, kSeLpPar, kExtLp, kBucket, kBucketScMap, kBucketScPq };

inline constexpr std::string_view kAlgorithmNames[] = {"se-lp",  "se-lp-par",     "ext-lp",
                                                       "bucket", "bucket-sc-map", "bucket-sc-pq"};

inline std::string_view algorithm_name(Algorithm a) {
  return kAlgorithmNames[static_cast<std::size_t>(a)];
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kAlgorithmNames); ++i) {
    if (kAlgorithmNames[i] == s) return static_cast<Algorithm>(i);
  }
  throw ParameterError(detail::concat("unknown algorithm '", s,
                                      "' (se-lp, se-lp-par, ext-lp, bucket, bucket-sc-map, "
                                      "bucket-sc-pq)"));
}

/// Parses byte counts such as "8388608", "64KiB", "8MiB", "1GiB", "4K", "16M".
inline std::size_t parse_bytes(std::string_view s) {
  std::size_t value = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || p == s.data()) {
    throw ParameterError(detail::concat("not a byte count: '", s, "'"));
  }
  std::string unit(p, s.data() + s.size());
  for (auto& c : unit) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::size_t mult = 1;
  if (unit.empty() || unit == "b") {
    mult = 1;
  } else if (unit == "k" || unit == "kib" || unit == "kb") {
    mult = std::size_t{1} << 10;
  } else if (unit == "m" || unit == "mib" || unit == "mb") {
    mult = std::size_t{1} << 20;
  } else if (unit == "g" || unit == "gib" || unit == "gb") {
    mult = std::size_t{1} << 30;
  } else {
    throw ParameterError(detail::concat("unknown byte unit in '", s, "'"));
  }
  return value * mult;
}

/// Everything a job needs; serializes to and from JSON.
struct JobConfig {
  std::string command;              // build | cluster | partition | evaluate
  std::vector<std::string> inputs;  // input path(s): graph file or dir, partition file
  std::string output;               // output dir or file
  std::string format = "metis";     // build input format: metis | edgelist
  Algorithm algorithm = Algorithm::kSeLp;
  std::uint64_t k = 2;
  double epsilon = 0.03;
  std::uint64_t rounds = 3;
  std::optional<std::uint64_t> constraint;  // cluster size bound U
  std::size_t memory_budget = std::size_t{512} << 20;
  std::size_t block_size = std::size_t{1} << 20;
  std::uint64_t seed = 0;
  std::string ties = "lowest-id";   // cluster: lowest-id | random (seeded)
  std::size_t workers = 1;
  std::string scratch = std::filesystem::temp_directory_path().string();

  em::BlockConfig block_config() const {
    em::BlockConfig c;
    c.block_size_bytes = block_size;
    c.memory_budget_bytes = memory_budget;
    c.scratch_dir = scratch;
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"command", command},
                     {"inputs", inputs},
                     {"output", output},
                     {"format", format},
                     {"algorithm", algorithm_name(algorithm)},
                     {"k", k},
                     {"epsilon", epsilon},
                     {"rounds", rounds},
                     {"memory_budget", memory_budget},
                     {"block_size", block_size},
                     {"seed", seed},
                     {"ties", ties},
                     {"workers", workers},
                     {"scratch", scratch}};
    j["constraint"] = constraint ? nlohmann::json(*constraint) : nlohmann::json(nullptr);
    return j;
  }

  static JobConfig from_json(const nlohmann::json& j) {
    JobConfig c;
    try {
      c.command = j.at("command").get<std::string>();
      c.inputs = j.at("inputs").get<std::vector<std::string>>();
      c.output = j.at("output").get<std::string>();
      c.format = j.at("format").get<std::string>();
      c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
      c.k = j.at("k").get<std::uint64_t>();
      c.epsilon = j.at("epsilon").get<double>();
      c.rounds = j.at("rounds").get<std::uint64_t>();
      c.memory_budget = j.at("memory_budget").get<std::size_t>();
      c.block_size = j.at("block_size").get<std::size_t>();
      c.seed = j.at("seed").get<std::uint64_t>();
      c.ties = j.at("ties").get<std::string>();
      c.workers = j.at("workers").get<std::size_t>();
      c.scratch = j.at("scratch").get<std::string>();
      if (!j.at("constraint").is_null()) c.constraint = j.at("constraint").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(detail::concat("invalid job config: ", e.what()));
    }
    return c;
  }

  friend bool operator==(const JobConfig&, const JobConfig&) = default;
};

/// Node-sorted (node, value) file: one text header line
/// "extpart-<kind> n=<n> k=<k> record_bytes=16" followed by n binary
/// 16-byte little-endian records. `kind` is "partition" or "assignment"; k is
/// 0 for assignments.
struct NodeValueFileHeader {
  std::string kind;
  std::uint64_t n = 0;
  std::uint64_t k = 0;
};

inline void write_node_value_file(const std::filesystem::path& path, std::string_view kind,
                                  std::uint64_t k,
                                  const em::ExternalArray<em::NodeValue>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot write " + path.string());
  out << "extpart-" << kind << " n=" << values.size() << " k=" << k << " record_bytes=16\n";
  values.scan([&](const em::NodeValue& p) {
    out.write(reinterpret_cast<const char*>(&p), sizeof(p));
  });
  out.flush();
  if (!out) throw StorageError("cannot write " + path.string());
}

/// Reads a node-value file into an external array, checking the header,
/// the record count and the node order.
inline em::ExternalArray<em::NodeValue> read_node_value_file(em::Context& ctx,
                                                             const std::filesystem::path& path,
                                                             NodeValueFileHeader* header_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  NodeValueFileHeader h;
  {
    std::istringstream hs(line);
    std::string tag, n_field, k_field, rec_field;
    hs >> tag >> n_field >> k_field >> rec_field;
    if (tag.rfind("extpart-", 0) != 0 || n_field.rfind("n=", 0) != 0 ||
        k_field.rfind("k=", 0) != 0 || rec_field != "record_bytes=16") {
      throw FormatError(path.string() + ": not an extpart partition or assignment file");
    }
    h.kind = tag.substr(8);
    try {
      h.n = std::stoull(n_field.substr(2));
      h.k = std::stoull(k_field.substr(2));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": malformed header line");
    }
  }
  auto out = em::ExternalArray<em::NodeValue>::temporary(ctx, "input-node-values");
  {
    auto w = out.writer();
    em::NodeValue p{};
    NodeId expect = 0;
    while (in.read(reinterpret_cast<char*>(&p), sizeof(p))) {
      if (p.node != expect) {
        throw FormatError(detail::concat(path.string(), ": record ", expect, " names node ",
                                         p.node, " (file must be node-sorted)"));
      }
      w.push(p);
      ++expect;
    }
    if (in.gcount() != 0) throw FormatError(path.string() + ": truncated record");
    if (expect != h.n) {
      throw FormatError(detail::concat(path.string(), ": header says n=", h.n, " but holds ",
                                       expect, " records"));
    }
  }
  if (header_out != nullptr) *header_out = h;
  return out;
}

}  // namespace extpart::cli
