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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "extpart/cli/commands.hpp"
#include "extpart/cli/job.hpp"
#include "extpart/graph/generators.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace extpart::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kTwoTrianglesMetis =
    "% two triangles joined by a bridge\n"
    "6 7\n"
    "2 3\n"
    "1 3\n"
    "1 2 4\n"
    "3 5 6\n"
    "4 6\n"
    "4 5\n";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("extpart-cli-test-" + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_text(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  JobConfig job(const std::string& command, std::vector<std::string> inputs,
                const std::string& output = "") {
    JobConfig j;
    j.command = command;
    j.inputs = std::move(inputs);
    j.output = output;
    j.memory_budget = std::size_t{16} << 20;
    j.block_size = std::size_t{4} << 10;
    j.scratch = dir_.string();
    return j;
  }

  /// Runs a job, returning the exit code; stdout and stderr land in out_/err_.
  int run_job(const JobConfig& j) {
    out_.str("");
    err_.str("");
    return run(j, out_, err_);
  }

  json report() const { return json::parse(out_.str()); }

  /// Builds the two-triangle graph directory and returns its path.
  std::string two_triangles() {
    const auto src = write_text("tt.graph", kTwoTrianglesMetis);
    const auto out = (dir_ / "tt").string();
    EXPECT_EQ(run_job(job("build", {src.string()}, out)), kExitOk) << err_.str();
    return out;
  }

  void write_partition(const fs::path& path, std::uint64_t k, const std::vector<BlockId>& p) {
    em::Context ctx(testing::small_config());
    write_node_value_file(path, "partition", k, external_partition(ctx, p).external);
  }

  static std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST(ParseBytesTest, UnitsAndErrors) {
  EXPECT_EQ(parse_bytes("4096"), 4096u);
  EXPECT_EQ(parse_bytes("64KiB"), 64u << 10);
  EXPECT_EQ(parse_bytes("8M"), 8u << 20);
  EXPECT_EQ(parse_bytes("1gib"), std::size_t{1} << 30);
  EXPECT_THROW(parse_bytes("lots"), ParameterError);
  EXPECT_THROW(parse_bytes("12parsecs"), ParameterError);
}

TEST(ParseAlgorithmTest, NamesRoundTrip) {
  for (auto name : kAlgorithmNames) EXPECT_EQ(algorithm_name(parse_algorithm(name)), name);
  EXPECT_THROW(parse_algorithm("metis"), ParameterError);
}

TEST(JobConfigTest, DefaultsAndRoundTrip) {
  JobConfig a;
  EXPECT_EQ(a.rounds, 3u);
  EXPECT_EQ(a.block_size, std::size_t{1} << 20);
  EXPECT_DOUBLE_EQ(a.epsilon, 0.03);
  a.command = "partition";
  a.inputs = {"g", "p.bin"};
  a.output = "out.bin";
  a.algorithm = Algorithm::kBucketScPq;
  a.k = 16;
  a.constraint = 77;
  a.seed = 12345678901234ull;
  a.workers = 4;
  EXPECT_EQ(JobConfig::from_json(json::parse(a.to_json().dump())), a);
  a.constraint.reset();
  a.epsilon = 0.1;
  EXPECT_EQ(JobConfig::from_json(json::parse(a.to_json().dump())), a);
}

TEST(JobConfigTest, MalformedJsonIsFormatError) {
  auto j = JobConfig{}.to_json();
  j.erase("rounds");
  EXPECT_THROW(JobConfig::from_json(j), FormatError);
  j = JobConfig{}.to_json();
  j["k"] = "two";
  EXPECT_THROW(JobConfig::from_json(j), FormatError);
}

TEST_F(CliTest, NodeValueFileRoundTrip) {
  em::Context ctx(testing::small_config());
  const std::vector<BlockId> p{1, 0, 2, 2, 1};
  write_partition(dir_ / "p.bin", 3, p);
  NodeValueFileHeader h;
  auto back = read_node_value_file(ctx, dir_ / "p.bin", &h);
  EXPECT_EQ(h.kind, "partition");
  EXPECT_EQ(h.n, 5u);
  EXPECT_EQ(h.k, 3u);
  std::vector<BlockId> got;
  back.scan([&](const em::NodeValue& r) { got.push_back(r.value); });
  EXPECT_EQ(got, p);
}

TEST_F(CliTest, NodeValueFileRejectsDamage) {
  em::Context ctx(testing::small_config());
  write_text("junk.bin", "hello world\n");
  EXPECT_THROW(read_node_value_file(ctx, dir_ / "junk.bin", nullptr), FormatError);

  write_partition(dir_ / "p.bin", 2, {0, 1, 0});
  auto bytes = file_bytes(dir_ / "p.bin");
  std::ofstream(dir_ / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  EXPECT_THROW(read_node_value_file(ctx, dir_ / "short.bin", nullptr), FormatError);

  std::string lying = bytes;
  lying.replace(lying.find("n=3"), 3, "n=4");
  std::ofstream(dir_ / "lying.bin", std::ios::binary) << lying;
  EXPECT_THROW(read_node_value_file(ctx, dir_ / "lying.bin", nullptr), FormatError);

  std::string swapped = bytes;
  const auto body = swapped.find('\n') + 1;
  std::swap_ranges(swapped.begin() + static_cast<long>(body),
                   swapped.begin() + static_cast<long>(body + 16),
                   swapped.begin() + static_cast<long>(body + 16));
  std::ofstream(dir_ / "swapped.bin", std::ios::binary) << swapped;
  EXPECT_THROW(read_node_value_file(ctx, dir_ / "swapped.bin", nullptr), FormatError);
}

TEST_F(CliTest, BuildPrintsSizes) {
  const auto src = write_text("tt.graph", kTwoTrianglesMetis);
  EXPECT_EQ(run_job(job("build", {src.string()}, (dir_ / "tt").string())), kExitOk);
  EXPECT_EQ(out_.str().rfind("n=6 m=7 ", 0), 0u) << out_.str();
}

TEST_F(CliTest, BuildIsDeterministic) {
  const auto src = write_text("tt.graph", kTwoTrianglesMetis);
  ASSERT_EQ(run_job(job("build", {src.string()}, (dir_ / "a").string())), kExitOk);
  ASSERT_EQ(run_job(job("build", {src.string()}, (dir_ / "b").string())), kExitOk);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(dir_ / "a")) {
    const auto other = dir_ / "b" / entry.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(file_bytes(entry.path()), file_bytes(other)) << entry.path().filename();
    ++files;
  }
  EXPECT_GT(files, 0u);
}

TEST_F(CliTest, BuildFromEdgeList) {
  const auto src = write_text("tt.txt", "0 1\n0 2\n1 2\n2 3\n3 4\n3 5\n4 5\n");
  auto j = job("build", {src.string()}, (dir_ / "tt").string());
  j.format = "edgelist";
  EXPECT_EQ(run_job(j), kExitOk) << err_.str();
  EXPECT_EQ(out_.str().rfind("n=6 m=7 ", 0), 0u) << out_.str();
}

TEST_F(CliTest, BuildRejectsSelfLoopNamingTheNode) {
  const auto src = write_text("loop.graph", "3 2\n2 1\n1 3\n2\n");
  EXPECT_EQ(run_job(job("build", {src.string()}, (dir_ / "g").string())), kExitInputError);
  EXPECT_NE(err_.str().find("self-loop at node 1"), std::string::npos) << err_.str();
  EXPECT_NE(err_.str().find("line 2"), std::string::npos) << err_.str();
}

TEST_F(CliTest, BuildRejectsMissingInputAndBadFormat) {
  EXPECT_EQ(run_job(job("build", {(dir_ / "nope").string()}, (dir_ / "g").string())),
            kExitInputError);
  const auto src = write_text("tt.graph", kTwoTrianglesMetis);
  auto j = job("build", {src.string()}, (dir_ / "g").string());
  j.format = "graphml";
  EXPECT_EQ(run_job(j), kExitInputError);
}

TEST_F(CliTest, ClusterTwoTrianglesIntoOneCluster) {
  const auto g = two_triangles();
  auto j = job("cluster", {g}, (dir_ / "a.bin").string());
  j.algorithm = Algorithm::kSeLp;
  j.rounds = 3;
  j.seed = 1;
  ASSERT_EQ(run_job(j), kExitOk) << err_.str();
  const auto r = report();
  EXPECT_EQ(r["clusters"], 1);
  EXPECT_EQ(r["cut"], 0);
  EXPECT_EQ(r["budget_violations"], 0);
  EXPECT_TRUE(r.contains("blocks_read"));
  EXPECT_TRUE(r.contains("seconds"));
}

TEST_F(CliTest, ClusterRejectsConstraintForExternalLpBeforeIo) {
  const auto g = two_triangles();
  auto j = job("cluster", {g}, (dir_ / "a.bin").string());
  j.algorithm = Algorithm::kExtLp;
  j.constraint = 10;
  EXPECT_EQ(run_job(j), kExitInputError);
  EXPECT_FALSE(fs::exists(dir_ / "a.bin"));
  // No scratch directory was created either.
  for (const auto& entry : fs::directory_iterator(dir_)) {
    EXPECT_EQ(entry.path().filename().string().rfind("extpart-", 0), std::string::npos)
        << entry.path();
  }
  j.algorithm = Algorithm::kBucketScMap;
  j.constraint.reset();
  EXPECT_EQ(run_job(j), kExitInputError);
}

TEST_F(CliTest, ClusterIsDeterministicPerSeed) {
  em::Context ctx(testing::small_config());
  const auto gdir = dir_ / "rgg";
  generators::random_geometric_graph(ctx, 2000, 0.55, 3).save(gdir);
  for (auto algo : {Algorithm::kSeLp, Algorithm::kExtLp, Algorithm::kBucketScPq}) {
    for (const std::string ties : {"lowest-id", "random"}) {
      auto j = job("cluster", {gdir.string()}, (dir_ / "a.bin").string());
      j.algorithm = algo;
      j.ties = ties;
      j.seed = 7;
      if (algo == Algorithm::kBucketScPq) j.constraint = 20;
      ASSERT_EQ(run_job(j), kExitOk) << err_.str();
      j.output = (dir_ / "b.bin").string();
      ASSERT_EQ(run_job(j), kExitOk) << err_.str();
      EXPECT_EQ(file_bytes(dir_ / "a.bin"), file_bytes(dir_ / "b.bin"))
          << algorithm_name(algo) << " " << ties;
    }
  }
}

TEST_F(CliTest, ClusterReportMatchesAssignmentForEveryAlgorithm) {
  em::Context ctx(testing::small_config());
  const auto gdir = dir_ / "rgg";
  generators::random_geometric_graph(ctx, 1500, 0.55, 5).save(gdir);
  const auto g = DiskGraph::open(ctx, gdir);
  for (auto name : kAlgorithmNames) {
    const auto algo = parse_algorithm(name);
    auto j = job("cluster", {gdir.string()}, (dir_ / "a.bin").string());
    j.algorithm = algo;
    j.seed = 11;
    if (algo != Algorithm::kExtLp && algo != Algorithm::kBucket) j.constraint = 12;
    if (algo == Algorithm::kSeLpPar) j.workers = 3;
    ASSERT_EQ(run_job(j), kExitOk) << name << ": " << err_.str();
    const auto r = report();
    NodeValueFileHeader h;
    auto a = read_node_value_file(ctx, dir_ / "a.bin", &h);
    EXPECT_EQ(h.kind, "assignment");
    EXPECT_EQ(r["cut"].get<Weight>(), compute_cut_external(g, a)) << name;
    std::vector<ClusterId> labels;
    a.scan([&](const em::NodeValue& p) { labels.push_back(p.value); });
    std::vector<Weight> size(g.n(), 0);
    for (auto c : labels) ++size[c];
    std::size_t nonempty = 0;
    for (auto s : size) {
      nonempty += s > 0;
      if (j.constraint) {
        EXPECT_LE(s, *j.constraint) << name;
      }
    }
    EXPECT_EQ(r["clusters"].get<std::size_t>(), nonempty) << name;
  }
}

TEST_F(CliTest, PartitionTwoTrianglesOptimum) {
  const auto g = two_triangles();
  auto j = job("partition", {g}, (dir_ / "p.bin").string());
  j.k = 2;
  j.epsilon = 0;
  ASSERT_EQ(run_job(j), kExitOk) << err_.str();
  EXPECT_EQ(report()["cut"], 1);
  EXPECT_EQ(report()["feasible"], true);

  auto e = job("evaluate", {g, (dir_ / "p.bin").string()});
  e.k = 2;
  e.epsilon = 0;
  EXPECT_EQ(run_job(e), kExitOk) << err_.str();
  EXPECT_EQ(report()["cut"], 1);
}

TEST_F(CliTest, PartitionRejectsBadK) {
  const auto g = two_triangles();
  auto j = job("partition", {g}, (dir_ / "p.bin").string());
  j.k = 7;
  EXPECT_EQ(run_job(j), kExitInputError);
  EXPECT_FALSE(fs::exists(dir_ / "p.bin"));
  j.k = 1;
  EXPECT_EQ(run_job(j), kExitInputError);
  j.k = 2;
  j.algorithm = Algorithm::kExtLp;
  EXPECT_EQ(run_job(j), kExitInputError);
}

TEST_F(CliTest, PartitionReportIsRecomputedByEvaluate) {
  em::Context ctx(testing::small_config());
  const auto gdir = dir_ / "rgg";
  generators::random_geometric_graph(ctx, 1 << 12, 0.55, 1).save(gdir);
  for (auto algo : {Algorithm::kSeLp, Algorithm::kBucketScMap}) {
    auto j = job("partition", {gdir.string()}, (dir_ / "p.bin").string());
    j.algorithm = algo;
    j.k = 2;
    j.epsilon = 0.03;
    j.memory_budget = std::size_t{1} << 20;
    ASSERT_EQ(run_job(j), kExitOk) << err_.str();
    const auto r = report();
    for (const char* key : {"cut", "max_block_weight", "l_max", "feasible", "seconds",
                            "blocks_read", "blocks_written", "peak_memory_bytes", "seed",
                            "algorithm", "levels"}) {
      EXPECT_TRUE(r.contains(key)) << key;
    }
    EXPECT_EQ(r["feasible"], true);
    EXPECT_EQ(r["budget_violations"], 0);
    EXPECT_GE(r["levels"].size(), 1u);

    auto e = job("evaluate", {gdir.string(), (dir_ / "p.bin").string()});
    e.k = 2;
    e.epsilon = 0.03;
    ASSERT_EQ(run_job(e), kExitOk) << err_.str();
    const auto ev = report();
    EXPECT_EQ(ev["cut"], r["cut"]);
    EXPECT_EQ(ev["max_block_weight"], r["max_block_weight"]);
    EXPECT_EQ(ev["l_max"], r["l_max"]);
  }
}

TEST_F(CliTest, EvaluateAllZerosIsInfeasible) {
  const auto g = two_triangles();
  write_partition(dir_ / "zero.bin", 2, std::vector<BlockId>(6, 0));
  auto e = job("evaluate", {g, (dir_ / "zero.bin").string()});
  e.k = 2;
  EXPECT_EQ(run_job(e), kExitInfeasible);
  EXPECT_EQ(report()["cut"], 0);
  EXPECT_EQ(report()["feasible"], false);
}

TEST_F(CliTest, EvaluateFlippedNodeChangesCutByCrossingDelta) {
  const auto g = two_triangles();
  const auto edges = generators::two_triangles();
  const std::vector<BlockId> base{0, 0, 0, 1, 1, 1};
  for (NodeId v = 0; v < 6; ++v) {
    std::vector<BlockId> flipped = base;
    flipped[v] ^= 1;
    // Local recount: edges at v that are cut after the flip minus before.
    long delta = 0;
    for (const auto& e : edges) {
      if (e.u != v && e.v != v) continue;
      delta += (flipped[e.u] != flipped[e.v]) - (base[e.u] != base[e.v]);
    }
    write_partition(dir_ / "f.bin", 2, flipped);
    auto ev = job("evaluate", {g, (dir_ / "f.bin").string()});
    ev.k = 2;
    ev.epsilon = 1.0;
    ASSERT_EQ(run_job(ev), kExitOk) << err_.str();
    EXPECT_EQ(report()["cut"].get<long>(), 1 + delta) << "node " << v;
  }
}

TEST_F(CliTest, EvaluateLengthMismatchIsInputError) {
  const auto g = two_triangles();
  write_partition(dir_ / "short.bin", 2, {0, 1, 0, 1, 0});
  auto e = job("evaluate", {g, (dir_ / "short.bin").string()});
  e.k = 2;
  EXPECT_EQ(run_job(e), kExitInputError);
  EXPECT_NE(err_.str().find("error:"), std::string::npos);
}

TEST_F(CliTest, ResourceErrorsExitThree) {
  const auto g = two_triangles();
  auto j = job("cluster", {g}, (dir_ / "a.bin").string());
  j.memory_budget = 1024;  // smaller than one block
  EXPECT_EQ(run_job(j), kExitResourceError) << err_.str();
}

TEST_F(CliTest, UnknownCommandIsInputError) {
  EXPECT_EQ(run_job(job("compress", {})), kExitInputError);
}

TEST_F(CliTest, ExecutableExitCodes) {
  const std::string bin = EXTPART_CLI_PATH;
  auto sh = [&](const std::string& args) {
    const int status = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  const auto src = write_text("tt.graph", kTwoTrianglesMetis).string();
  const auto g = (dir_ / "tt").string();
  const auto scratch = " --scratch " + dir_.string();
  EXPECT_EQ(sh("--help"), 0);
  EXPECT_EQ(sh("frobnicate"), kExitInputError);
  EXPECT_EQ(sh("build " + src + " " + g + scratch), kExitOk);
  EXPECT_EQ(sh("cluster " + g + " " + dir_.string() + "/a.bin --algo ext-lp --constraint 10" +
               scratch),
            kExitInputError);
  EXPECT_EQ(sh("cluster " + g + " " + dir_.string() + "/a.bin --algo se-lp --rounds 3 --seed 1" +
               scratch),
            kExitOk);
  EXPECT_EQ(sh("partition " + g + " " + dir_.string() + "/p.bin --k 2 --epsilon 0 --seed 3" +
               scratch),
            kExitOk);
  EXPECT_EQ(sh("evaluate " + g + " " + dir_.string() + "/p.bin --k 2 --epsilon 0" + scratch),
            kExitOk);
  EXPECT_EQ(sh("partition " + g + " " + dir_.string() + "/p.bin --k 7" + scratch),
            kExitInputError);
  EXPECT_EQ(sh("cluster " + g + " " + dir_.string() + "/a.bin --memory-budget 12parsecs" +
               scratch),
            kExitInputError);
}

}  // namespace
}  // namespace extpart::cli
