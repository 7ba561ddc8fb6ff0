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

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "gtest/gtest.h"
#include "extpart/coloring/bucket.hpp"
#include "extpart/coloring/coloring.hpp"
#include "extpart/graph/builder.hpp"
#include "extpart/graph/generators.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace extpart {
namespace {

using testing::small_config;

const TieBreaker kLowest{TieBreak::kLowestId, 0};

std::vector<Color> colors_of(const Coloring& c) {
  std::vector<Color> out;
  c.color.scan([&](const em::NodeValue& p) { out.push_back(p.value); });
  return out;
}

Coloring manual_coloring(em::Context& ctx, const std::vector<Color>& colors,
                         std::uint64_t bound = kUnbounded) {
  Coloring c;
  std::vector<em::NodeValue> pairs;
  for (NodeId v = 0; v < colors.size(); ++v) {
    pairs.push_back({v, colors[v]});
    if (colors[v] >= c.class_size.size()) c.class_size.resize(colors[v] + 1, 0);
    ++c.class_size[colors[v]];
  }
  c.color = em::ExternalArray<em::NodeValue>::from_span(ctx, std::span<const em::NodeValue>(pairs),
                                                       "coloring");
  c.class_bound = bound;
  return c;
}

em::ExternalArray<em::NodeValue> assignment_array(em::Context& ctx,
                                                  const std::vector<ClusterId>& cluster) {
  std::vector<em::NodeValue> pairs;
  for (NodeId v = 0; v < cluster.size(); ++v) pairs.push_back({v, cluster[v]});
  return em::ExternalArray<em::NodeValue>::from_span(ctx, std::span<const em::NodeValue>(pairs),
                                                     "assignment");
}

TEST(ColoringTest, TriangleNeedsThreeColors) {
  em::Context ctx(small_config());
  std::vector<WeightedEdge> e{{0, 1, 1}, {1, 2, 1}, {0, 2, 1}};
  auto g = build_from_edges(ctx, 3, e);
  auto c = tfp_greedy_coloring(g, kUnbounded);
  EXPECT_EQ(colors_of(c), (std::vector<Color>{0, 1, 2}));
  EXPECT_EQ(validate_coloring(g, c), "");
}

TEST(ColoringTest, PathIsTwoColored) {
  em::Context ctx(small_config());
  auto e = generators::path(3);
  auto g = build_from_edges(ctx, 3, e);
  EXPECT_EQ(colors_of(tfp_greedy_coloring(g, kUnbounded)), (std::vector<Color>{0, 1, 0}));
}

TEST(ColoringTest, StarWithClassBoundTwo) {
  em::Context ctx(small_config());
  std::vector<WeightedEdge> e;
  for (NodeId leaf = 1; leaf <= 5; ++leaf) e.push_back({0, leaf, 1});
  auto g = build_from_edges(ctx, 6, e);
  auto c = tfp_greedy_coloring(g, 2);
  EXPECT_EQ(colors_of(c), (std::vector<Color>{0, 1, 1, 2, 2, 3}));
  EXPECT_EQ(c.class_size, (std::vector<std::uint64_t>{1, 2, 2, 1}));
  EXPECT_EQ(validate_coloring(g, c), "");
}

TEST(ColoringTest, MatchesInMemoryGreedyWithBound) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    em::Context ctx(small_config());
    const NodeId n = 1 + rng() % 150;
    auto e = testing::random_edges(rng, n);
    auto g = build_from_edges(ctx, n, e);
    const std::uint64_t bound = trial % 3 == 0 ? kUnbounded : 1 + rng() % 20;
    auto c = tfp_greedy_coloring(g, bound);
    ASSERT_EQ(validate_coloring(g, c), "") << "trial " << trial;
    oracle::Graph og(n, e);
    ASSERT_EQ(colors_of(c), oracle::greedy_coloring(og, bound));
  }
}

TEST(ColoringTest, ZeroBoundRejected) {
  em::Context ctx(small_config());
  auto e = generators::path(3);
  auto g = build_from_edges(ctx, 3, e);
  EXPECT_THROW(tfp_greedy_coloring(g, 0), ParameterError);
}

TEST(ColoringTest, DefaultClassBound) {
  auto cfg = small_config(4096, 64 * 1024);  // M/B = 16
  EXPECT_EQ(default_class_bound(1500, cfg), 100u);
  EXPECT_EQ(default_class_bound(100000, cfg), 6667u);
  auto big = small_config(4096, 64 << 20);
  EXPECT_EQ(default_class_bound(6400, big), 100u);  // n/64 dominates
}

TEST(ColoringTest, DefaultColoringFitsTheBucketBuffers) {
  em::Context ctx(small_config(4096, 48 * 4096));  // M/B = 48
  auto g = generators::random_geometric_graph(ctx, 3000, 0.5, 4);
  EXPECT_EQ(max_bucket_colors(ctx.config(), SizeMode::kUnconstrained), 40u);
  EXPECT_EQ(max_bucket_colors(ctx.config(), SizeMode::kPq), 30u);
  // The default bound alone forces about M/B classes.
  auto plain = tfp_greedy_coloring(g, default_class_bound(g.n(), ctx.config()));
  ASSERT_GT(plain.num_colors(), 30u);
  EXPECT_THROW(BucketClustering(g, std::move(plain), SizeMode::kPq, 10, kLowest), ConfigError);
  auto c = default_coloring(g, SizeMode::kPq);
  EXPECT_LE(c.num_colors(), 30u);
  EXPECT_EQ(validate_coloring(g, c), "");
  for (SizeMode mode : {SizeMode::kMap, SizeMode::kPq}) {
    BucketConfig cfg;
    cfg.mode = mode;
    cfg.constraint = 10;
    EXPECT_NO_THROW(bucket_cluster(g, cfg));
    EXPECT_EQ(ctx.budget().violations(), 0u);
  }
}

TEST(AnnotateColorsTest, PathAnnotation) {
  em::Context ctx(small_config());
  auto e = generators::path(3);
  auto g = build_from_edges(ctx, 3, e);
  auto c = tfp_greedy_coloring(g, kUnbounded);
  auto a = annotate_edges_with_colors(g, c).to_vector();
  // Lists: 0:[1,S] 1:[0,2,S] 2:[1,S]
  ASSERT_EQ(a.size(), 7u);
  EXPECT_EQ(a[0].target, 1u);
  EXPECT_EQ(a[0].value, 1u);
  EXPECT_EQ(a[2].target, 0u);
  EXPECT_EQ(a[2].value, 0u);
  EXPECT_EQ(a[3].value, 0u);
  EXPECT_TRUE(a[4].is_sentinel());
}

TEST(AnnotateColorsTest, RandomGraphAnnotationEqualsTargetColor) {
  std::mt19937_64 rng(4);
  em::Context ctx(small_config());
  auto e = generators::random_graph(100, 400, 3, rng);
  auto g = build_from_edges(ctx, 100, e);
  auto c = tfp_greedy_coloring(g, 7);
  const auto colors = colors_of(c);
  auto a = annotate_edges_with_colors(g, c).to_vector();
  const auto edges = g.edges().to_vector();
  ASSERT_EQ(a.size(), edges.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].target, edges[i].target);
    if (!edges[i].is_sentinel()) {
      ASSERT_EQ(a[i].weight, edges[i].weight);
      ASSERT_EQ(a[i].value, colors[edges[i].target]);
    }
  }
  // Recoloring changes only the annotation field.
  auto c2 = tfp_greedy_coloring(g, 3);
  auto a2 = annotate_edges_with_colors(g, c2).to_vector();
  const auto colors2 = colors_of(c2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a2[i].target, a[i].target);
    if (!edges[i].is_sentinel()) {
      ASSERT_EQ(a2[i].value, colors2[edges[i].target]);
    }
  }
}

TEST(AnnotateColorsTest, WrongLengthIsDimensionError) {
  em::Context ctx(small_config());
  auto e = generators::path(3);
  auto g = build_from_edges(ctx, 3, e);
  auto c = manual_coloring(ctx, {0, 1});
  EXPECT_THROW(annotate_edges_with_colors(g, c), DimensionError);
}

TEST(InitBucketsTest, SingleEdge) {
  em::Context ctx(small_config());
  std::vector<WeightedEdge> e{{0, 1, 4}};
  auto g = build_from_edges(ctx, 2, e);
  BucketClustering bc(g, tfp_greedy_coloring(g, kUnbounded), SizeMode::kUnconstrained,
                      kUnbounded, kLowest);
  auto b0 = bc.peek_bucket(0);
  ASSERT_EQ(b0.size(), 1u);
  EXPECT_EQ(b0[0].v, 0u);
  EXPECT_EQ(b0[0].cluster_u, 1u);
  EXPECT_EQ(b0[0].u, 1u);
  EXPECT_EQ(b0[0].weight, 4u);
  EXPECT_EQ(b0[0].color_u, 1u);
  EXPECT_TRUE(bc.peek_bucket(1).empty());
}

TEST(InitBucketsTest, TwoTrianglesSeedOneTuplePerEdge) {
  em::Context ctx(small_config());
  auto e = generators::two_triangles();
  auto g = build_from_edges(ctx, 6, e);
  BucketClustering bc(g, tfp_greedy_coloring(g, kUnbounded), SizeMode::kUnconstrained,
                      kUnbounded, kLowest);
  std::uint64_t total = 0;
  for (Color c = 0; c < bc.num_colors(); ++c) total += bc.bucket_tuples(c);
  EXPECT_EQ(total, g.m());
}

TEST(InitBucketsTest, TooManyColorsForMemoryIsConfigError) {
  em::Context ctx(small_config(4096, 16 * 4096));  // M/B = 16
  std::vector<WeightedEdge> e;
  for (NodeId u = 0; u < 20; ++u) {
    for (NodeId v = u + 1; v < 20; ++v) e.push_back({u, v, 1});
  }
  auto g = build_from_edges(ctx, 20, e);
  auto c = tfp_greedy_coloring(g, kUnbounded);
  ASSERT_EQ(c.num_colors(), 20u);
  EXPECT_THROW(BucketClustering(g, std::move(c), SizeMode::kUnconstrained, kUnbounded, kLowest),
               ConfigError);
}

TEST(ProcessBucketTest, MajorityClusterWinsAndEveryTupleIsAnswered) {
  em::Context ctx(small_config());
  std::vector<WeightedEdge> e{{0, 1, 1}, {0, 2, 1}, {0, 3, 1}};
  auto g = build_from_edges(ctx, 4, e);
  auto initial = assignment_array(ctx, {0, 7, 7, 9});
  BucketClustering bc(g, tfp_greedy_coloring(g, kUnbounded), SizeMode::kUnconstrained,
                      kUnbounded, kLowest, &initial, 10);
  ASSERT_EQ(bc.num_colors(), 2u);
  ASSERT_EQ(bc.bucket_tuples(0), 3u);
  auto st = bc.process_bucket(0, 1);
  EXPECT_EQ(st.moves, 1u);
  EXPECT_EQ(bc.bucket_tuples(0), 0u);
  auto replies = bc.peek_bucket(1);
  ASSERT_EQ(replies.size(), 3u);
  for (const auto& t : replies) {
    EXPECT_EQ(t.u, 0u);
    EXPECT_EQ(t.cluster_u, 7u);
    EXPECT_EQ(t.color_u, 0u);
  }
  EXPECT_EQ(bc.assignment().to_vector()[0].value, 7u);
}

TEST(ProcessBucketTest, EmptyBucketIsNoOp) {
  em::Context ctx(small_config());
  std::vector<WeightedEdge> e{{0, 1, 1}};
  auto g = build_from_edges(ctx, 3, e);
  // Node 2 is isolated and alone in color 2, so its bucket stays empty.
  BucketClustering bc(g, manual_coloring(ctx, {0, 1, 2}), SizeMode::kUnconstrained, kUnbounded,
                      kLowest);
  auto before = ctx.io_report();
  auto st = bc.process_bucket(2, 1);
  EXPECT_EQ(st.moves, 0u);
  EXPECT_EQ(st.evaluations, 1u);
  EXPECT_EQ(bc.bucket_tuples(0), 1u);
  EXPECT_EQ(bc.bucket_tuples(1), 0u);
  EXPECT_EQ((ctx.io_report() - before).blocks_read(), 1u);  // the one-member array
}

TEST(ProcessBucketTest, IndependentSetSafety) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    em::Context ctx(small_config());
    const NodeId n = 2 + rng() % 100;
    auto e = testing::random_edges(rng, n);
    auto g = build_from_edges(ctx, n, e);
    BucketClustering bc(g, tfp_greedy_coloring(g, 1 + rng() % 10), SizeMode::kUnconstrained,
                        kUnbounded, kLowest);
    const auto colors = colors_of(bc.coloring());
    for (Color c = 0; c < bc.num_colors(); ++c) {
      std::set<NodeId> members;
      bc.members(c).scan([&](const Member& m) { members.insert(m.node); });
      for (const auto& x : e) {
        ASSERT_FALSE(members.count(x.u) && members.count(x.v));
      }
      for (NodeId v : members) ASSERT_EQ(colors[v], c);
    }
  }
}

std::vector<ClusterId> run_bucket(const DiskGraph& g, Coloring coloring, SizeMode mode,
                                  Weight bound, std::uint64_t rounds) {
  BucketClustering bc(g, std::move(coloring), mode, bound, kLowest);
  for (std::uint64_t r = 1; r <= rounds; ++r) bc.round(r);
  std::vector<ClusterId> out;
  bc.assignment().scan([&](const em::NodeValue& p) { out.push_back(p.value); });
  return out;
}

TEST(BucketClusterTest, UnconstrainedMatchesColorMajorOracle) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 80; ++trial) {
    em::Context ctx(small_config());
    const NodeId n = 1 + rng() % 150;
    auto e = testing::random_edges(rng, n);
    auto g = build_from_edges(ctx, n, e);
    const std::uint64_t class_bound = trial % 2 ? kUnbounded : 1 + rng() % 30;
    const std::uint64_t rounds = 1 + rng() % 4;
    auto coloring = tfp_greedy_coloring(g, class_bound);
    const auto colors = colors_of(coloring);
    oracle::Graph og(n, e);
    auto expected = oracle::color_major_lp(og, colors, rounds, kUnbounded);
    ASSERT_EQ(run_bucket(g, std::move(coloring), SizeMode::kUnconstrained, kUnbounded, rounds),
              expected)
        << "trial " << trial;
  }
}

TEST(BucketClusterTest, ConstrainedVariantsMatchOracleAndEachOther) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 80; ++trial) {
    em::Context ctx(small_config());
    const NodeId n = 1 + rng() % 150;
    auto e = testing::random_edges(rng, n);
    std::vector<Weight> weights(n);
    for (auto& w : weights) w = 1 + rng() % 3;
    auto g = build_from_edges(ctx, n, e, weights);
    const Weight bound = 3 + rng() % 8;
    const std::uint64_t rounds = 1 + rng() % 3;
    const std::uint64_t class_bound = 1 + rng() % 40;
    oracle::Graph og(n, e, weights);
    auto colors = colors_of(tfp_greedy_coloring(g, class_bound));
    auto expected = oracle::color_major_lp(og, colors, rounds, bound);
    auto map = run_bucket(g, tfp_greedy_coloring(g, class_bound), SizeMode::kMap, bound, rounds);
    auto pq = run_bucket(g, tfp_greedy_coloring(g, class_bound), SizeMode::kPq, bound, rounds);
    ASSERT_EQ(map, expected) << "trial " << trial;
    ASSERT_EQ(pq, expected) << "trial " << trial;
    std::map<ClusterId, Weight> size;
    for (NodeId v = 0; v < n; ++v) size[map[v]] += weights[v];
    for (const auto& [c, s] : size) ASSERT_LE(s, bound) << "cluster " << c;
  }
}

TEST(BucketClusterTest, SizeArrayMatchesRecountAfterEveryBucket) {
  std::mt19937_64 rng(47);
  for (SizeMode mode : {SizeMode::kMap, SizeMode::kPq}) {
    for (int trial = 0; trial < 20; ++trial) {
      em::Context ctx(small_config());
      const NodeId n = 2 + rng() % 120;
      auto e = testing::random_edges(rng, n);
      auto g = build_from_edges(ctx, n, e);
      BucketClustering bc(g, tfp_greedy_coloring(g, 1 + rng() % 20), mode, 5, kLowest);
      for (std::uint64_t r = 1; r <= 2; ++r) {
        for (Color c = 0; c < bc.num_colors(); ++c) {
          if (mode == SizeMode::kMap) {
            bc.process_bucket_sized_map(c, r);
          } else {
            bc.process_bucket_sized_pq(c, r);
          }
          auto sizes = bc.flush_sizes().to_vector();
          std::vector<Weight> recount(n, 0);
          bc.assignment().scan([&](const em::NodeValue& p) { ++recount[p.value]; });
          ASSERT_EQ(sizes, recount);
          for (Weight s : sizes) ASSERT_LE(s, 5u);
        }
      }
    }
  }
}

TEST(BucketClusterTest, SingleBucketPassVariantsAgree) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    em::Context ctx(small_config());
    const NodeId n = 2 + rng() % 199;
    auto e = testing::random_edges(rng, n);
    auto g = build_from_edges(ctx, n, e);
    const std::uint64_t class_bound = 1 + rng() % 50;
    const Weight bound = 2 + rng() % 6;
    TieBreaker tb{TieBreak::kRandom, rng()};
    BucketClustering a(g, tfp_greedy_coloring(g, class_bound), SizeMode::kMap, bound, tb);
    BucketClustering b(g, tfp_greedy_coloring(g, class_bound), SizeMode::kPq, bound, tb);
    const Color c = rng() % a.num_colors();
    for (Color d = 0; d < c; ++d) {
      a.process_bucket_sized_map(d, 1);
      b.process_bucket_sized_pq(d, 1);
    }
    a.process_bucket_sized_map(c, 1);
    b.process_bucket_sized_pq(c, 1);
    ASSERT_EQ(a.assignment().to_vector(), b.assignment().to_vector());
    ASSERT_EQ(a.flush_sizes().to_vector(), b.flush_sizes().to_vector());
  }
}

TEST(BucketClusterTest, TwoTrianglesUnconstrainedAndBounded) {
  em::Context ctx(small_config());
  auto e = generators::two_triangles();
  auto g = build_from_edges(ctx, 6, e);
  oracle::Graph og(6, e);
  auto colors = colors_of(tfp_greedy_coloring(g, kUnbounded));
  BucketConfig cfg;
  cfg.rounds = 3;
  cfg.class_bound = kUnbounded;
  cfg.tie_break = kLowest;
  auto res = bucket_cluster(g, cfg);
  EXPECT_EQ(res.assignment.to_vector(), oracle::color_major_lp(og, colors, 3, kUnbounded));
  cfg.mode = SizeMode::kMap;
  cfg.constraint = 3;
  cfg.rounds = 1;
  auto bounded = bucket_cluster(g, cfg).assignment.to_vector();
  EXPECT_EQ(bounded, oracle::color_major_lp(og, colors, 1, 3));
  std::map<ClusterId, int> size;
  for (ClusterId c : bounded) ++size[c];
  for (const auto& [c, s] : size) EXPECT_LE(s, 3);
}

TEST(BucketClusterTest, ZeroRoundsIsIdentity) {
  em::Context ctx(small_config());
  auto e = generators::two_triangles();
  auto g = build_from_edges(ctx, 6, e);
  BucketConfig cfg;
  cfg.rounds = 0;
  EXPECT_EQ(bucket_cluster(g, cfg).assignment.to_vector(),
            (std::vector<ClusterId>{0, 1, 2, 3, 4, 5}));
}

TEST(BucketClusterTest, ModeAndConstraintMustAgree) {
  em::Context ctx(small_config());
  auto e = generators::two_triangles();
  auto g = build_from_edges(ctx, 6, e);
  BucketConfig cfg;
  cfg.mode = SizeMode::kPq;
  EXPECT_THROW(bucket_cluster(g, cfg), ParameterError);
  cfg.mode = SizeMode::kUnconstrained;
  cfg.constraint = 3;
  EXPECT_THROW(bucket_cluster(g, cfg), ParameterError);
}

TEST(BucketClusterTest, MapVariantFallsBackToPqWhenNodesDoNotFit) {
  // A star whose center has more tuples than the map variant can hold.
  em::Context ctx(small_config(256, 80 * 1024));
  std::vector<WeightedEdge> e;
  const NodeId leaves = 1023;
  for (NodeId leaf = 1; leaf <= leaves; ++leaf) e.push_back({0, leaf, 1});
  auto g = build_from_edges(ctx, leaves + 1, e);
  BucketConfig cfg;
  cfg.mode = SizeMode::kMap;
  cfg.constraint = 50;
  cfg.rounds = 2;
  cfg.class_bound = leaves;
  cfg.tie_break = kLowest;
  auto res = bucket_cluster(g, cfg);
  EXPECT_GT(res.per_round[0].pq_buckets, 0u);
  cfg.mode = SizeMode::kPq;
  EXPECT_EQ(res.assignment.to_vector(), bucket_cluster(g, cfg).assignment.to_vector());
}

TEST(ForwardStructuresTest, FigureExample) {
  // Members of color 0: 0..7 except none of 8, 9. Clusters A = 8, B = 9;
  // node 6 belongs to A. Edges: 1-A, 1-B, 2-A, 3-A, 7-A, 4-B.
  em::Context ctx(small_config());
  std::vector<WeightedEdge> e{{1, 8, 1}, {1, 9, 1}, {2, 8, 1}, {3, 8, 1}, {7, 8, 1}, {4, 9, 1}};
  auto g = build_from_edges(ctx, 10, e);
  std::vector<Color> colors(10, 0);
  colors[8] = colors[9] = 1;
  auto initial = assignment_array(ctx, {0, 1, 2, 3, 4, 5, 8, 7, 8, 9});
  BucketClustering bc(g, manual_coloring(ctx, colors), SizeMode::kPq, 100, kLowest, &initial);
  auto tuples = bc.peek_bucket(0);
  std::sort(tuples.begin(), tuples.end(), BucketTupleLess{});
  auto sorted = em::ExternalArray<BucketTuple>::from_span(
      ctx, std::span<const BucketTuple>(tuples), "sorted");
  auto fs = build_forward_structures(sorted, bc.members(0), 0, 2);
  std::map<ClusterId, std::vector<NodeId>> n_lists;
  fs.adjacent.scan([&](const ClusterNode& p) { n_lists[p.cluster].push_back(p.node); });
  EXPECT_EQ(n_lists[8], (std::vector<NodeId>{1, 2, 3, 6, 7}));
  EXPECT_EQ(n_lists[9], (std::vector<NodeId>{1, 4}));
  EXPECT_EQ(n_lists[1], (std::vector<NodeId>{1}));
  std::map<NodeId, std::vector<std::pair<NodeId, ClusterId>>> m_lists;
  fs.forward.scan([&](const ForwardTriple& t) { m_lists[t.node].push_back({t.next, t.cluster}); });
  using P = std::vector<std::pair<NodeId, ClusterId>>;
  EXPECT_EQ(m_lists[1], (P{{2, 8}, {4, 9}}));
  EXPECT_EQ(m_lists[2], (P{{3, 8}}));
  EXPECT_EQ(m_lists[3], (P{{6, 8}}));
  EXPECT_EQ(m_lists[6], (P{{7, 8}}));
  EXPECT_EQ(m_lists.count(4), 0u);
  EXPECT_EQ(m_lists.count(7), 0u);

  // Size flow: node 1 forwards A to 2 and B to 4, node 2 forwards A to 3.
  auto st = bc.process_bucket_sized_pq(0, 1);
  EXPECT_EQ(st.evaluations, 8u);
  // Node 1 ties between A and B and takes A; 2, 3, 7 join A; 4 joins B.
  const auto sizes = bc.flush_sizes().to_vector();
  EXPECT_EQ(sizes[8], 6u);
  EXPECT_EQ(sizes[9], 2u);
}

TEST(ForwardStructuresTest, RandomBucketsSatisfyChainProperty) {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 60; ++trial) {
    em::Context ctx(small_config());
    const NodeId n = 2 + rng() % 80;
    auto e = testing::random_edges(rng, n);
    auto g = build_from_edges(ctx, n, e);
    std::vector<ClusterId> init(n);
    for (auto& c : init) c = rng() % n;
    auto initial = assignment_array(ctx, init);
    BucketClustering bc(g, tfp_greedy_coloring(g, kUnbounded), SizeMode::kPq, n, kLowest,
                        &initial);
    const Color color = rng() % bc.num_colors();
    // Bring the bucket of `color` to its pass state by processing lower colors.
    for (Color d = 0; d < color; ++d) bc.process_bucket_sized_pq(d, 1);
    auto tuples = bc.peek_bucket(color);
    std::sort(tuples.begin(), tuples.end(), BucketTupleLess{});
    auto sorted = em::ExternalArray<BucketTuple>::from_span(
        ctx, std::span<const BucketTuple>(tuples), "sorted");
    auto fs = build_forward_structures(sorted, bc.members(color), color, bc.num_colors());
    // Brute force N_c.
    std::map<ClusterId, std::set<NodeId>> expected;
    bc.members(color).scan([&](const Member& m) { expected[m.cluster].insert(m.node); });
    for (const auto& t : tuples) expected[t.cluster_u].insert(t.v);
    std::map<ClusterId, std::vector<NodeId>> got;
    fs.adjacent.scan([&](const ClusterNode& p) { got[p.cluster].push_back(p.node); });
    ASSERT_EQ(got.size(), expected.size());
    std::size_t triples = 0;
    for (const auto& [c, nodes] : expected) {
      ASSERT_EQ(got[c], std::vector<NodeId>(nodes.begin(), nodes.end()));
      triples += nodes.size() - 1;
    }
    std::uint64_t count = 0;
    NodeId last = 0;
    fs.forward.scan([&](const ForwardTriple& t) {
      ASSERT_GE(t.node, last);
      last = t.node;
      ++count;
      const auto& s = expected[t.cluster];
      auto it = s.find(t.node);
      ASSERT_TRUE(it != s.end());
      ASSERT_TRUE(std::next(it) != s.end());
      ASSERT_EQ(*std::next(it), t.next);
    });
    ASSERT_EQ(count, triples);
  }
}

}  // namespace
}  // namespace extpart
