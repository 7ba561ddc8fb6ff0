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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <queue>
#include <random>
#include <tuple>
#include <vector>

#include "gtest/gtest.h"
#include "extpart/em/context.hpp"
#include "extpart/em/external_array.hpp"
#include "extpart/em/priority_queue.hpp"
#include "extpart/em/sort.hpp"

namespace extpart::em {
namespace {

BlockConfig small_config(std::size_t block, std::size_t memory) {
  BlockConfig c;
  c.block_size_bytes = block;
  c.memory_budget_bytes = memory;
  return c;
}

struct KeyValue {
  std::uint64_t key;
  std::uint64_t payload;
  friend auto operator<=>(const KeyValue&, const KeyValue&) = default;
};

TEST(BlockConfigTest, RejectsTinyBudgets) {
  EXPECT_THROW(small_config(4096, 8192).validate(), ConfigError);
  EXPECT_THROW(small_config(8, 1 << 20).validate(16), ConfigError);
  EXPECT_NO_THROW(small_config(4096, 4 * 4096).validate());
  EXPECT_EQ(small_config(4096, 65536).elements_per_block(16), 256u);
}

TEST(ScanTest, ChargesCeilOfBytesOverBlock) {
  Context ctx(small_config(1000, 1 << 20));
  std::vector<std::uint32_t> data(1000);
  std::iota(data.begin(), data.end(), 0u);
  auto arr = ExternalArray<std::uint32_t>::from_span(ctx, data, "scan");
  EXPECT_EQ(arr.size(), 1000u);

  auto before = ctx.io_report();
  std::uint64_t seen = 0, sum = 0;
  arr.scan([&](std::uint32_t v) {
    ++seen;
    sum += v;
  });
  auto delta = ctx.io_report() - before;
  EXPECT_EQ(seen, 1000u);
  EXPECT_EQ(sum, 999u * 1000u / 2);
  EXPECT_EQ(delta.blocks_read(), 4u);
  EXPECT_EQ(delta.read_of(IoTag::kScan), 4u);
  EXPECT_EQ(delta.blocks_written(), 0u);
}

TEST(ScanTest, EmptyAndSingleBlock) {
  Context ctx(small_config(1000, 1 << 20));
  auto empty = ExternalArray<std::uint32_t>::temporary(ctx, "empty");
  auto before = ctx.io_report();
  int calls = 0;
  empty.scan([&](std::uint32_t) { ++calls; });
  EXPECT_EQ(calls, 0);
  EXPECT_EQ((ctx.io_report() - before).blocks_read(), 0u);

  std::vector<std::uint32_t> quarter(250, 7);
  auto one = ExternalArray<std::uint32_t>::from_span(ctx, quarter, "one");
  before = ctx.io_report();
  one.scan([](std::uint32_t) {});
  EXPECT_EQ((ctx.io_report() - before).blocks_read(), 1u);
}

TEST(ScanTest, RecordsStraddlingBlocksAreExact) {
  // 24-byte records with B=1000 straddle block boundaries.
  Context ctx(small_config(1000, 1 << 20));
  struct Triple {
    std::uint64_t a, b, c;
  };
  std::vector<Triple> data;
  for (std::uint64_t i = 0; i < 777; ++i) data.push_back({i, i * 2, i * 3});
  auto before = ctx.io_report();
  auto arr = ExternalArray<Triple>::from_span(ctx, data, "triple");
  EXPECT_EQ((ctx.io_report() - before).blocks_written(), extpart::detail::ceil_div(777 * 24, 1000));
  before = ctx.io_report();
  auto back = arr.to_vector();
  EXPECT_EQ((ctx.io_report() - before).blocks_read(), extpart::detail::ceil_div(777 * 24, 1000));
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].a, data[i].a);
    EXPECT_EQ(back[i].c, data[i].c);
  }
}

TEST(ExternalArrayTest, TruncatedFileIsStorageError) {
  Context ctx(small_config(4096, 1 << 20));
  auto path = ctx.scratch_dir() / "persist.bin";
  {
    auto arr = ExternalArray<std::uint64_t>::create(ctx, path);
    std::vector<std::uint64_t> data(100, 3);
    arr.append(data);
    arr.save_metadata();
  }
  EXPECT_EQ(ExternalArray<std::uint64_t>::open(ctx, path).size(), 100u);
  std::filesystem::resize_file(path, 8 * 50);
  EXPECT_THROW(ExternalArray<std::uint64_t>::open(ctx, path), StorageError);
  std::filesystem::resize_file(path, 8 * 50 + 3);
  EXPECT_THROW(ExternalArray<std::uint64_t>::open(ctx, path), StorageError);
  EXPECT_THROW(ExternalArray<std::uint64_t>::open(ctx, ctx.scratch_dir() / "nope.bin"),
               StorageError);
}

TEST(ExternalSortTest, SmallPermutation) {
  Context ctx(small_config(4096, 1 << 20));
  std::vector<std::uint64_t> data{3, 1, 2};
  auto arr = ExternalArray<std::uint64_t>::from_span(ctx, data, "in");
  auto sorted = external_sort(arr, std::less<>());
  EXPECT_EQ(sorted.to_vector(), (std::vector<std::uint64_t>{1, 2, 3}));

  auto again = external_sort(sorted, std::less<>());
  EXPECT_EQ(again.to_vector(), (std::vector<std::uint64_t>{1, 2, 3}));
}

TEST(ExternalSortTest, StableUnderEqualKeys) {
  Context ctx(small_config(256, 4 * 256));
  std::mt19937_64 rng(5);
  std::vector<KeyValue> data;
  for (std::uint64_t i = 0; i < 5000; ++i) data.push_back({rng() % 17, i});
  auto arr = ExternalArray<KeyValue>::from_span(ctx, data, "in");
  auto by_key = [](const KeyValue& a, const KeyValue& b) { return a.key < b.key; };
  auto sorted = external_sort(arr, by_key).to_vector();
  auto expected = data;
  std::stable_sort(expected.begin(), expected.end(), by_key);
  EXPECT_EQ(sorted, expected);
}

TEST(ExternalSortTest, MillionRecordsMatchInMemorySort) {
  Context ctx(small_config(4096, 64 * 1024));
  std::mt19937_64 rng(42);
  std::vector<std::uint64_t> data(1'000'000);
  for (auto& v : data) v = rng();
  auto arr = ExternalArray<std::uint64_t>::from_span(ctx, data, "in");
  auto sorted = external_sort(arr, std::less<>());
  ASSERT_EQ(sorted.size(), data.size());

  std::sort(data.begin(), data.end());
  std::uint64_t sum_ext = 0, sum_mem = 0, xor_ext = 0, xor_mem = 0;
  std::uint64_t prev = 0, i = 0;
  bool ordered = true, equal = true;
  sorted.scan([&](std::uint64_t v) {
    ordered = ordered && v >= prev;
    equal = equal && v == data[i++];
    prev = v;
    sum_ext += v;
    xor_ext ^= v * 0x9E3779B97F4A7C15ull;
  });
  for (auto v : data) {
    sum_mem += v;
    xor_mem ^= v * 0x9E3779B97F4A7C15ull;
  }
  EXPECT_TRUE(ordered);
  EXPECT_TRUE(equal);
  EXPECT_EQ(sum_ext, sum_mem);
  EXPECT_EQ(xor_ext, xor_mem);
  EXPECT_EQ(ctx.budget().violations(), 0u);
  EXPECT_LE(ctx.budget().peak(), 64u * 1024u);
}

TEST(ExternalSortTest, OracleEquivalenceOnRandomSizes) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Context ctx(small_config(512, 8 * 512));
    std::size_t n = rng() % 100'000;
    std::vector<KeyValue> data(n);
    for (auto& r : data) r = {rng() % 1000, rng()};
    auto arr = ExternalArray<KeyValue>::from_span(ctx, data, "in");
    auto sorted = external_sort(arr, std::less<>()).to_vector();
    std::stable_sort(data.begin(), data.end());
    ASSERT_EQ(sorted, data) << "trial " << trial << " n=" << n;
  }
}

TEST(ExternalSortTest, TooLittleMemoryIsConfigError) {
  Context ctx(small_config(4096, 4 * 4096));
  std::vector<std::uint64_t> data{3, 1, 2};
  auto arr = ExternalArray<std::uint64_t>::from_span(ctx, data, "in");
  auto hog = ctx.budget().reserve(2 * 4096, "hog");
  EXPECT_THROW(external_sort(arr, std::less<>()), ConfigError);
}

TEST(PriorityQueueTest, PopsInKeyOrder) {
  Context ctx(small_config(4096, 1 << 20));
  ExternalPriorityQueue<KeyValue> q(ctx, 1 << 16);
  q.push({5, 'a'});
  q.push({2, 'b'});
  q.push({5, 'c'});
  EXPECT_EQ(q.pop_min().key, 2u);
  EXPECT_EQ(q.pop_min().key, 5u);
  EXPECT_EQ(q.pop_min().key, 5u);
  EXPECT_TRUE(q.empty());
  EXPECT_THROW(q.pop_min(), EmptyQueueError);
  EXPECT_THROW(q.top(), EmptyQueueError);
}

TEST(PriorityQueueTest, TopDoesNotRemove) {
  Context ctx(small_config(4096, 1 << 20));
  ExternalPriorityQueue<KeyValue> q(ctx, 1 << 16);
  q.push({7, 'x'});
  EXPECT_EQ(q.top(), (KeyValue{7, 'x'}));
  EXPECT_EQ(q.size(), 1u);
  EXPECT_EQ(q.top(), (KeyValue{7, 'x'}));
}

TEST(PriorityQueueTest, DrainMatchesBinaryHeap) {
  Context ctx(small_config(512, 64 * 1024));
  ExternalPriorityQueue<KeyValue> q(ctx, 8 * 1024);
  std::priority_queue<KeyValue, std::vector<KeyValue>, std::greater<>> oracle;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100'000; ++i) {
    KeyValue r{rng() % 5000, rng()};
    q.push(r);
    oracle.push(r);
  }
  EXPECT_GT(q.run_count(), 1u);
  std::uint64_t prev = 0;
  while (!oracle.empty()) {
    ASSERT_FALSE(q.empty());
    auto got = q.pop_min();
    ASSERT_EQ(got, oracle.top());
    ASSERT_GE(got.key, prev);
    prev = got.key;
    oracle.pop();
  }
  EXPECT_TRUE(q.empty());
  EXPECT_EQ(ctx.budget().violations(), 0u);
}

TEST(PriorityQueueTest, InterleavedOperationsProperty) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    Context ctx(small_config(256, 32 * 1024));
    ExternalPriorityQueue<KeyValue> q(ctx, 4 * 1024);
    std::priority_queue<KeyValue, std::vector<KeyValue>, std::greater<>> oracle;
    std::uint64_t floor = 0;
    for (int op = 0; op < 30'000; ++op) {
      if (oracle.empty() || rng() % 3 != 0) {
        // Time-forward processing only ever pushes keys >= the last popped key.
        KeyValue r{floor + rng() % 200, rng()};
        q.push(r);
        oracle.push(r);
      } else {
        ASSERT_EQ(q.top(), oracle.top());
        auto got = q.pop_min();
        floor = got.key;
        ASSERT_EQ(got, oracle.top());
        oracle.pop();
      }
      ASSERT_EQ(q.size(), oracle.size());
    }
  }
}

TEST(LedgerTest, FreshIsZeroAndSnapshotsAreImmutable) {
  Context ctx(small_config(4096, 1 << 20));
  auto fresh = ctx.io_report();
  EXPECT_EQ(fresh.total(), 0u);
  std::vector<std::uint64_t> data(2048, 1);  // 16 KiB = 4 blocks
  auto arr = ExternalArray<std::uint64_t>::from_span(ctx, data, "x");
  auto before = ctx.io_report();
  arr.scan([](std::uint64_t) {});
  auto after = ctx.io_report();
  EXPECT_GE(after.read_of(IoTag::kScan) - before.read_of(IoTag::kScan), 4u);
  EXPECT_EQ(fresh.total(), 0u);
}

TEST(LedgerTest, SortCostScalesNearLinearly) {
  auto measure = [](std::size_t n) {
    Context ctx(small_config(4096, 64 * 1024));
    std::mt19937_64 rng(3);
    std::vector<std::uint64_t> data(n);
    for (auto& v : data) v = rng();
    auto arr = ExternalArray<std::uint64_t>::from_span(ctx, data, "in");
    auto before = ctx.io_report();
    auto sorted = external_sort(arr, std::less<>());
    return (ctx.io_report() - before).total();
  };
  double ratio = static_cast<double>(measure(200'000)) / static_cast<double>(measure(100'000));
  EXPECT_GE(ratio, 1.8);
  EXPECT_LE(ratio, 2.6);
}

TEST(LedgerTest, PushThenDrainQueueScalesLikeSort) {
  // A queue that only receives pushes before draining must not pay a merge
  // per spill; its I/O has to grow like Sort(N).
  auto measure = [](std::size_t n) {
    Context ctx(small_config(4096, 64 * 1024));
    ExternalPriorityQueue<KeyValue> q(ctx, 24 * 1024);
    std::mt19937_64 rng(5);
    auto before = ctx.io_report();
    for (std::size_t i = 0; i < n; ++i) q.push({rng() % 1'000'000, i});
    std::uint64_t prev = 0;
    while (!q.empty()) {
      auto r = q.pop_min();
      EXPECT_LE(prev, r.key);
      prev = r.key;
    }
    return (ctx.io_report() - before).total();
  };
  double ratio = static_cast<double>(measure(100'000)) / static_cast<double>(measure(50'000));
  EXPECT_GE(ratio, 1.8);
  EXPECT_LE(ratio, 2.8);
}

TEST(MemoryBudgetTest, TracksPeakAndViolations) {
  MemoryBudget lenient(100, /*strict=*/false);
  {
    auto a = lenient.reserve(60, "a");
    auto b = lenient.reserve(60, "b");
    EXPECT_EQ(lenient.violations(), 1u);
    EXPECT_EQ(lenient.peak(), 120u);
  }
  EXPECT_EQ(lenient.in_use(), 0u);

  MemoryBudget strict(100);
  auto a = strict.reserve(60, "a");
  EXPECT_THROW(strict.reserve(60, "b"), ConfigError);
  EXPECT_EQ(strict.in_use(), 60u);
  a.resize(90);
  EXPECT_EQ(strict.in_use(), 90u);
  a.release();
  EXPECT_EQ(strict.available(), 100u);
}

}  // namespace
}  // namespace extpart::em
