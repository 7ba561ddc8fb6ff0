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
#include <cstddef>
#include <limits>
#include <queue>
#include <string_view>
#include <vector>

#include "extpart/em/external_array.hpp"

namespace extpart::em {

/// Multiway merge of sorted readers into `sink`. Equal records leave in reader
/// order, which keeps merges stable when readers are given in input order.
template <Record T, typename Less, typename Sink>
void kway_merge(std::vector<ArrayReader<T>>& readers, Less less, Sink&& sink) {
  auto after = [&](std::size_t a, std::size_t b) {
    const T& ra = readers[a].peek();
    const T& rb = readers[b].peek();
    if (less(rb, ra)) return true;
    if (less(ra, rb)) return false;
    return a > b;
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(after)> heap(after);
  for (std::size_t i = 0; i < readers.size(); ++i) {
    if (readers[i].has_next()) heap.push(i);
  }
  while (!heap.empty()) {
    std::size_t i = heap.top();
    heap.pop();
    sink(readers[i].peek());
    readers[i].advance();
    if (readers[i].has_next()) heap.push(i);
  }
}

/// Stable external multiway merge sort. Run formation uses all memory left
/// in the budget minus one input and one output block; each merge pass uses
/// fan-in (available/B - 1). All I/O is charged with the "sort" tag.
template <Record T, typename Less>
ExternalArray<T> external_sort(const ExternalArray<T>& input, Less less,
                               std::string_view hint = "sorted") {
  Context& ctx = input.context();
  const std::size_t block = ctx.block_size();
  const std::size_t avail = ctx.budget().available();
  if (avail < 3 * block || avail - 2 * block < sizeof(T)) {
    throw ConfigError(detail::concat("external sort needs at least 3 blocks of memory; ",
                                     avail, " bytes available with B=", block));
  }

  std::vector<ExternalArray<T>> runs;
  {
    const std::size_t run_capacity = (avail - 2 * block) / sizeof(T);
    auto run_memory = ctx.budget().reserve(run_capacity * sizeof(T), "sort run buffer");
    std::vector<T> buffer;
    buffer.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(run_capacity, input.size())));
    auto in = input.reader(IoTag::kSort);
    while (in.has_next()) {
      buffer.clear();
      while (in.has_next() && buffer.size() < run_capacity) {
        buffer.push_back(in.peek());
        in.advance();
      }
      std::stable_sort(buffer.begin(), buffer.end(), less);
      auto run = ExternalArray<T>::temporary(ctx, hint);
      run.append(std::span<const T>(buffer), IoTag::kSort);
      runs.push_back(std::move(run));
    }
  }
  if (runs.empty()) return ExternalArray<T>::temporary(ctx, hint);

  // Merge consecutive windows of runs (consecutive keeps the sort stable).
  // The first window is sized so that every later merge, including the final
  // one, runs at full fan-in.
  while (runs.size() > 1) {
    const std::size_t fan_in =
        std::max<std::size_t>(2, ctx.budget().available() / block - 1);
    const std::size_t count = runs.size();
    std::size_t width = count <= fan_in ? count : (count - 2) % (fan_in - 1) + 2;
    std::size_t first = 0;
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t i = 0; i + width <= count; ++i) {
      std::uint64_t total = 0;
      for (std::size_t j = i; j < i + width; ++j) total += runs[j].size();
      if (total < best) {
        best = total;
        first = i;
      }
    }
    auto out = ExternalArray<T>::temporary(ctx, hint);
    {
      std::vector<ArrayReader<T>> readers;
      readers.reserve(width);
      for (std::size_t i = first; i < first + width; ++i) {
        readers.push_back(runs[i].reader(IoTag::kSort));
      }
      auto w = out.writer(IoTag::kSort);
      kway_merge(readers, less, [&](const T& r) { w.push(r); });
      w.close();
    }
    runs[first] = std::move(out);
    runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(first) + 1,
               runs.begin() + static_cast<std::ptrdiff_t>(first + width));
  }
  return std::move(runs.front());
}

}  // namespace extpart::em
