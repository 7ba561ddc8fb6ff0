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
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

#include "extpart/em/external_array.hpp"
#include "extpart/em/sort.hpp"

namespace extpart::em {

/// External priority queue built from an in-memory insertion heap and sorted
/// runs on disk.
///
/// When the insertion heap fills up it is written out as a sorted run. New
/// runs hold no buffer until the next pop. Before a pop, if more runs exist
/// than the run area can buffer, the smallest runs are merged with the widest
/// fan-in memory allows (the first merge is sized so that later merges use the
/// full fan-in, as in a multiway merge sort). A queue that only receives pushes
/// for a while, such as the next-round queue of time-forward processing,
/// therefore pays Sort(N) I/Os rather than a merge per spill. Every element
/// takes part in O(log_{M/B}(N/B)) run writes, which gives the amortized
/// O((1/B) log_{M/B}(N/B)) I/Os per operation. All file traffic is charged
/// with the "pq" tag.
///
/// `Less` must be a total order on whole records; its first component is the
/// key. Records comparing equal are interchangeable.
template <Record T, typename Less = std::less<T>>
class ExternalPriorityQueue {
 public:
  ExternalPriorityQueue(Context& ctx, std::size_t memory_bytes, Less less = Less())
      : ctx_(&ctx), less_(less) {
    const std::size_t block = ctx.block_size();
    const std::size_t run_area = std::max(4 * block, memory_bytes / 2);
    if (memory_bytes < run_area + 16 * sizeof(T)) {
      throw ConfigError(detail::concat("priority queue needs at least ",
                                       run_area + 16 * sizeof(T), " bytes, got ",
                                       memory_bytes));
    }
    insert_capacity_ = (memory_bytes - run_area) / sizeof(T);
    run_blocks_ = run_area / block;
    // Open runs leave room for one more reader and a writer during a merge.
    max_runs_ = run_blocks_ - 2;
    reservation_ = ctx.budget().reserve(insert_capacity_ * sizeof(T) + run_blocks_ * block,
                                        "external priority queue");
    heap_.reserve(insert_capacity_);
  }

  ExternalPriorityQueue(ExternalPriorityQueue&&) noexcept = default;
  ExternalPriorityQueue& operator=(ExternalPriorityQueue&&) noexcept = default;

  std::uint64_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  void push(const T& record) {
    if (heap_.size() == insert_capacity_) spill();
    heap_.push_back(record);
    std::push_heap(heap_.begin(), heap_.end(), heap_after());
    ++size_;
  }

  /// Minimal record without removing it. May merge pending runs first.
  const T& top() {
    if (size_ == 0) throw EmptyQueueError("top() on empty priority queue");
    prepare();
    return from_heap() ? heap_.front() : run_heap_.front()->reader->peek();
  }

  T pop_min() {
    if (size_ == 0) throw EmptyQueueError("pop_min() on empty priority queue");
    prepare();
    T out;
    if (from_heap()) {
      std::pop_heap(heap_.begin(), heap_.end(), heap_after());
      out = heap_.back();
      heap_.pop_back();
    } else {
      std::pop_heap(run_heap_.begin(), run_heap_.end(), run_after());
      Run* run = run_heap_.back();
      out = run->reader->peek();
      run->reader->advance();
      if (run->reader->has_next()) {
        std::push_heap(run_heap_.begin(), run_heap_.end(), run_after());
      } else {
        run_heap_.pop_back();
        std::erase_if(runs_, [run](const auto& r) { return r.get() == run; });
      }
    }
    --size_;
    return out;
  }

  /// Runs currently on disk (buffered or pending).
  std::size_t run_count() const { return runs_.size(); }

 private:
  struct Run {
    explicit Run(ExternalArray<T> d) : data(std::move(d)) {}
    ExternalArray<T> data;
    std::optional<ArrayReader<T>> reader;  // empty until the run is buffered
    std::uint64_t remaining() const {
      return reader ? reader->size() - reader->position() : data.size();
    }
    void open() { reader.emplace(data.reader(IoTag::kPq, /*reserve=*/false)); }
  };

  auto heap_after() const {
    return [this](const T& a, const T& b) { return less_(b, a); };
  }
  auto run_after() const {
    return [this](const Run* a, const Run* b) {
      return less_(b->reader->peek(), a->reader->peek());
    };
  }

  bool from_heap() const {
    if (run_heap_.empty()) return true;
    if (heap_.empty()) return false;
    return !less_(run_heap_.front()->reader->peek(), heap_.front());
  }

  void spill() {
    std::sort(heap_.begin(), heap_.end(), less_);
    auto data = ExternalArray<T>::temporary(*ctx_, "pq-run");
    {
      auto w = data.writer(IoTag::kPq, /*reserve=*/false);
      for (const auto& r : heap_) w.push(r);
    }
    heap_.clear();
    runs_.push_back(std::make_unique<Run>(std::move(data)));
    pending_ = true;
  }

  /// Merge until every run can hold a buffer, then buffer the new runs.
  void prepare() {
    if (!pending_) return;
    const std::size_t fan_in = run_blocks_ - 1;
    while (runs_.size() > max_runs_) {
      const std::size_t excess = runs_.size() - max_runs_;
      merge_smallest((excess - 1) % (fan_in - 1) + 2);
    }
    for (auto& r : runs_) {
      if (!r->reader) r->open();
    }
    rebuild_run_heap();
    pending_ = false;
  }

  /// Merge up to `width` of the smallest runs into one. Each unbuffered run
  /// taking part needs a block, so their number is limited by the blocks that
  /// buffered runs and the writer leave free.
  void merge_smallest(std::size_t width) {
    std::vector<Run*> order;
    std::size_t open = 0;
    for (auto& r : runs_) {
      order.push_back(r.get());
      if (r->reader) ++open;
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const Run* a, const Run* b) { return a->remaining() < b->remaining(); });
    std::size_t free_blocks = run_blocks_ - 1 - open;
    std::vector<Run*> chosen;
    for (Run* r : order) {
      if (chosen.size() == width) break;
      if (!r->reader) {
        if (free_blocks == 0) continue;
        --free_blocks;
      }
      chosen.push_back(r);
    }

    auto merged = ExternalArray<T>::temporary(*ctx_, "pq-run");
    {
      std::vector<ArrayReader<T>> readers;
      for (Run* r : chosen) {
        if (!r->reader) r->open();
        readers.push_back(std::move(*r->reader));
      }
      auto w = merged.writer(IoTag::kPq, /*reserve=*/false);
      kway_merge(readers, less_, [&](const T& rec) { w.push(rec); });
      w.close();
    }
    std::erase_if(runs_, [&](const auto& r) {
      return std::find(chosen.begin(), chosen.end(), r.get()) != chosen.end();
    });
    runs_.push_back(std::make_unique<Run>(std::move(merged)));
  }

  void rebuild_run_heap() {
    run_heap_.clear();
    for (auto& r : runs_) run_heap_.push_back(r.get());
    std::make_heap(run_heap_.begin(), run_heap_.end(), run_after());
  }

  Context* ctx_;
  Less less_;
  std::size_t insert_capacity_ = 0;
  std::size_t run_blocks_ = 0;
  std::size_t max_runs_ = 0;
  MemoryBudget::Reservation reservation_;
  std::vector<T> heap_;
  std::vector<std::unique_ptr<Run>> runs_;
  std::vector<Run*> run_heap_;
  std::uint64_t size_ = 0;
  bool pending_ = false;
};

}  // namespace extpart::em
