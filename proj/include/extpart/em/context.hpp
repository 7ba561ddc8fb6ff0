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

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <random>
#include <string>
#include <string_view>

#include "extpart/common.hpp"

#include <unistd.h>

namespace extpart::em {

/// Block size B and internal memory M of the I/O model, plus where scratch
/// files live.
struct BlockConfig {
  std::size_t block_size_bytes = std::size_t{1} << 20;
  std::size_t memory_budget_bytes = std::size_t{512} << 20;
  std::filesystem::path scratch_dir = std::filesystem::temp_directory_path();

  std::size_t elements_per_block(std::size_t record_size) const {
    return block_size_bytes / record_size;
  }

  /// Blocks that fit in the memory budget (M/B).
  std::size_t memory_blocks() const { return memory_budget_bytes / block_size_bytes; }

  void validate(std::size_t largest_record = 40) const {
    if (block_size_bytes == 0 || block_size_bytes < largest_record) {
      throw ConfigError(detail::concat("block size ", block_size_bytes,
                                       " B is smaller than a ", largest_record,
                                       "-byte record"));
    }
    if (memory_budget_bytes < 4 * block_size_bytes) {
      throw ConfigError(detail::concat("memory budget ", memory_budget_bytes,
                                       " B holds fewer than 4 blocks of ",
                                       block_size_bytes, " B"));
    }
  }
};

enum class IoTag : std::size_t { kScan = 0, kSort = 1, kPq = 2 };
inline constexpr std::size_t kIoTagCount = 3;

inline std::string_view tag_name(IoTag tag) {
  switch (tag) {
    case IoTag::kScan: return "scan";
    case IoTag::kSort: return "sort";
    case IoTag::kPq: return "pq";
  }
  return "?";
}

/// Immutable snapshot of block transfer counters.
struct IoStats {
  std::array<std::uint64_t, kIoTagCount> read{};
  std::array<std::uint64_t, kIoTagCount> written{};

  std::uint64_t blocks_read() const { return read[0] + read[1] + read[2]; }
  std::uint64_t blocks_written() const { return written[0] + written[1] + written[2]; }
  std::uint64_t total() const { return blocks_read() + blocks_written(); }
  std::uint64_t read_of(IoTag t) const { return read[static_cast<std::size_t>(t)]; }
  std::uint64_t written_of(IoTag t) const { return written[static_cast<std::size_t>(t)]; }

  friend IoStats operator-(const IoStats& a, const IoStats& b) {
    IoStats d;
    for (std::size_t i = 0; i < kIoTagCount; ++i) {
      d.read[i] = a.read[i] - b.read[i];
      d.written[i] = a.written[i] - b.written[i];
    }
    return d;
  }
  friend bool operator==(const IoStats&, const IoStats&) = default;
};

/// Counts logical block transfers. Safe for concurrent increments.
class IoLedger {
 public:
  void charge_read(IoTag tag, std::uint64_t blocks = 1) {
    read_[static_cast<std::size_t>(tag)].fetch_add(blocks, std::memory_order_relaxed);
  }
  void charge_write(IoTag tag, std::uint64_t blocks = 1) {
    written_[static_cast<std::size_t>(tag)].fetch_add(blocks, std::memory_order_relaxed);
  }

  IoStats snapshot() const {
    IoStats s;
    for (std::size_t i = 0; i < kIoTagCount; ++i) {
      s.read[i] = read_[i].load(std::memory_order_relaxed);
      s.written[i] = written_[i].load(std::memory_order_relaxed);
    }
    return s;
  }

 private:
  std::array<std::atomic<std::uint64_t>, kIoTagCount> read_{};
  std::array<std::atomic<std::uint64_t>, kIoTagCount> written_{};
};

/// Tracks buffer memory against the budget M. Every block buffer, run buffer,
/// priority-queue buffer and resident node array goes through reserve().
class MemoryBudget {
 public:
  class Reservation {
   public:
    Reservation() = default;
    Reservation(const Reservation&) = delete;
    Reservation& operator=(const Reservation&) = delete;
    Reservation(Reservation&& o) noexcept : owner_(o.owner_), bytes_(o.bytes_) {
      o.owner_ = nullptr;
      o.bytes_ = 0;
    }
    Reservation& operator=(Reservation&& o) noexcept {
      if (this != &o) {
        release();
        owner_ = o.owner_;
        bytes_ = o.bytes_;
        o.owner_ = nullptr;
        o.bytes_ = 0;
      }
      return *this;
    }
    ~Reservation() { release(); }

    std::size_t bytes() const { return bytes_; }

    /// Grow or shrink in place.
    void resize(std::size_t bytes, std::string_view what = "resize") {
      if (owner_ == nullptr) return;
      if (bytes > bytes_) {
        owner_->acquire(bytes - bytes_, what);
      } else {
        owner_->give_back(bytes_ - bytes);
      }
      bytes_ = bytes;
    }

    void release() {
      if (owner_ != nullptr) owner_->give_back(bytes_);
      owner_ = nullptr;
      bytes_ = 0;
    }

   private:
    friend class MemoryBudget;
    Reservation(MemoryBudget* owner, std::size_t bytes) : owner_(owner), bytes_(bytes) {}
    MemoryBudget* owner_ = nullptr;
    std::size_t bytes_ = 0;
  };

  explicit MemoryBudget(std::size_t limit, bool strict = true)
      : limit_(limit), strict_(strict) {}

  MemoryBudget(const MemoryBudget&) = delete;
  MemoryBudget& operator=(const MemoryBudget&) = delete;

  Reservation reserve(std::size_t bytes, std::string_view what) {
    acquire(bytes, what);
    return Reservation(this, bytes);
  }

  std::size_t limit() const { return limit_; }
  std::size_t in_use() const {
    std::lock_guard lock(mutex_);
    return in_use_;
  }
  std::size_t available() const {
    std::lock_guard lock(mutex_);
    return in_use_ >= limit_ ? 0 : limit_ - in_use_;
  }
  std::size_t peak() const {
    std::lock_guard lock(mutex_);
    return peak_;
  }
  /// Number of reservations that would have exceeded the limit.
  std::uint64_t violations() const {
    std::lock_guard lock(mutex_);
    return violations_;
  }
  bool strict() const { return strict_; }

 private:
  void acquire(std::size_t bytes, std::string_view what) {
    std::lock_guard lock(mutex_);
    if (in_use_ + bytes > limit_) {
      ++violations_;
      if (strict_) {
        throw ConfigError(detail::concat("memory budget exceeded by '", what, "': ",
                                         in_use_, " + ", bytes, " > ", limit_, " bytes"));
      }
    }
    in_use_ += bytes;
    if (in_use_ > peak_) peak_ = in_use_;
  }
  void give_back(std::size_t bytes) {
    std::lock_guard lock(mutex_);
    in_use_ -= bytes;
  }

  mutable std::mutex mutex_;
  std::size_t limit_;
  bool strict_;
  std::size_t in_use_ = 0;
  std::size_t peak_ = 0;
  std::uint64_t violations_ = 0;
};

/// Everything an external-memory algorithm needs: B, M, the I/O ledger, the
/// budget tracker and a private scratch directory.
class Context {
 public:
  explicit Context(BlockConfig config, bool strict_budget = true)
      : config_(std::move(config)), budget_(config_.memory_budget_bytes, strict_budget) {
    config_.validate();
    std::random_device rd;
    scratch_ = config_.scratch_dir /
               detail::concat("extpart-", ::getpid(), "-", std::hex, rd(), rd());
    std::error_code ec;
    std::filesystem::create_directories(scratch_, ec);
    if (ec) {
      throw StorageError(detail::concat("cannot create scratch directory ", scratch_.string(),
                                        ": ", ec.message()));
    }
  }

  Context(const Context&) = delete;
  Context& operator=(const Context&) = delete;

  ~Context() {
    if (!keep_scratch_) {
      std::error_code ec;
      std::filesystem::remove_all(scratch_, ec);
    }
  }

  const BlockConfig& config() const { return config_; }
  std::size_t block_size() const { return config_.block_size_bytes; }
  IoLedger& ledger() { return ledger_; }
  const IoLedger& ledger() const { return ledger_; }
  MemoryBudget& budget() { return budget_; }
  const MemoryBudget& budget() const { return budget_; }
  IoStats io_report() const { return ledger_.snapshot(); }

  const std::filesystem::path& scratch_dir() const { return scratch_; }
  /// Keep scratch files after destruction (forensics on failure).
  void keep_scratch(bool keep) { keep_scratch_ = keep; }

  std::filesystem::path scratch_path(std::string_view hint) {
    return scratch_ / detail::concat(hint, "-", counter_.fetch_add(1), ".bin");
  }

 private:
  BlockConfig config_;
  IoLedger ledger_;
  MemoryBudget budget_;
  std::filesystem::path scratch_;
  std::atomic<std::uint64_t> counter_{0};
  bool keep_scratch_ = false;
};

}  // namespace extpart::em
