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
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "extpart/common.hpp"
#include "extpart/em/context.hpp"
#include "json.hpp"

namespace extpart::em {

/// Fixed-size plain record that can be written with memcpy.
template <typename T>
concept Record = std::is_trivially_copyable_v<T> && std::is_standard_layout_v<T>;

namespace internal {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw StorageError(extpart::detail::concat("cannot open ", path.string(), " (mode ", mode,
                                               "): ", std::strerror(errno)));
  }
  return f;
}

}  // namespace internal

template <Record T>
class ArrayWriter;
template <Record T>
class ArrayReader;

/// A file of fixed-size little-endian records with no header. Only sequential
/// scans, appends and whole-array sorts are offered; there is no random access.
template <Record T>
class ExternalArray {
 public:
  static constexpr std::size_t kRecordSize = sizeof(T);

  ExternalArray() = default;

  /// Empty scratch array, deleted when the handle is destroyed.
  static ExternalArray temporary(Context& ctx, std::string_view hint) {
    ExternalArray a(ctx, ctx.scratch_path(hint), /*temporary=*/true);
    internal::open_file(a.path_, "wb");
    return a;
  }

  /// Empty persistent array at `path` (truncates an existing file).
  static ExternalArray create(Context& ctx, const std::filesystem::path& path) {
    ExternalArray a(ctx, path, /*temporary=*/false);
    internal::open_file(a.path_, "wb");
    return a;
  }

  /// Existing persistent array. Validates the companion metadata if present.
  static ExternalArray open(Context& ctx, const std::filesystem::path& path) {
    std::error_code ec;
    auto bytes = std::filesystem::file_size(path, ec);
    if (ec) {
      throw StorageError(extpart::detail::concat("missing array file ", path.string()));
    }
    if (bytes % kRecordSize != 0) {
      throw StorageError(extpart::detail::concat("array file ", path.string(), " has ", bytes,
                                                 " bytes, not a multiple of ", kRecordSize));
    }
    ExternalArray a(ctx, path, /*temporary=*/false);
    a.size_ = bytes / kRecordSize;
    auto meta = metadata_path(path);
    if (std::filesystem::exists(meta)) {
      std::ifstream in(meta);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw StorageError(extpart::detail::concat("unreadable metadata ", meta.string(), ": ",
                                                   e.what()));
      }
      if (j.value("record_size", std::uint64_t{0}) != kRecordSize ||
          j.value("length", std::uint64_t{0}) != a.size_) {
        throw StorageError(extpart::detail::concat("array ", path.string(),
                                                   " disagrees with its metadata (truncated?)"));
      }
    }
    return a;
  }

  static ExternalArray from_span(Context& ctx, std::span<const T> data, std::string_view hint,
                                 IoTag tag = IoTag::kScan) {
    auto a = temporary(ctx, hint);
    a.append(data, tag);
    return a;
  }

  ExternalArray(const ExternalArray&) = delete;
  ExternalArray& operator=(const ExternalArray&) = delete;
  ExternalArray(ExternalArray&& o) noexcept { steal(o); }
  ExternalArray& operator=(ExternalArray&& o) noexcept {
    if (this != &o) {
      discard();
      steal(o);
    }
    return *this;
  }
  ~ExternalArray() { discard(); }

  bool valid() const { return ctx_ != nullptr; }
  std::uint64_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::uint64_t size_bytes() const { return size_ * kRecordSize; }
  const std::filesystem::path& path() const { return path_; }
  Context& context() const { return *ctx_; }

  /// Blocks touched by one full scan: ceil(N*s/B).
  std::uint64_t scan_blocks() const {
    return extpart::detail::ceil_div(size_bytes(), ctx_->block_size());
  }

  /// Stop deleting the file on destruction.
  void persist() { temporary_ = false; }

  void save_metadata() const {
    nlohmann::json j{{"record_size", kRecordSize}, {"length", size_}, {"endianness", "little"}};
    std::ofstream out(metadata_path(path_));
    out << j.dump() << '\n';
    if (!out) throw StorageError("cannot write metadata for " + path_.string());
  }

  /// Drop all records.
  void clear() {
    internal::open_file(path_, "wb");
    size_ = 0;
  }

  ArrayWriter<T> writer(IoTag tag = IoTag::kScan, bool reserve = true);
  ArrayReader<T> reader(IoTag tag = IoTag::kScan, bool reserve = true) const;

  void append(std::span<const T> data, IoTag tag = IoTag::kScan);

  /// Sequential scan; visitor sees each record once in storage order.
  template <typename Visitor>
  void scan(Visitor&& visit, IoTag tag = IoTag::kScan) const;

  /// Materialize in memory (tests and small arrays).
  std::vector<T> to_vector(IoTag tag = IoTag::kScan) const;

  static std::filesystem::path metadata_path(const std::filesystem::path& p) {
    auto m = p;
    m += ".meta";
    return m;
  }

 private:
  friend class ArrayWriter<T>;
  ExternalArray(Context& ctx, std::filesystem::path path, bool temporary)
      : ctx_(&ctx), path_(std::move(path)), temporary_(temporary) {}

  void steal(ExternalArray& o) {
    ctx_ = o.ctx_;
    path_ = std::move(o.path_);
    size_ = o.size_;
    temporary_ = o.temporary_;
    o.ctx_ = nullptr;
    o.size_ = 0;
    o.temporary_ = false;
    o.path_.clear();
  }
  void discard() {
    if (ctx_ != nullptr && temporary_ && !path_.empty()) {
      std::error_code ec;
      std::filesystem::remove(path_, ec);
    }
    ctx_ = nullptr;
  }

  Context* ctx_ = nullptr;
  std::filesystem::path path_;
  std::uint64_t size_ = 0;
  bool temporary_ = false;
};

/// Buffered appender. Flushes are aligned to B-byte file blocks, so writing N
/// records into an empty array charges exactly ceil(N*s/B) block writes.
template <Record T>
class ArrayWriter {
 public:
  ArrayWriter(ExternalArray<T>& array, IoTag tag, bool reserve)
      : array_(&array), tag_(tag), block_(array.context().block_size()) {
    if (reserve) reservation_ = array.context().budget().reserve(block_, "array writer");
    file_ = internal::open_file(array.path(), "ab");
    buffer_.resize(block_);
    capacity_ = block_ - static_cast<std::size_t>(array.size_bytes() % block_);
  }
  ArrayWriter(ArrayWriter&&) noexcept = default;
  ArrayWriter& operator=(ArrayWriter&&) noexcept = default;
  ~ArrayWriter() {
    try {
      close();
    } catch (...) {
    }
  }

  void push(const T& record) {
    const auto* src = reinterpret_cast<const std::byte*>(&record);
    std::size_t left = sizeof(T);
    while (left > 0) {
      std::size_t n = std::min(left, capacity_ - used_);
      std::memcpy(buffer_.data() + used_, src, n);
      used_ += n;
      src += n;
      left -= n;
      if (used_ == capacity_) flush_block();
    }
    ++pending_;
  }

  std::uint64_t size() const { return array_->size_ + pending_; }

  void close() {
    if (!file_) return;
    if (used_ > 0) flush_block();
    array_->size_ += pending_;
    pending_ = 0;
    file_.reset();
    reservation_.release();
  }

 private:
  void flush_block() {
    if (std::fwrite(buffer_.data(), 1, used_, file_.get()) != used_) {
      throw StorageError("short write to " + array_->path().string());
    }
    array_->context().ledger().charge_write(tag_);
    used_ = 0;
    capacity_ = block_;
  }

  ExternalArray<T>* array_;
  IoTag tag_;
  std::size_t block_;
  MemoryBudget::Reservation reservation_;
  internal::FilePtr file_;
  std::vector<std::byte> buffer_;
  std::size_t capacity_ = 0;
  std::size_t used_ = 0;
  std::uint64_t pending_ = 0;
};

/// Sequential reader with one-record lookahead. Reads aligned B-byte blocks;
/// a full scan charges exactly ceil(N*s/B) block reads.
template <Record T>
class ArrayReader {
 public:
  ArrayReader(const ExternalArray<T>& array, IoTag tag, bool reserve)
      : array_(&array), tag_(tag), block_(array.context().block_size()),
        remaining_bytes_(array.size_bytes()), total_(array.size()) {
    if (reserve) reservation_ = array.context().budget().reserve(block_, "array reader");
    if (total_ > 0) {
      file_ = internal::open_file(array.path(), "rb");
      buffer_.resize(block_);
      decode();
    }
  }
  ArrayReader(ArrayReader&&) noexcept = default;
  ArrayReader& operator=(ArrayReader&&) noexcept = default;

  bool has_next() const { return index_ < total_; }
  const T& peek() const { return current_; }
  /// Index of the record returned by peek().
  std::uint64_t position() const { return index_; }
  std::uint64_t size() const { return total_; }

  void advance() {
    ++index_;
    if (index_ < total_) decode();
  }

  bool next(T& out) {
    if (!has_next()) return false;
    out = current_;
    advance();
    return true;
  }

  /// Bytes of the file already fetched; the current block ends here.
  std::uint64_t fetched_bytes() const { return fetched_; }

  /// Release the file and buffer reservation early.
  void close() {
    file_.reset();
    reservation_.release();
    index_ = total_;
  }

 private:
  void fill() {
    std::size_t want = static_cast<std::size_t>(std::min<std::uint64_t>(block_, remaining_bytes_));
    if (want == 0 || std::fread(buffer_.data(), 1, want, file_.get()) != want) {
      throw StorageError("truncated array file " + array_->path().string());
    }
    array_->context().ledger().charge_read(tag_);
    remaining_bytes_ -= want;
    fetched_ += want;
    avail_ = want;
    pos_ = 0;
  }

  void decode() {
    auto* dst = reinterpret_cast<std::byte*>(&current_);
    std::size_t left = sizeof(T);
    while (left > 0) {
      if (pos_ == avail_) fill();
      std::size_t n = std::min(left, avail_ - pos_);
      std::memcpy(dst, buffer_.data() + pos_, n);
      pos_ += n;
      dst += n;
      left -= n;
    }
  }

  const ExternalArray<T>* array_;
  IoTag tag_;
  std::size_t block_;
  MemoryBudget::Reservation reservation_;
  internal::FilePtr file_;
  std::vector<std::byte> buffer_;
  std::size_t avail_ = 0;
  std::size_t pos_ = 0;
  std::uint64_t remaining_bytes_;
  std::uint64_t fetched_ = 0;
  std::uint64_t total_;
  std::uint64_t index_ = 0;
  T current_{};
};

template <Record T>
ArrayWriter<T> ExternalArray<T>::writer(IoTag tag, bool reserve) {
  return ArrayWriter<T>(*this, tag, reserve);
}

template <Record T>
ArrayReader<T> ExternalArray<T>::reader(IoTag tag, bool reserve) const {
  return ArrayReader<T>(*this, tag, reserve);
}

template <Record T>
void ExternalArray<T>::append(std::span<const T> data, IoTag tag) {
  auto w = writer(tag);
  for (const auto& r : data) w.push(r);
  w.close();
}

template <Record T>
template <typename Visitor>
void ExternalArray<T>::scan(Visitor&& visit, IoTag tag) const {
  auto r = reader(tag);
  while (r.has_next()) {
    visit(r.peek());
    r.advance();
  }
}

template <Record T>
std::vector<T> ExternalArray<T>::to_vector(IoTag tag) const {
  std::vector<T> out;
  out.reserve(size_);
  scan([&](const T& r) { out.push_back(r); }, tag);
  return out;
}

/// 16-byte (node, value) pair: assignments, contraction maps, partitions.
struct NodeValue {
  std::uint64_t node;
  std::uint64_t value;
  friend bool operator==(const NodeValue&, const NodeValue&) = default;
};
static_assert(sizeof(NodeValue) == 16);

}  // namespace extpart::em
