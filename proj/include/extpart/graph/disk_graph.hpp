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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "extpart/common.hpp"
#include "extpart/em/context.hpp"
#include "extpart/em/external_array.hpp"
#include "json.hpp"

namespace extpart {

/// One slot of an adjacency list: (target, w(u, target)). A record whose
/// target is kSentinel terminates the list; its weight is meaningless.
struct EdgeRecord {
  NodeId target;
  Weight weight;

  bool is_sentinel() const { return target == kSentinel; }
  static constexpr EdgeRecord sentinel() { return {kSentinel, 0}; }
  friend bool operator==(const EdgeRecord&, const EdgeRecord&) = default;
};
static_assert(sizeof(EdgeRecord) == 16);

/// Adjacency-array graph on disk. Three external arrays:
///   edges        - for each node in ID order, its (target, weight) records
///                  followed by one sentinel; 2m + n records in total
///   offsets      - per node, index of its first record in `edges`
///   node_weights - per node, c(v)
/// m counts undirected edges; each is stored in both endpoints' lists.
class DiskGraph {
 public:
  DiskGraph() = default;
  DiskGraph(NodeId n, std::uint64_t m, Weight total_node_weight,
            em::ExternalArray<EdgeRecord> edges, em::ExternalArray<std::uint64_t> offsets,
            em::ExternalArray<Weight> node_weights)
      : n_(n), m_(m), total_node_weight_(total_node_weight), edges_(std::move(edges)),
        offsets_(std::move(offsets)), node_weights_(std::move(node_weights)) {
    if (edges_.size() != 2 * m_ + n_ || offsets_.size() != n_ || node_weights_.size() != n_) {
      throw DimensionError(detail::concat("graph arrays disagree: n=", n_, " m=", m_,
                                          " edge records=", edges_.size(),
                                          " offsets=", offsets_.size(),
                                          " node weights=", node_weights_.size()));
    }
  }

  DiskGraph(DiskGraph&&) noexcept = default;
  DiskGraph& operator=(DiskGraph&&) noexcept = default;

  NodeId n() const { return n_; }
  std::uint64_t m() const { return m_; }
  /// Sum of c(v); equals n for unit node weights.
  Weight total_node_weight() const { return total_node_weight_; }

  const em::ExternalArray<EdgeRecord>& edges() const { return edges_; }
  const em::ExternalArray<std::uint64_t>& offsets() const { return offsets_; }
  const em::ExternalArray<Weight>& node_weights() const { return node_weights_; }
  em::Context& context() const { return edges_.context(); }

  /// Bytes a semi-external algorithm keeps resident per level: cluster IDs and
  /// sizes for every node, plus the edge data if it were loaded.
  std::uint64_t resident_bytes() const { return 16 * n_ + 32 * m_ + 8; }

  static constexpr const char* kEdgesFile = "edges.bin";
  static constexpr const char* kOffsetsFile = "offsets.bin";
  static constexpr const char* kNodeWeightsFile = "node_weights.bin";
  static constexpr const char* kHeaderFile = "header.json";

  nlohmann::json header() const {
    return {{"format", "extpart-diskgraph"},
            {"version", 1},
            {"n", n_},
            {"m", m_},
            {"total_node_weight", total_node_weight_},
            {"edge_record_bytes", sizeof(EdgeRecord)},
            {"offset_record_bytes", sizeof(std::uint64_t)},
            {"node_weight_record_bytes", sizeof(Weight)},
            {"sentinel", "all-ones"},
            {"endianness", "little"}};
  }

  /// Write the three arrays plus header.json into `dir`.
  void save(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw StorageError("cannot create graph directory " + dir.string());
    copy_array(edges_, dir / kEdgesFile);
    copy_array(offsets_, dir / kOffsetsFile);
    copy_array(node_weights_, dir / kNodeWeightsFile);
    std::ofstream out(dir / kHeaderFile);
    out << header().dump(2) << '\n';
    if (!out) throw StorageError("cannot write " + (dir / kHeaderFile).string());
  }

  /// Open a graph directory written by save(). The arrays are used in place.
  static DiskGraph open(em::Context& ctx, const std::filesystem::path& dir) {
    std::ifstream in(dir / kHeaderFile);
    if (!in) throw StorageError("missing " + (dir / kHeaderFile).string());
    nlohmann::json h;
    try {
      in >> h;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(detail::concat("unreadable graph header: ", e.what()));
    }
    if (h.value("format", "") != "extpart-diskgraph" ||
        h.value("edge_record_bytes", 0) != static_cast<int>(sizeof(EdgeRecord)) ||
        h.value("endianness", "") != "little") {
      throw FormatError("graph header in " + dir.string() + " is not an extpart graph");
    }
    const NodeId n = h.at("n").get<NodeId>();
    const std::uint64_t m = h.at("m").get<std::uint64_t>();
    const Weight total = h.value("total_node_weight", n);
    return DiskGraph(n, m, total, em::ExternalArray<EdgeRecord>::open(ctx, dir / kEdgesFile),
                     em::ExternalArray<std::uint64_t>::open(ctx, dir / kOffsetsFile),
                     em::ExternalArray<Weight>::open(ctx, dir / kNodeWeightsFile));
  }

 private:
  template <em::Record T>
  static void copy_array(const em::ExternalArray<T>& a, const std::filesystem::path& to) {
    std::error_code ec;
    if (std::filesystem::exists(to) && std::filesystem::equivalent(a.path(), to, ec)) {
      a.save_metadata();
      return;
    }
    std::filesystem::copy_file(a.path(), to, std::filesystem::copy_options::overwrite_existing,
                               ec);
    if (ec) throw StorageError("cannot write " + to.string() + ": " + ec.message());
    nlohmann::json j{{"record_size", sizeof(T)}, {"length", a.size()}, {"endianness", "little"}};
    std::ofstream meta(em::ExternalArray<T>::metadata_path(to));
    meta << j.dump() << '\n';
  }

  NodeId n_ = 0;
  std::uint64_t m_ = 0;
  Weight total_node_weight_ = 0;
  em::ExternalArray<EdgeRecord> edges_;
  em::ExternalArray<std::uint64_t> offsets_;
  em::ExternalArray<Weight> node_weights_;
};

/// Streams adjacency lists in node order by co-scanning the edge array and the
/// node-weight array. A complete scan costs Scan(2m+n) + Scan(n) block reads.
/// The current list is buffered; its buffer is charged to the memory budget.
class AdjacencyStream {
 public:
  explicit AdjacencyStream(const DiskGraph& g)
      : g_(&g), edges_(g.edges().reader()), weights_(g.node_weights().reader()),
        reservation_(g.context().budget().reserve(0, "adjacency list buffer")) {}

  /// Loads the next node's list. Returns false after the last node.
  bool next() {
    if (next_ == g_->n()) {
      if (edges_.has_next()) {
        throw IntegrityError(detail::concat("edge array has records after the sentinel of node ",
                                            g_->n() == 0 ? 0 : g_->n() - 1));
      }
      return false;
    }
    node_ = next_++;
    list_.clear();
    for (;;) {
      if (!edges_.has_next()) {
        throw IntegrityError(
            detail::concat("adjacency list of node ", node_, " is missing its sentinel"));
      }
      EdgeRecord r = edges_.peek();
      edges_.advance();
      if (r.is_sentinel()) break;
      if (r.target >= g_->n() || r.target == node_) {
        throw IntegrityError(detail::concat("adjacency list of node ", node_,
                                            " holds invalid target ", r.target));
      }
      if (list_.size() == list_.capacity()) {
        std::size_t cap = std::max<std::size_t>(16, 2 * list_.capacity());
        reservation_.resize(cap * sizeof(EdgeRecord), "adjacency list buffer");
        list_.reserve(cap);
      }
      list_.push_back(r);
    }
    weight_ = weights_.peek();
    weights_.advance();
    return true;
  }

  NodeId node() const { return node_; }
  Weight node_weight() const { return weight_; }
  std::span<const EdgeRecord> list() const { return list_; }

 private:
  const DiskGraph* g_;
  em::ArrayReader<EdgeRecord> edges_;
  em::ArrayReader<Weight> weights_;
  em::MemoryBudget::Reservation reservation_;
  std::vector<EdgeRecord> list_;
  NodeId node_ = 0;
  NodeId next_ = 0;
  Weight weight_ = 0;
};

/// Calls visit(node, c(node), list) once per node in increasing ID order.
/// I/O: Scan(2m+n) + Scan(n). A corrupt sentinel structure raises
/// IntegrityError naming the offending node.
template <typename Visitor>
void for_each_adjacency(const DiskGraph& g, Visitor&& visit) {
  AdjacencyStream s(g);
  while (s.next()) visit(s.node(), s.node_weight(), s.list());
}

}  // namespace extpart
