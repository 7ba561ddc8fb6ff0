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

#include <bit>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace extpart {

static_assert(std::endian::native == std::endian::little,
              "on-disk records are little-endian and written with memcpy");

using NodeId = std::uint64_t;
using ClusterId = std::uint64_t;
using BlockId = std::uint64_t;
using Weight = std::uint64_t;

/// Reserved node ID terminating every adjacency list. All-ones bit pattern.
inline constexpr NodeId kSentinel = std::numeric_limits<NodeId>::max();

/// Size bound meaning "no size constraint".
inline constexpr Weight kUnbounded = std::numeric_limits<Weight>::max();

// Error hierarchy. The CLI maps each class onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Backing file missing, truncated or unwritable.
class StorageError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text (METIS / edge list) or partition file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied parameter (k, epsilon, incompatible flags).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Array lengths that must agree do not.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Memory budget / block size combination cannot run the requested algorithm.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Internal data structure invariant violated (sentinels, message counts).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class EmptyQueueError : public Error {
 public:
  using Error::Error;
};

/// No partition satisfying the balance constraint was found.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) {
  return a == 0 ? 0 : 1 + (a - 1) / b;
}

}  // namespace detail
}  // namespace extpart
