// Copyright 2026 The hiercascade Authors.
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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hiercascade {

/// Pool value meaning "keep the entire current candidate pool".
inline constexpr std::uint32_t kFullPool = 0;

/// The cascade contract: per-level embedding dimensions (strictly increasing)
/// and per-level pool sizes (non-increasing, with kFullPool ranking above any
/// finite size). Validated on construction; never repaired.
class HierSchedule {
 public:
  HierSchedule(std::vector<std::uint32_t> dims, std::vector<std::uint32_t> pools);

  /// Schedule with every pool set to kFullPool (pruning disabled).
  static HierSchedule unpruned(std::vector<std::uint32_t> dims);

  std::size_t levels() const { return dims_.size(); }
  std::uint32_t dim(std::size_t level) const { return dims_.at(level); }
  std::uint32_t pool(std::size_t level) const { return pools_.at(level); }
  std::uint32_t final_dim() const { return dims_.back(); }
  std::span<const std::uint32_t> dims() const { return dims_; }
  std::span<const std::uint32_t> pools() const { return pools_; }

  /// K for `level` clamped to the size of the pool it is selecting from.
  std::size_t effective_pool(std::size_t level, std::size_t current_pool) const;

  /// Same dims, pools replaced (validated again).
  HierSchedule with_pools(std::vector<std::uint32_t> pools) const;

  bool same_dims(const HierSchedule& other) const { return dims_ == other.dims_; }

  std::string to_string() const;

  friend bool operator==(const HierSchedule&, const HierSchedule&) = default;

 private:
  std::vector<std::uint32_t> dims_;
  std::vector<std::uint32_t> pools_;
};

/// Parses a comma-separated list of non-negative integers ("8,16,32").
/// Accepts scientific notation when the value is integral ("1e5").
std::vector<std::uint64_t> parse_uint_list(const std::string& text);

}  // namespace hiercascade
