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
#include <filesystem>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "hiercascade/schedule.hpp"

namespace hiercascade {

/// One item's vectors, one per level, of increasing dimension.
struct HierEmbedding {
  std::uint64_t id = 0;
  std::vector<std::vector<float>> levels;
};

/// A raw feature vector standing in for an encoder hidden state.
struct RawItem {
  std::uint64_t id = 0;
  std::vector<float> raw;
};

/// Immutable, sealed collection of hierarchical embeddings.
///
/// Vectors are kept as one contiguous row-major block per level (all items'
/// level-0 vectors, then all level-1 vectors, ...), which is also the on-disk
/// payload layout. Item order is insertion order.
class GalleryStore {
 public:
  /// Validates and seals. Throws DuplicateId, DimMismatch or NonFinite.
  static GalleryStore build(HierSchedule schedule, std::span<const HierEmbedding> items,
                            std::uint32_t d_raw = 0);

  /// Builds directly from per-level blocks (used by the loader and the encoder).
  static GalleryStore from_blocks(HierSchedule schedule, std::vector<std::uint64_t> ids,
                                  std::vector<std::vector<float>> blocks,
                                  std::uint32_t d_raw = 0);

  const HierSchedule& schedule() const { return schedule_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::uint32_t d_raw() const { return d_raw_; }

  std::span<const std::uint64_t> ids() const { return ids_; }
  std::uint64_t id_at(std::size_t pos) const { return ids_[pos]; }

  std::span<const float> level_block(std::size_t level) const { return blocks_.at(level); }
  std::span<const float> vector(std::size_t level, std::size_t pos) const {
    const std::size_t d = schedule_.dim(level);
    return std::span<const float>(blocks_[level]).subspan(pos * d, d);
  }

  std::optional<std::size_t> find(std::uint64_t id) const;
  /// Throws UnknownId.
  std::size_t position_of(std::uint64_t id) const;

  HierEmbedding item(std::size_t pos) const;

  /// Bitwise equality of schedule, d_raw, ids and every vector component.
  bool bitwise_equal(const GalleryStore& other) const;

 private:
  GalleryStore() : schedule_({1}, {kFullPool}) {}

  HierSchedule schedule_;
  std::uint32_t d_raw_ = 0;
  std::vector<std::uint64_t> ids_;
  std::vector<std::vector<float>> blocks_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Single-level store holding raw vectors; d_raw is recorded in the header.
GalleryStore make_raw_store(std::span<const RawItem> items, std::uint32_t d_raw);
std::vector<RawItem> raw_items(const GalleryStore& store);

inline constexpr char kStoreMagic[4] = {'H', 'V', 'L', 'P'};
inline constexpr std::uint32_t kStoreVersion = 1;

/// CRC-64/XZ (ECMA-182 polynomial, reflected, all-ones init and xor-out).
std::uint64_t crc64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_store(const GalleryStore& store);
GalleryStore parse_store(std::span<const std::uint8_t> bytes);

/// Writes the binary store; returns bytes written. Throws IoFailure.
std::uint64_t save_store(const GalleryStore& store, const std::filesystem::path& path);
/// Throws IoFailure, BadMagic, UnsupportedVersion, TruncatedFile, ChecksumMismatch.
GalleryStore load_store(const std::filesystem::path& path);

}  // namespace hiercascade
