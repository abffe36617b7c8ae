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

#include "hiercascade/store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <boost/crc.hpp>

#include "hiercascade/errors.hpp"

namespace hiercascade {
namespace {

using Crc64Xz = boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, 0xFFFFFFFFFFFFFFFFULL,
                                   0xFFFFFFFFFFFFFFFFULL, true, true>;

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* data, std::size_t n) { out_.insert(out_.end(), data, data + n); }

 private:
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void need(std::size_t n) const {
    if (remaining() < n) {
      throw Error(ErrorCode::kTruncatedFile, "need " + std::to_string(n) + " bytes at offset " +
                                                 std::to_string(pos_) + ", file has " +
                                                 std::to_string(in_.size()));
    }
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_finite(std::span<const float> values, std::uint64_t id, std::size_t level) {
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFinite,
                  "id " + std::to_string(id) + " level " + std::to_string(level));
    }
  }
}

}  // namespace

GalleryStore GalleryStore::build(HierSchedule schedule, std::span<const HierEmbedding> items,
                                 std::uint32_t d_raw) {
  const std::size_t levels = schedule.levels();
  std::vector<std::uint64_t> ids;
  ids.reserve(items.size());
  std::vector<std::vector<float>> blocks(levels);
  for (std::size_t l = 0; l < levels; ++l) blocks[l].reserve(items.size() * schedule.dim(l));

  for (const HierEmbedding& item : items) {
    if (item.levels.size() != levels) {
      throw Error(ErrorCode::kDimMismatch, "id " + std::to_string(item.id) + " has " +
                                               std::to_string(item.levels.size()) +
                                               " levels, expected " + std::to_string(levels));
    }
    for (std::size_t l = 0; l < levels; ++l) {
      const auto& vec = item.levels[l];
      if (vec.size() != schedule.dim(l)) {
        throw Error(ErrorCode::kDimMismatch, "level " + std::to_string(l) + ": expected " +
                                                 std::to_string(schedule.dim(l)) + ", got " +
                                                 std::to_string(vec.size()));
      }
      blocks[l].insert(blocks[l].end(), vec.begin(), vec.end());
    }
    ids.push_back(item.id);
  }
  return from_blocks(std::move(schedule), std::move(ids), std::move(blocks), d_raw);
}

GalleryStore GalleryStore::from_blocks(HierSchedule schedule, std::vector<std::uint64_t> ids,
                                       std::vector<std::vector<float>> blocks,
                                       std::uint32_t d_raw) {
  GalleryStore store;
  store.schedule_ = std::move(schedule);
  store.d_raw_ = d_raw;
  if (blocks.size() != store.schedule_.levels()) {
    throw Error(ErrorCode::kDimMismatch, "expected " + std::to_string(store.schedule_.levels()) +
                                             " level blocks, got " + std::to_string(blocks.size()));
  }
  const std::size_t n = ids.size();
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const std::size_t d = store.schedule_.dim(l);
    if (blocks[l].size() != n * d) {
      throw Error(ErrorCode::kDimMismatch, "level " + std::to_string(l) + " block holds " +
                                               std::to_string(blocks[l].size()) +
                                               " floats, expected " + std::to_string(n * d));
    }
    for (std::size_t i = 0; i < n; ++i) {
      check_finite(std::span<const float>(blocks[l]).subspan(i * d, d), ids[i], l);
    }
  }
  store.index_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!store.index_.emplace(ids[i], i).second) {
      throw Error(ErrorCode::kDuplicateId, std::to_string(ids[i]));
    }
  }
  store.ids_ = std::move(ids);
  store.blocks_ = std::move(blocks);
  return store;
}

std::optional<std::size_t> GalleryStore::find(std::uint64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t GalleryStore::position_of(std::uint64_t id) const {
  auto pos = find(id);
  if (!pos) throw Error(ErrorCode::kUnknownId, std::to_string(id));
  return *pos;
}

HierEmbedding GalleryStore::item(std::size_t pos) const {
  HierEmbedding out;
  out.id = ids_.at(pos);
  out.levels.reserve(schedule_.levels());
  for (std::size_t l = 0; l < schedule_.levels(); ++l) {
    auto v = vector(l, pos);
    out.levels.emplace_back(v.begin(), v.end());
  }
  return out;
}

bool GalleryStore::bitwise_equal(const GalleryStore& other) const {
  if (!(schedule_ == other.schedule_) || d_raw_ != other.d_raw_ || ids_ != other.ids_) {
    return false;
  }
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& a = blocks_[l];
    const auto& b = other.blocks_[l];
    if (a.size() != b.size()) return false;
    if (!a.empty() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

GalleryStore make_raw_store(std::span<const RawItem> items, std::uint32_t d_raw) {
  std::vector<std::uint64_t> ids;
  std::vector<float> block;
  ids.reserve(items.size());
  block.reserve(items.size() * d_raw);
  for (const RawItem& item : items) {
    if (item.raw.size() != d_raw) {
      throw Error(ErrorCode::kDimMismatch, "raw item " + std::to_string(item.id) + ": expected " +
                                               std::to_string(d_raw) + ", got " +
                                               std::to_string(item.raw.size()));
    }
    ids.push_back(item.id);
    block.insert(block.end(), item.raw.begin(), item.raw.end());
  }
  std::vector<std::vector<float>> blocks;
  blocks.push_back(std::move(block));
  return GalleryStore::from_blocks(HierSchedule({d_raw}, {kFullPool}), std::move(ids),
                                   std::move(blocks), d_raw);
}

std::vector<RawItem> raw_items(const GalleryStore& store) {
  if (store.schedule().levels() != 1 || store.d_raw() != store.schedule().dim(0)) {
    throw Error(ErrorCode::kScheduleMismatch,
                "not a raw-item store: " + store.schedule().to_string() +
                    " d_raw=" + std::to_string(store.d_raw()));
  }
  std::vector<RawItem> items(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    items[i].id = store.id_at(i);
    auto v = store.vector(0, i);
    items[i].raw.assign(v.begin(), v.end());
  }
  return items;
}

std::uint64_t crc64(std::span<const std::uint8_t> bytes) {
  Crc64Xz crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::vector<std::uint8_t> serialize_store(const GalleryStore& store) {
  const HierSchedule& schedule = store.schedule();
  std::vector<std::uint8_t> out;
  std::size_t payload = 0;
  for (auto d : schedule.dims()) payload += store.size() * d * 4;
  out.reserve(24 + 8 * schedule.levels() + 8 * store.size() + payload + 8);

  ByteWriter w(out);
  w.raw(kStoreMagic, 4);
  w.u32(kStoreVersion);
  w.u32(static_cast<std::uint32_t>(schedule.levels()));
  w.u64(store.size());
  w.u32(store.d_raw());
  for (auto d : schedule.dims()) w.u32(d);
  for (auto k : schedule.pools()) w.u32(k);
  for (auto id : store.ids()) w.u64(id);
  for (std::size_t l = 0; l < schedule.levels(); ++l) {
    for (float v : store.level_block(l)) w.f32(v);
  }
  w.u64(crc64(out));
  return out;
}

GalleryStore parse_store(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.need(4);
  if (std::memcmp(bytes.data(), kStoreMagic, 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "not a store file");
  }
  r.u32();
  const std::uint32_t version = r.u32();
  if (version != kStoreVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, std::to_string(version));
  }
  const std::uint32_t levels = r.u32();
  const std::uint64_t count = r.u64();
  const std::uint32_t d_raw = r.u32();
  if (levels == 0) throw Error(ErrorCode::kInvalidSchedule, "zero levels");

  r.need(std::size_t{8} * levels);
  std::vector<std::uint32_t> dims(levels), pools(levels);
  for (auto& d : dims) d = r.u32();
  for (auto& k : pools) k = r.u32();
  HierSchedule schedule(std::move(dims), std::move(pools));

  // Size check up front so a bogus count cannot trigger a huge allocation.
  std::uint64_t per_item = 8;
  for (auto d : schedule.dims()) per_item += std::uint64_t{4} * d;
  if (count > (r.remaining() / per_item) + 1 || r.remaining() < count * per_item + 8) {
    throw Error(ErrorCode::kTruncatedFile,
                "header declares " + std::to_string(count) + " items, file has " +
                    std::to_string(bytes.size()) + " bytes");
  }
  if (r.remaining() != count * per_item + 8) {
    throw Error(ErrorCode::kChecksumMismatch, "trailing bytes after payload");
  }

  std::vector<std::uint64_t> ids(count);
  for (auto& id : ids) id = r.u64();
  std::vector<std::vector<float>> blocks(levels);
  for (std::uint32_t l = 0; l < levels; ++l) {
    blocks[l].resize(count * schedule.dim(l));
    for (float& v : blocks[l]) v = r.f32();
  }
  const std::size_t body = r.position();
  const std::uint64_t stored = r.u64();
  const std::uint64_t actual = crc64(bytes.first(body));
  if (stored != actual) throw Error(ErrorCode::kChecksumMismatch, "stored CRC does not match");

  return GalleryStore::from_blocks(std::move(schedule), std::move(ids), std::move(blocks), d_raw);
}

std::uint64_t save_store(const GalleryStore& store, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize_store(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed for " + path.string());
  return bytes.size();
}

GalleryStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "read failed for " + path.string());
  return parse_store(bytes);
}

}  // namespace hiercascade
