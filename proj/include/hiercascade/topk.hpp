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

// Exact dot-product top-k scan kernels over one level of a GalleryStore.
//
// Two implementations share one scoring function and one total order
// (score descending, id ascending), so they return identical results:
//   - scan_topk_serial: score everything, full sort, truncate. Reference.
//   - scan_topk_omp: shard candidates across OpenMP threads, select shard-local
//     top-k, then merge. The merge is deterministic because the order is total.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hiercascade/store.hpp"

namespace hiercascade {

struct Scored {
  std::uint64_t id = 0;
  double score = 0.0;

  friend bool operator==(const Scored&, const Scored&) = default;
};

/// Strict total order used for every ranking: higher score first, then lower id.
inline bool ranks_before(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

/// Dot product of a double query against a float row, accumulated in double
/// in index order.
inline double dot_f64(std::span<const double> query, const float* row) {
  double acc = 0.0;
  for (std::size_t i = 0; i < query.size(); ++i) acc += query[i] * static_cast<double>(row[i]);
  return acc;
}

/// Candidate positions (not ids) into the store; empty span plus
/// `all_positions = true` scans the whole level.
struct CandidateSet {
  std::span<const std::size_t> positions;
  bool all_positions = false;

  std::size_t size(const GalleryStore& store) const {
    return all_positions ? store.size() : positions.size();
  }
  std::size_t at(std::size_t i) const { return all_positions ? i : positions[i]; }
};

struct ScoredPos {
  std::size_t pos = 0;
  Scored scored;
};

std::vector<ScoredPos> scan_topk_serial(std::span<const double> query, const GalleryStore& store,
                                        std::size_t level, CandidateSet candidates,
                                        std::size_t k);

std::vector<ScoredPos> scan_topk_omp(std::span<const double> query, const GalleryStore& store,
                                     std::size_t level, CandidateSet candidates, std::size_t k,
                                     int workers);

/// Production entry point: the sharded kernel, one shard when workers <= 1.
std::vector<ScoredPos> scan_topk(std::span<const double> query, const GalleryStore& store,
                                 std::size_t level, CandidateSet candidates, std::size_t k,
                                 int workers);

/// Number of threads the OpenMP runtime would use by default (1 without OpenMP).
int max_workers();

}  // namespace hiercascade
