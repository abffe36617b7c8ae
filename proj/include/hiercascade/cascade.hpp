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

// Coarse-to-fine cascade search. Level 0 scans the whole gallery with the
// lowest-dimensional vectors and keeps the top K_0; each following level
// re-scores only the survivors of the previous level at a higher dimension.
// The final top-R can optionally be re-ordered by a matching scorer.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hiercascade/objectives.hpp"
#include "hiercascade/schedule.hpp"
#include "hiercascade/store.hpp"
#include "hiercascade/topk.hpp"

namespace hiercascade {

struct CascadeConfig {
  HierSchedule schedule;
  std::optional<VlmScorer> rerank;
  /// Re-rank depth R; 0 means the final pool size.
  std::size_t rerank_depth = 0;
  /// Threads for the per-level scans of a single query.
  int workers = 1;

  explicit CascadeConfig(HierSchedule s) : schedule(std::move(s)) {}
};

/// The query side's per-level vectors.
struct QueryEmbedding {
  std::vector<std::vector<float>> levels;

  static QueryEmbedding from_store(const GalleryStore& store, std::size_t pos);
};

struct LevelTrace {
  std::size_t pool_in = 0;       // candidates scanned
  std::uint32_t pool_requested = 0;  // schedule value (kFullPool = all)
  std::size_t kept = 0;          // min(K, pool_in)
  bool clamped = false;          // requested K exceeded the pool
  std::vector<std::uint64_t> ids;
  std::vector<double> scores;
  std::int64_t time_ns = 0;
};

struct CascadeTrace {
  std::vector<LevelTrace> levels;
  /// Final ranking. Inside the re-ranked block `score` is the matching
  /// probability; below it, the last level's dot product.
  std::vector<Scored> final;
  std::size_t reranked = 0;
  std::int64_t rerank_ns = 0;

  /// Equal ids, scores and bookkeeping; stage timings are ignored.
  bool same_result(const CascadeTrace& other) const;
};

/// Exact top-k over `candidate_ids` at one level. Throws UnknownId,
/// LevelOutOfRange, DimMismatch.
std::vector<Scored> topk_level(std::span<const float> query, const GalleryStore& store,
                               std::size_t level, std::span<const std::uint64_t> candidate_ids,
                               std::size_t k, int workers = 1);

/// Throws ScheduleMismatch, EmptyGallery.
CascadeTrace cascade_search(const QueryEmbedding& query, const GalleryStore& store,
                            const CascadeConfig& cfg);

/// Single-stage full-gallery scan at the final level. Throws EmptyGallery.
std::vector<Scored> brute_force_search(std::span<const float> query, const GalleryStore& store,
                                       std::size_t k, int workers = 1);

struct BatchResult {
  std::vector<CascadeTrace> traces;  // query order
  std::int64_t wall_ns = 0;
};

/// Runs cascade_search for every query, parallel across queries. Output is
/// identical for every worker budget.
BatchResult batch_search(std::span<const QueryEmbedding> queries, const GalleryStore& store,
                         const CascadeConfig& cfg, int workers);

}  // namespace hiercascade
