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

#include "hiercascade/topk.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hiercascade/errors.hpp"

namespace hiercascade {
namespace {

bool pos_ranks_before(const ScoredPos& a, const ScoredPos& b) {
  return ranks_before(a.scored, b.scored);
}

void check_query(std::span<const double> query, const GalleryStore& store, std::size_t level) {
  if (level >= store.schedule().levels()) {
    throw Error(ErrorCode::kLevelOutOfRange, std::to_string(level));
  }
  if (query.size() != store.schedule().dim(level)) {
    throw Error(ErrorCode::kDimMismatch, "query at level " + std::to_string(level) +
                                             ": expected " +
                                             std::to_string(store.schedule().dim(level)) +
                                             ", got " + std::to_string(query.size()));
  }
}

// Top-k of candidates[begin, end), sorted.
std::vector<ScoredPos> select_range(std::span<const double> query, const GalleryStore& store,
                                    std::size_t level, const CandidateSet& candidates,
                                    std::size_t begin, std::size_t end, std::size_t k) {
  const float* block = store.level_block(level).data();
  const std::size_t dim = query.size();
  std::vector<ScoredPos> scored;
  scored.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const std::size_t pos = candidates.at(i);
    scored.push_back({pos, {store.id_at(pos), dot_f64(query, block + pos * dim)}});
  }
  if (scored.size() > k) {
    std::nth_element(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                     scored.end(), pos_ranks_before);
    scored.resize(k);
  }
  std::sort(scored.begin(), scored.end(), pos_ranks_before);
  return scored;
}

}  // namespace

int max_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::vector<ScoredPos> scan_topk_serial(std::span<const double> query, const GalleryStore& store,
                                        std::size_t level, CandidateSet candidates,
                                        std::size_t k) {
  check_query(query, store, level);
  const float* block = store.level_block(level).data();
  const std::size_t n = candidates.size(store);
  std::vector<ScoredPos> scored(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pos = candidates.at(i);
    scored[i] = {pos, {store.id_at(pos), dot_f64(query, block + pos * query.size())}};
  }
  std::sort(scored.begin(), scored.end(), pos_ranks_before);
  scored.resize(std::min(k, n));
  return scored;
}

std::vector<ScoredPos> scan_topk_omp(std::span<const double> query, const GalleryStore& store,
                                     std::size_t level, CandidateSet candidates, std::size_t k,
                                     int workers) {
  check_query(query, store, level);
  const std::size_t n = candidates.size(store);
  k = std::min(k, n);
  if (k == 0) return {};

  const std::size_t shards =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, n);
  if (shards == 1) return select_range(query, store, level, candidates, 0, n, k);

  std::vector<std::vector<ScoredPos>> local(shards);
  const auto shard_count = static_cast<std::ptrdiff_t>(shards);
#pragma omp parallel for num_threads(workers) schedule(static)
  for (std::ptrdiff_t s = 0; s < shard_count; ++s) {
    const auto su = static_cast<std::size_t>(s);
    local[su] = select_range(query, store, level, candidates, n * su / shards,
                             n * (su + 1) / shards, k);
  }

  std::vector<ScoredPos> merged;
  merged.reserve(shards * k);
  for (auto& part : local) merged.insert(merged.end(), part.begin(), part.end());
  std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(k),
                    merged.end(), pos_ranks_before);
  merged.resize(k);
  return merged;
}

std::vector<ScoredPos> scan_topk(std::span<const double> query, const GalleryStore& store,
                                 std::size_t level, CandidateSet candidates, std::size_t k,
                                 int workers) {
  return scan_topk_omp(query, store, level, candidates, k, workers);
}

}  // namespace hiercascade
