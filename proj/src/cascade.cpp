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

#include "hiercascade/cascade.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <string>

#include "hiercascade/errors.hpp"

namespace hiercascade {
namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

std::vector<double> widen(std::span<const float> v) { return {v.begin(), v.end()}; }

Eigen::VectorXd to_eigen(std::span<const float> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

void check_config(const QueryEmbedding& query, const GalleryStore& store,
                  const CascadeConfig& cfg) {
  const HierSchedule& s = cfg.schedule;
  if (!s.same_dims(store.schedule())) {
    throw Error(ErrorCode::kScheduleMismatch,
                "config " + s.to_string() + " vs store " + store.schedule().to_string());
  }
  if (query.levels.size() != s.levels()) {
    throw Error(ErrorCode::kScheduleMismatch, "query has " + std::to_string(query.levels.size()) +
                                                  " levels, schedule has " +
                                                  std::to_string(s.levels()));
  }
  for (std::size_t l = 0; l < s.levels(); ++l) {
    if (query.levels[l].size() != s.dim(l)) {
      throw Error(ErrorCode::kScheduleMismatch, "query level " + std::to_string(l) + " has dim " +
                                                    std::to_string(query.levels[l].size()));
    }
  }
  if (cfg.rerank) {
    const auto d = static_cast<Eigen::Index>(s.final_dim());
    if (cfg.rerank->weight.rows() != d || cfg.rerank->weight.cols() != d) {
      throw Error(ErrorCode::kScheduleMismatch, "re-rank scorer dimension does not match " +
                                                    std::to_string(s.final_dim()));
    }
    const std::uint32_t last_pool = s.pool(s.levels() - 1);
    if (last_pool != kFullPool && cfg.rerank_depth > last_pool) {
      throw Error(ErrorCode::kInvalidArgument, "re-rank depth " +
                                                   std::to_string(cfg.rerank_depth) +
                                                   " exceeds final pool " +
                                                   std::to_string(last_pool));
    }
  }
  if (store.empty()) throw Error(ErrorCode::kEmptyGallery, "gallery has no items");
}

void rerank_block(CascadeTrace& trace, const QueryEmbedding& query, const GalleryStore& store,
                  const CascadeConfig& cfg) {
  const std::size_t last = cfg.schedule.levels() - 1;
  std::size_t depth = cfg.rerank_depth == 0 ? trace.final.size() : cfg.rerank_depth;
  depth = std::min(depth, trace.final.size());
  const Eigen::VectorXd q = to_eigen(query.levels[last]);
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t pos = store.position_of(trace.final[i].id);
    trace.final[i].score = vlm_score(*cfg.rerank, q, to_eigen(store.vector(last, pos)));
  }
  std::sort(trace.final.begin(), trace.final.begin() + static_cast<std::ptrdiff_t>(depth),
            ranks_before);
  trace.reranked = depth;
}

}  // namespace

QueryEmbedding QueryEmbedding::from_store(const GalleryStore& store, std::size_t pos) {
  QueryEmbedding q;
  for (std::size_t l = 0; l < store.schedule().levels(); ++l) {
    auto v = store.vector(l, pos);
    q.levels.emplace_back(v.begin(), v.end());
  }
  return q;
}

bool CascadeTrace::same_result(const CascadeTrace& other) const {
  if (levels.size() != other.levels.size() || final != other.final ||
      reranked != other.reranked) {
    return false;
  }
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const LevelTrace& a = levels[l];
    const LevelTrace& b = other.levels[l];
    if (a.pool_in != b.pool_in || a.pool_requested != b.pool_requested || a.kept != b.kept ||
        a.clamped != b.clamped || a.ids != b.ids || a.scores != b.scores) {
      return false;
    }
  }
  return true;
}

std::vector<Scored> topk_level(std::span<const float> query, const GalleryStore& store,
                               std::size_t level, std::span<const std::uint64_t> candidate_ids,
                               std::size_t k, int workers) {
  if (level >= store.schedule().levels()) {
    throw Error(ErrorCode::kLevelOutOfRange, std::to_string(level));
  }
  std::vector<std::size_t> positions;
  positions.reserve(candidate_ids.size());
  for (std::uint64_t id : candidate_ids) positions.push_back(store.position_of(id));
  const std::vector<double> q = widen(query);
  const auto hits = scan_topk(q, store, level, CandidateSet{positions, false}, k, workers);
  std::vector<Scored> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.scored);
  return out;
}

CascadeTrace cascade_search(const QueryEmbedding& query, const GalleryStore& store,
                            const CascadeConfig& cfg) {
  check_config(query, store, cfg);
  const HierSchedule& schedule = cfg.schedule;

  CascadeTrace trace;
  trace.levels.resize(schedule.levels());
  std::vector<std::size_t> survivors;
  std::vector<ScoredPos> hits;

  for (std::size_t l = 0; l < schedule.levels(); ++l) {
    const auto start = Clock::now();
    const CandidateSet candidates =
        l == 0 ? CandidateSet{{}, true} : CandidateSet{survivors, false};
    const std::size_t pool_in = candidates.size(store);
    const std::size_t k = schedule.effective_pool(l, pool_in);
    const std::vector<double> q = widen(query.levels[l]);
    hits = scan_topk(q, store, l, candidates, k, cfg.workers);

    survivors.clear();
    LevelTrace& lt = trace.levels[l];
    lt.pool_in = pool_in;
    lt.pool_requested = schedule.pool(l);
    lt.kept = hits.size();
    lt.clamped = schedule.pool(l) != kFullPool && schedule.pool(l) > pool_in;
    lt.ids.reserve(hits.size());
    lt.scores.reserve(hits.size());
    for (const auto& h : hits) {
      survivors.push_back(h.pos);
      lt.ids.push_back(h.scored.id);
      lt.scores.push_back(h.scored.score);
    }
    lt.time_ns = elapsed_ns(start);
  }

  trace.final.reserve(hits.size());
  for (const auto& h : hits) trace.final.push_back(h.scored);

  if (cfg.rerank) {
    const auto start = Clock::now();
    rerank_block(trace, query, store, cfg);
    trace.rerank_ns = elapsed_ns(start);
  }
  return trace;
}

std::vector<Scored> brute_force_search(std::span<const float> query, const GalleryStore& store,
                                       std::size_t k, int workers) {
  if (store.empty()) throw Error(ErrorCode::kEmptyGallery, "gallery has no items");
  const std::size_t last = store.schedule().levels() - 1;
  const std::vector<double> q = widen(query);
  const auto hits = scan_topk(q, store, last, CandidateSet{{}, true}, k, workers);
  std::vector<Scored> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.scored);
  return out;
}

BatchResult batch_search(std::span<const QueryEmbedding> queries, const GalleryStore& store,
                         const CascadeConfig& cfg, int workers) {
  if (workers < 1) throw Error(ErrorCode::kInvalidArgument, "worker budget must be >= 1");
  BatchResult result;
  result.traces.resize(queries.size());
  const auto start = Clock::now();

  // Parallel across queries; each query's scans stay single-threaded.
  CascadeConfig inner = cfg;
  inner.workers = 1;
  std::vector<std::exception_ptr> errors(queries.size());
  const auto count = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for num_threads(workers) schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    try {
      result.traces[iu] = cascade_search(queries[iu], store, inner);
    } catch (...) {
      errors[iu] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  result.wall_ns = elapsed_ns(start);
  return result;
}

}  // namespace hiercascade
