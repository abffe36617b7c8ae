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

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "hiercascade/cascade.hpp"
#include "hiercascade/errors.hpp"
#include "hiercascade/topk.hpp"
#include "gtest_util.hpp"
#include "test_util.hpp"

namespace hiercascade {
namespace {

using testing::code_of;
using testing::random_schedule;
using testing::random_store;
using testing::random_vector;

std::vector<std::uint64_t> ids_of(const std::vector<Scored>& ranked) {
  std::vector<std::uint64_t> out;
  for (const auto& s : ranked) out.push_back(s.id);
  return out;
}

// Second implementation: every pairwise comparison counted, O(n^2).
std::vector<Scored> quadratic_topk(std::span<const float> query, const GalleryStore& store,
                                   std::size_t level, std::size_t k) {
  const std::size_t n = store.size();
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = store.vector(level, i);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      acc += static_cast<double>(query[j]) * static_cast<double>(row[j]);
    }
    score[i] = acc;
  }
  std::vector<Scored> out(std::min(k, n));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rank = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (score[j] > score[i] || (score[j] == score[i] && store.id_at(j) < store.id_at(i))) {
        ++rank;
      }
    }
    if (rank < out.size()) out[rank] = {store.id_at(i), score[i]};
  }
  return out;
}

QueryEmbedding random_query(std::mt19937_64& rng, const HierSchedule& schedule) {
  QueryEmbedding q;
  for (std::size_t l = 0; l < schedule.levels(); ++l) {
    q.levels.push_back(random_vector(rng, schedule.dim(l)));
  }
  return q;
}

GalleryStore small_two_d_store() {
  const HierSchedule schedule = HierSchedule::unpruned({2});
  std::vector<HierEmbedding> items{{0, {{1, 0}}}, {1, {{0, 1}}}, {2, {{0.5f, 0.5f}}}};
  return GalleryStore::build(schedule, items);
}

// Gallery A, B, C of the hand-evaluated two-level example (ids 0, 1, 2).
GalleryStore abc_store() {
  const HierSchedule schedule = HierSchedule::unpruned({1, 2});
  std::vector<HierEmbedding> items{
      {0, {{2}, {0, 1}}}, {1, {{1}, {1, 0}}}, {2, {{-5}, {1, 1}}}};
  return GalleryStore::build(schedule, items);
}

TEST(TopkLevel, Examples) {
  const GalleryStore store = small_two_d_store();
  const std::vector<float> q{1, 0};
  const std::vector<std::uint64_t> all{0, 1, 2};
  EXPECT_EQ(topk_level(q, store, 0, all, 2), (std::vector<Scored>{{0, 1.0}, {2, 0.5}}));

  const auto full = topk_level(q, store, 0, all, 10);
  EXPECT_EQ(ids_of(full), (std::vector<std::uint64_t>{0, 2, 1}));

  const HierSchedule one = HierSchedule::unpruned({2});
  std::vector<HierEmbedding> twins{{9, {{1, 1}}}, {4, {{1, 1}}}};
  const GalleryStore tied = GalleryStore::build(one, twins);
  const std::vector<std::uint64_t> both{9, 4};
  EXPECT_EQ(ids_of(topk_level(q, tied, 0, both, 2)), (std::vector<std::uint64_t>{4, 9}));
}

TEST(TopkLevel, Errors) {
  const GalleryStore store = small_two_d_store();
  const std::vector<float> q{1, 0};
  const std::vector<std::uint64_t> bad{0, 77};
  EXPECT_EQ(code_of([&] { topk_level(q, store, 0, bad, 1); }), ErrorCode::kUnknownId);
  const std::vector<std::uint64_t> ok{0};
  EXPECT_EQ(code_of([&] { topk_level(q, store, 3, ok, 1); }), ErrorCode::kLevelOutOfRange);
  const std::vector<float> wrong{1, 0, 0};
  EXPECT_EQ(code_of([&] { topk_level(wrong, store, 0, ok, 1); }), ErrorCode::kDimMismatch);
}

TEST(TopkLevel, SortedProperty) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const HierSchedule schedule = random_schedule(rng);
    // Few distinct values so ties are common.
    std::vector<HierEmbedding> items;
    std::uniform_int_distribution<int> small(-2, 2);
    for (std::uint64_t id = 0; id < 60; ++id) {
      HierEmbedding e{(id * 37) % 101, {}};
      for (std::size_t l = 0; l < schedule.levels(); ++l) {
        std::vector<float> v(schedule.dim(l));
        for (auto& x : v) x = static_cast<float>(small(rng));
        e.levels.push_back(v);
      }
      items.push_back(e);
    }
    const GalleryStore store = GalleryStore::build(schedule, items);
    const auto q = random_query(rng, schedule);
    const std::size_t level = schedule.levels() - 1;
    const auto ranked = topk_level(q.levels[level], store, level, store.ids(), 25);
    ASSERT_EQ(ranked.size(), 25u);
    for (std::size_t i = 1; i < ranked.size(); ++i) {
      EXPECT_TRUE(ranks_before(ranked[i - 1], ranked[i]));
    }
    EXPECT_EQ(ranked, quadratic_topk(q.levels[level], store, level, 25));
  }
}

TEST(Kernels, SerialAndShardedAgree) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 40; ++trial) {
    const HierSchedule schedule = random_schedule(rng);
    const std::size_t n = 1 + trial * 13;
    const GalleryStore store = random_store(rng, schedule, n);
    const auto q = random_query(rng, schedule);
    std::vector<double> qd(q.levels.back().begin(), q.levels.back().end());
    const std::size_t level = schedule.levels() - 1;
    for (std::size_t k : {std::size_t{1}, std::size_t{7}, n, n + 5}) {
      const auto serial = scan_topk_serial(qd, store, level, {{}, true}, k);
      for (int workers : {1, 2, 3, 8}) {
        const auto sharded = scan_topk_omp(qd, store, level, {{}, true}, k, workers);
        ASSERT_EQ(serial.size(), sharded.size());
        for (std::size_t i = 0; i < serial.size(); ++i) {
          EXPECT_EQ(serial[i].pos, sharded[i].pos);
          EXPECT_EQ(serial[i].scored, sharded[i].scored);
        }
      }
    }
  }
}

TEST(Cascade, HandEvaluatedPruningExample) {
  const GalleryStore store = abc_store();
  CascadeConfig cfg(HierSchedule({1, 2}, {2, 1}));
  const QueryEmbedding q{{{1}, {1, 0}}};
  const CascadeTrace trace = cascade_search(q, store, cfg);
  ASSERT_EQ(trace.levels.size(), 2u);
  EXPECT_EQ(trace.levels[0].ids, (std::vector<std::uint64_t>{0, 1}));
  EXPECT_EQ(trace.final, (std::vector<Scored>{{1, 1.0}}));
  // C reaches the same final-level score as B but never gets there.
  EXPECT_EQ(ids_of(brute_force_search(q.levels[1], store, 3)),
            (std::vector<std::uint64_t>{1, 2, 0}));
}

TEST(Cascade, ConstantScorerFallsBackToIdOrder) {
  std::mt19937_64 rng(33);
  const HierSchedule schedule({3, 6}, {0, 20});
  const GalleryStore store = random_store(rng, schedule, 50, 100);
  const auto q = random_query(rng, schedule);

  CascadeConfig plain(schedule);
  const CascadeTrace base = cascade_search(q, store, plain);

  CascadeConfig cfg(schedule);
  cfg.rerank = VlmScorer::zeros(6);
  cfg.rerank_depth = 8;
  const CascadeTrace trace = cascade_search(q, store, cfg);
  ASSERT_EQ(trace.final.size(), 20u);
  EXPECT_EQ(trace.reranked, 8u);

  std::vector<std::uint64_t> top(base.final.size());
  for (std::size_t i = 0; i < 8; ++i) top[i] = base.final[i].id;
  std::sort(top.begin(), top.begin() + 8);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(trace.final[i].id, top[i]);
    EXPECT_EQ(trace.final[i].score, 0.5);
  }
  for (std::size_t i = 8; i < 20; ++i) EXPECT_EQ(trace.final[i], base.final[i]);
}

TEST(Cascade, RerankOrdersByProbability) {
  std::mt19937_64 rng(34);
  const HierSchedule schedule({2, 4}, {0, 10});
  const GalleryStore store = random_store(rng, schedule, 40);
  const auto q = random_query(rng, schedule);
  CascadeConfig cfg(schedule);
  VlmScorer scorer = VlmScorer::zeros(4);
  scorer.weight = Eigen::MatrixXd::Identity(4, 4) * -1.0;
  cfg.rerank = scorer;
  const CascadeTrace trace = cascade_search(q, store, cfg);
  EXPECT_EQ(trace.reranked, 10u);
  for (std::size_t i = 1; i < trace.final.size(); ++i) {
    EXPECT_TRUE(ranks_before(trace.final[i - 1], trace.final[i]));
  }
}

TEST(Cascade, Errors) {
  std::mt19937_64 rng(35);
  const HierSchedule schedule({2, 4}, {0, 3});
  const GalleryStore store = random_store(rng, schedule, 10);
  CascadeConfig other(HierSchedule({2, 5}, {0, 3}));
  const auto q = random_query(rng, schedule);
  EXPECT_EQ(code_of([&] { cascade_search(q, store, other); }), ErrorCode::kScheduleMismatch);

  QueryEmbedding short_query{{q.levels[0]}};
  CascadeConfig cfg(schedule);
  EXPECT_EQ(code_of([&] { cascade_search(short_query, store, cfg); }),
            ErrorCode::kScheduleMismatch);

  const GalleryStore empty = GalleryStore::build(schedule, {});
  EXPECT_EQ(code_of([&] { cascade_search(q, empty, cfg); }), ErrorCode::kEmptyGallery);
  EXPECT_EQ(code_of([&] { brute_force_search(q.levels[1], empty, 3); }),
            ErrorCode::kEmptyGallery);

  CascadeConfig deep(schedule);
  deep.rerank = VlmScorer::zeros(4);
  deep.rerank_depth = 4;
  EXPECT_EQ(code_of([&] { cascade_search(q, store, deep); }), ErrorCode::kInvalidArgument);
}

TEST(BruteForce, SingleItemGallery) {
  const HierSchedule schedule = HierSchedule::unpruned({2});
  std::vector<HierEmbedding> items{{42, {{1, 2}}}};
  const GalleryStore store = GalleryStore::build(schedule, items);
  const std::vector<float> q{3, -1};
  for (std::size_t k : {1, 5}) {
    EXPECT_EQ(brute_force_search(q, store, k), (std::vector<Scored>{{42, 1.0}}));
  }
}

TEST(BruteForce, MatchesQuadraticScan) {
  std::mt19937_64 rng(36);
  const HierSchedule schedule = HierSchedule::unpruned({4, 9});
  const GalleryStore store = random_store(rng, schedule, 200, 1000);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = random_query(rng, schedule);
    EXPECT_EQ(brute_force_search(q.levels[1], store, 10),
              quadratic_topk(q.levels[1], store, 1, 10));
  }
}

TEST(Cascade, OracleEquivalenceWithoutPruning) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    const HierSchedule schedule = random_schedule(rng, 4);
    const std::size_t n = 1 + rng() % 150;
    const GalleryStore store = random_store(rng, schedule, n, rng() % 1000);
    const auto q = random_query(rng, schedule);
    // Finite pools at least as large as the gallery disable pruning too.
    std::vector<std::uint32_t> pools(schedule.levels(), trial % 2 ? 0u : 200u);
    const CascadeConfig cfg(schedule.with_pools(pools));
    const CascadeTrace trace = cascade_search(q, store, cfg);
    EXPECT_EQ(trace.final, brute_force_search(q.levels.back(), store, n));
    EXPECT_EQ(trace.final, quadratic_topk(q.levels.back(), store, schedule.levels() - 1, n));
  }
}

std::vector<std::uint32_t> random_pools(std::mt19937_64& rng, std::size_t levels,
                                        std::uint32_t n) {
  std::vector<std::uint32_t> pools;
  std::uint32_t bound = n + 5;
  for (std::size_t l = 0; l < levels; ++l) {
    if (l == 0 && rng() % 2) {
      pools.push_back(kFullPool);
      continue;
    }
    const std::uint32_t k = 1 + static_cast<std::uint32_t>(rng() % bound);
    pools.push_back(k);
    bound = k;
  }
  return pools;
}

TEST(Cascade, NestingAndFinalLevelConsistencyProperty) {
  std::mt19937_64 rng(38);
  for (int trial = 0; trial < 150; ++trial) {
    const HierSchedule dims = random_schedule(rng, 4);
    const std::uint32_t n = 1 + static_cast<std::uint32_t>(rng() % 120);
    const GalleryStore store = random_store(rng, dims, n);
    const CascadeConfig cfg(dims.with_pools(random_pools(rng, dims.levels(), n)));
    const auto q = random_query(rng, dims);
    const CascadeTrace trace = cascade_search(q, store, cfg);

    std::vector<std::uint64_t> previous(store.ids().begin(), store.ids().end());
    for (std::size_t l = 0; l < trace.levels.size(); ++l) {
      const LevelTrace& lt = trace.levels[l];
      EXPECT_EQ(lt.pool_in, previous.size());
      EXPECT_EQ(lt.kept, cfg.schedule.effective_pool(l, previous.size()));
      EXPECT_EQ(lt.ids.size(), lt.kept);
      const std::set<std::uint64_t> allowed(previous.begin(), previous.end());
      for (auto id : lt.ids) EXPECT_TRUE(allowed.count(id));
      // Each level is the exact top-k of its input pool.
      const auto expect = topk_level(q.levels[l], store, l, previous, lt.kept);
      EXPECT_EQ(lt.ids, ids_of(expect));
      previous = lt.ids;
    }
    EXPECT_EQ(ids_of(trace.final), trace.levels.back().ids);
  }
}

// Pruning can only remove candidates, so a surviving item never ranks worse
// than it does without pruning.
TEST(Cascade, PruningNeverWorsensSurvivorRankProperty) {
  std::mt19937_64 rng(39);
  for (int trial = 0; trial < 100; ++trial) {
    const HierSchedule dims = random_schedule(rng, 3);
    const std::uint32_t n = 2 + static_cast<std::uint32_t>(rng() % 100);
    const GalleryStore store = random_store(rng, dims, n);
    const CascadeConfig pruned(dims.with_pools(random_pools(rng, dims.levels(), n)));
    const CascadeConfig full(dims);
    const auto q = random_query(rng, dims);
    const auto a = ids_of(cascade_search(q, store, pruned).final);
    const auto b = ids_of(cascade_search(q, store, full).final);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto at = std::find(b.begin(), b.end(), a[i]) - b.begin();
      EXPECT_LE(i, static_cast<std::size_t>(at));
    }
  }
}

// Membership in the pruned top-k does not imply membership in the unpruned
// top-k at the same k: pruning can drop a distractor that would outrank the
// ground truth.
TEST(Cascade, PrunedRecallCanExceedUnprunedRecall) {
  const HierSchedule dims = HierSchedule::unpruned({1, 2});
  std::vector<HierEmbedding> items{{0, {{5}, {1, 0}}},     // ground truth
                                   {1, {{-5}, {2, 0}}}};   // distractor
  const GalleryStore store = GalleryStore::build(dims, items);
  const QueryEmbedding q{{{1}, {1, 0}}};
  const auto pruned = cascade_search(q, store, CascadeConfig(dims.with_pools({1, 1})));
  const auto unpruned = cascade_search(q, store, CascadeConfig(dims.with_pools({0, 1})));
  EXPECT_EQ(ids_of(pruned.final), (std::vector<std::uint64_t>{0}));
  EXPECT_EQ(ids_of(unpruned.final), (std::vector<std::uint64_t>{1}));
}

TEST(Cascade, ClampingIsRecorded) {
  std::mt19937_64 rng(40);
  const HierSchedule schedule({2, 3}, {50, 10});
  const GalleryStore store = random_store(rng, schedule, 7);
  const auto trace = cascade_search(random_query(rng, schedule), store, CascadeConfig(schedule));
  EXPECT_TRUE(trace.levels[0].clamped);
  EXPECT_EQ(trace.levels[0].kept, 7u);
  EXPECT_TRUE(trace.levels[1].clamped);
  EXPECT_EQ(trace.final.size(), 7u);
}

TEST(BatchSearch, DeterministicAcrossWorkerBudgets) {
  std::mt19937_64 rng(41);
  const HierSchedule schedule({4, 8, 16}, {0, 60, 10});
  const GalleryStore store = random_store(rng, schedule, 500);
  std::vector<QueryEmbedding> queries;
  for (int i = 0; i < 100; ++i) queries.push_back(random_query(rng, schedule));
  CascadeConfig cfg(schedule);
  const BatchResult one = batch_search(queries, store, cfg, 1);
  const BatchResult eight = batch_search(queries, store, cfg, 8);
  ASSERT_EQ(one.traces.size(), 100u);
  ASSERT_EQ(eight.traces.size(), 100u);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    EXPECT_TRUE(one.traces[i].same_result(eight.traces[i]));
    EXPECT_TRUE(one.traces[i].same_result(cascade_search(queries[i], store, cfg)));
  }
  cfg.workers = 4;
  EXPECT_TRUE(cascade_search(queries[0], store, cfg).same_result(one.traces[0]));
}

TEST(BatchSearch, EmptyQueryListAndBadBudget) {
  std::mt19937_64 rng(42);
  const HierSchedule schedule({2}, {0});
  const GalleryStore store = random_store(rng, schedule, 5);
  const CascadeConfig cfg(schedule);
  EXPECT_TRUE(batch_search({}, store, cfg, 4).traces.empty());
  std::vector<QueryEmbedding> queries{random_query(rng, schedule)};
  EXPECT_EQ(code_of([&] { batch_search(queries, store, cfg, 0); }),
            ErrorCode::kInvalidArgument);
}

TEST(BatchSearch, FullScheduleKeepsFinalPoolOfOneHundred) {
  std::mt19937_64 rng(43);
  const HierSchedule schedule({128, 300, 768}, {kFullPool, 1000, 100});
  const GalleryStore store = random_store(rng, schedule, 10000);
  std::vector<QueryEmbedding> queries;
  for (int i = 0; i < 1000; ++i) queries.push_back(random_query(rng, schedule));
  const BatchResult result = batch_search(queries, store, CascadeConfig(schedule), max_workers());
  ASSERT_EQ(result.traces.size(), 1000u);
  for (const auto& t : result.traces) {
    EXPECT_EQ(t.levels[0].kept, 10000u);
    EXPECT_EQ(t.levels[1].kept, 1000u);
    EXPECT_EQ(t.final.size(), 100u);
  }
}

}  // namespace
}  // namespace hiercascade
