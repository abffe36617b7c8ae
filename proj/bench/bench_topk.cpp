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

// Serial reference vs sharded OpenMP top-k over one level of a gallery, plus
// a full three-level cascade against the flat final-level scan.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "hiercascade/cascade.hpp"
#include "hiercascade/topk.hpp"

namespace hiercascade {
namespace {

GalleryStore make_gallery(std::size_t n, const HierSchedule& schedule, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<std::vector<float>> blocks(schedule.levels());
  for (std::size_t l = 0; l < schedule.levels(); ++l) {
    blocks[l].resize(n * schedule.dim(l));
    for (auto& x : blocks[l]) x = normal(rng);
  }
  std::vector<std::uint64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return GalleryStore::from_blocks(schedule, std::move(ids), std::move(blocks));
}

std::vector<double> make_query(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> q(dim);
  for (auto& x : q) x = static_cast<float>(normal(rng));
  return q;
}

const HierSchedule& flat_schedule() {
  static const HierSchedule s = HierSchedule::unpruned({768});
  return s;
}

void BM_ScanSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const GalleryStore store = make_gallery(n, flat_schedule(), 1);
  const auto q = make_query(768, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(scan_topk_serial(q, store, 0, {{}, true}, 100));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_ScanOmp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int workers = static_cast<int>(state.range(1));
  const GalleryStore store = make_gallery(n, flat_schedule(), 1);
  const auto q = make_query(768, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(scan_topk_omp(q, store, 0, {{}, true}, 100, workers));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_Cascade(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const HierSchedule schedule({128, 300, 768}, {kFullPool, 1000, 100});
  const GalleryStore store = make_gallery(n, schedule, 3);
  const QueryEmbedding q = QueryEmbedding::from_store(make_gallery(1, schedule, 4), 0);
  const CascadeConfig cfg(schedule);
  for (auto _ : state) benchmark::DoNotOptimize(cascade_search(q, store, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_Flat(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const HierSchedule schedule({128, 300, 768}, {kFullPool, 1000, 100});
  const GalleryStore store = make_gallery(n, schedule, 3);
  const QueryEmbedding q = QueryEmbedding::from_store(make_gallery(1, schedule, 4), 0);
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_search(q.levels[2], store, 100));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

BENCHMARK(BM_ScanSerial)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScanOmp)
    ->ArgsProduct({{10000, 50000}, {1, 2, 4}})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Cascade)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Flat)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace hiercascade

BENCHMARK_MAIN();
