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

#include <random>
#include <string>

#include <gtest/gtest.h>

#include "hiercascade/cascade.hpp"
#include "hiercascade/cost_model.hpp"
#include "hiercascade/errors.hpp"
#include "gtest_util.hpp"

namespace hiercascade {
namespace {

using testing::code_of;

CostParams paper_params() {
  CostParams p;
  p.t_e = 1000;
  p.encoder_layers = 12;
  p.gallery = 1000000000;
  p.dims = {128, 300, 768};
  p.counts = {1000000000, 100000, 100};
  return p;
}

// Direct evaluation of the generalized formula, written independently.
std::uint64_t formula(const CostParams& p) {
  const std::uint64_t enc = p.chunk() * p.t_e;
  std::uint64_t total = enc;
  for (std::size_t l = 0; l + 1 < p.dims.size(); ++l) {
    total += std::max(enc, p.counts[l] * p.dims[l] * p.unit_mul);
  }
  return total + p.counts.back() * p.dims.back() * p.unit_mul;
}

CostParams random_params(std::mt19937_64& rng) {
  CostParams p;
  const std::size_t levels = 1 + rng() % 5;
  p.encoder_layers = levels + rng() % 24;
  p.chunk_layers = 1 + rng() % (p.encoder_layers / levels);
  p.t_e = rng() % 100000;
  p.unit_mul = 1 + rng() % 3;
  p.gallery = rng() % 2000000;
  std::uint64_t count = p.gallery;
  std::uint64_t dim = 1 + rng() % 64;
  for (std::size_t l = 0; l < levels; ++l) {
    count = l == 0 ? count : rng() % (count + 1);
    p.counts.push_back(count);
    p.dims.push_back(dim);
    dim += 1 + rng() % 256;
  }
  return p;
}

TEST(TraditionalCost, Examples) {
  EXPECT_EQ(traditional_cost(paper_params()), 768000012000ull);
  CostParams empty = paper_params();
  empty.gallery = 0;
  EXPECT_EQ(traditional_cost(empty), 12000ull);
  CostParams unit;
  unit.t_e = 0;
  unit.encoder_layers = 1;
  unit.gallery = 1;
  unit.dims = {1};
  unit.counts = {1};
  EXPECT_EQ(traditional_cost(unit), 1ull);
}

TEST(HierarchicalCost, PaperParameters) {
  const CostParams p = paper_params();
  EXPECT_EQ(p.chunk(), 4u);
  const CostReport r = hierarchical_cost(p);
  EXPECT_EQ(r.hierarchical, 128030080800ull);
  EXPECT_EQ(r.hierarchical, 4000ull + 128000000000ull + 30000000ull + 76800ull);
  EXPECT_EQ(r.traditional, 768000012000ull);
  EXPECT_NEAR(r.speedup, 5.999, 0.0005);
  EXPECT_GE(r.speedup, 5.99);
  EXPECT_LE(r.speedup, 6.01);
  ASSERT_EQ(r.windows.size(), 2u);
  EXPECT_TRUE(r.windows[0].search_dominates);
  EXPECT_TRUE(r.windows[1].search_dominates);
  EXPECT_EQ(r.final_search, 76800ull);
}

TEST(HierarchicalCost, EncodeBoundAndSearchBound) {
  CostParams p = paper_params();
  p.counts = {0, 0, 0};
  EXPECT_EQ(hierarchical_cost(p).hierarchical, 3ull * 4000ull);
  p = paper_params();
  p.t_e = 0;
  EXPECT_EQ(hierarchical_cost(p).hierarchical, 128000000000ull + 30000000ull + 76800ull);
}

TEST(HierarchicalCost, MatchesFormulaProperty) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 500; ++trial) {
    const CostParams p = random_params(rng);
    const CostReport r = hierarchical_cost(p);
    EXPECT_EQ(r.hierarchical, formula(p));
    EXPECT_DOUBLE_EQ(r.speedup, static_cast<double>(r.traditional) /
                                    static_cast<double>(r.hierarchical));
  }
}

TEST(HierarchicalCost, MonotoneInCountsAndDims) {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 500; ++trial) {
    const CostParams p = random_params(rng);
    const std::uint64_t base = hierarchical_cost(p).hierarchical;
    const std::size_t l = rng() % p.levels();
    CostParams more_n = p;
    more_n.counts[l] += 1 + rng() % 1000;
    EXPECT_GE(hierarchical_cost(more_n).hierarchical, base);
    CostParams more_d = p;
    more_d.dims[l] += 1 + rng() % 100;
    EXPECT_GE(hierarchical_cost(more_d).hierarchical, base);
  }
}

// Each overlap window costs at most encode + search, so the cascade pays at
// most L chunks of encoding on top of its summed scans.
TEST(HierarchicalCost, BoundedOverheadProperty) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 500; ++trial) {
    const CostParams p = random_params(rng);
    std::uint64_t scans = 0;
    for (std::size_t l = 0; l < p.levels(); ++l) scans += p.counts[l] * p.dims[l] * p.unit_mul;
    EXPECT_LE(hierarchical_cost(p).hierarchical, scans + p.levels() * p.chunk() * p.t_e);
  }
}

// Against the flat baseline the overhead is not bounded by encoding alone:
// with no pruning every level rescans the whole gallery.
TEST(HierarchicalCost, UnprunedCascadeCanExceedFlatPlusEncoding) {
  CostParams p;
  p.t_e = 1;
  p.encoder_layers = 2;
  p.gallery = 1000;
  p.dims = {767, 768};
  p.counts = {1000, 1000};
  const CostReport r = hierarchical_cost(p);
  EXPECT_GT(r.hierarchical, r.traditional + p.levels() * p.chunk() * p.t_e);
}

TEST(CostParams, Validation) {
  CostParams p = paper_params();
  p.counts.pop_back();
  EXPECT_EQ(code_of([&] { p.validate(); }), ErrorCode::kInvalidArgument);
  p = paper_params();
  p.chunk_layers = 7;  // three chunks of seven need 21 > 12 + 7 layers
  EXPECT_EQ(code_of([&] { hierarchical_cost(p); }), ErrorCode::kInvalidArgument);
  p = paper_params();
  p.dims[1] = 0;
  EXPECT_EQ(code_of([&] { p.validate(); }), ErrorCode::kInvalidArgument);
  p = paper_params();
  p.gallery = ~0ull;
  EXPECT_EQ(code_of([&] { traditional_cost(p); }), ErrorCode::kInvalidArgument);
}

TEST(Pipeline, ReproducesPaperTotal) {
  const CostParams p = paper_params();
  const PipelineResult sim = simulate_pipeline(analytic_durations(p));
  EXPECT_EQ(sim.makespan, 128030080800ull);
  ASSERT_FALSE(sim.critical_path.empty());
  EXPECT_EQ(sim.critical_path.back().finish, sim.makespan);
}

TEST(Pipeline, EncodeOnly) {
  StageDurations d{{5, 7, 11}, {0, 0, 0}};
  EXPECT_EQ(simulate_pipeline(d).makespan, 23u);
}

TEST(Pipeline, DominantSearchStageOnCriticalPath) {
  StageDurations d{{10, 10, 10}, {1000000, 5, 3}};
  const PipelineResult sim = simulate_pipeline(d);
  EXPECT_EQ(sim.makespan, 10u + 1000000u + 10u + 3u);
  bool found = false;
  for (const auto& s : sim.critical_path) found |= s.stage == "search[0]";
  EXPECT_TRUE(found);
}

TEST(Pipeline, MatchesAnalyticTotalProperty) {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 500; ++trial) {
    const CostParams p = random_params(rng);
    EXPECT_EQ(simulate_pipeline(analytic_durations(p)).makespan, hierarchical_cost(p).hierarchical);
  }
}

TEST(Pipeline, MismatchedStageCounts) {
  StageDurations d{{1, 2}, {3}};
  EXPECT_EQ(code_of([&] { simulate_pipeline(d); }), ErrorCode::kInvalidArgument);
}

TEST(MeasuredDurations, AveragesTraceTimes) {
  CostParams p = paper_params();
  p.dims = {2, 4};
  p.counts = {10, 5};
  std::vector<CascadeTrace> traces(2);
  for (int i = 0; i < 2; ++i) {
    traces[i].levels.resize(2);
    traces[i].levels[0].time_ns = 100 + 100 * i;
    traces[i].levels[1].time_ns = 10;
  }
  const StageDurations d = measured_durations(p, traces);
  EXPECT_EQ(d.search, (std::vector<std::uint64_t>{150, 10}));
  EXPECT_EQ(d.encode, (std::vector<std::uint64_t>{6000, 6000}));
  traces[1].levels.pop_back();
  EXPECT_EQ(code_of([&] { measured_durations(p, traces); }), ErrorCode::kScheduleMismatch);
}

TEST(CostReport, TextFormat) {
  const CostParams p = paper_params();
  const std::string text = format_cost_report(p, hierarchical_cost(p));
  EXPECT_NE(text.find("traditional = 768000012000\n"), std::string::npos);
  EXPECT_NE(text.find("hierarchical = 128030080800\n"), std::string::npos);
  EXPECT_NE(text.find("speedup = 5.999\n"), std::string::npos);
  EXPECT_NE(text.find("traditional_leading_digit = 7e11\n"), std::string::npos);
  EXPECT_NE(text.find("hierarchical_leading_digit = 1e11\n"), std::string::npos);
  EXPECT_NE(text.find("speedup_leading_digit = 7\n"), std::string::npos);
}

}  // namespace
}  // namespace hiercascade
