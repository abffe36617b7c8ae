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
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hiercascade {

using Ranking = std::vector<std::uint64_t>;

/// Fraction of queries whose ground-truth id is among the first k ranked ids.
/// Throws MissingGroundTruth when the two lists differ in length,
/// InvalidArgument when k == 0.
double recall_at_k(std::span<const Ranking> ranked, std::span<const std::uint64_t> truth,
                   std::size_t k);

/// Arithmetic mean. Throws EmptyInput.
double average_recall(std::span<const double> values);

struct DirectionRecall {
  std::string name;
  std::vector<double> recall;  // aligned with EvalReport::ks
};

struct EvalReport {
  std::vector<std::size_t> ks;
  std::vector<DirectionRecall> directions;
  double ar = 0.0;

  std::vector<double> all_values() const;
};

struct DirectionInput {
  std::string name;
  std::span<const Ranking> ranked;
  std::span<const std::uint64_t> truth;
};

EvalReport evaluate(std::span<const DirectionInput> directions, std::span<const std::size_t> ks);

/// `key = value` lines: r@<k>_<direction> and ar.
std::string format_eval_text(const EvalReport& report);
/// Header line plus one data row, same columns as the text form.
std::string format_eval_csv(const EvalReport& report);

/// 1-based rank of `truth` in `ranked`, or nullopt when absent.
std::optional<std::size_t> rank_of(const Ranking& ranked, std::uint64_t truth);

}  // namespace hiercascade
