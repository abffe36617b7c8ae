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

#include "hiercascade/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "hiercascade/errors.hpp"

namespace hiercascade {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string> column_names(const EvalReport& report) {
  std::vector<std::string> names;
  for (const auto& d : report.directions) {
    for (std::size_t k : report.ks) names.push_back("r@" + std::to_string(k) + "_" + d.name);
  }
  names.emplace_back("ar");
  return names;
}

}  // namespace

std::optional<std::size_t> rank_of(const Ranking& ranked, std::uint64_t truth) {
  auto it = std::find(ranked.begin(), ranked.end(), truth);
  if (it == ranked.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ranked.begin()) + 1;
}

double recall_at_k(std::span<const Ranking> ranked, std::span<const std::uint64_t> truth,
                   std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (ranked.size() != truth.size()) {
    throw Error(ErrorCode::kMissingGroundTruth, std::to_string(ranked.size()) +
                                                    " rankings but " +
                                                    std::to_string(truth.size()) + " truths");
  }
  if (ranked.empty()) throw Error(ErrorCode::kEmptyInput, "no queries");
  std::size_t hits = 0;
  for (std::size_t q = 0; q < ranked.size(); ++q) {
    const auto& r = ranked[q];
    const auto end = r.begin() + static_cast<std::ptrdiff_t>(std::min(k, r.size()));
    if (std::find(r.begin(), end, truth[q]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranked.size());
}

double average_recall(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "no recall values");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

std::vector<double> EvalReport::all_values() const {
  std::vector<double> out;
  for (const auto& d : directions) out.insert(out.end(), d.recall.begin(), d.recall.end());
  return out;
}

EvalReport evaluate(std::span<const DirectionInput> directions, std::span<const std::size_t> ks) {
  if (directions.empty() || ks.empty()) throw Error(ErrorCode::kEmptyInput, "nothing to evaluate");
  EvalReport report;
  report.ks.assign(ks.begin(), ks.end());
  std::sort(report.ks.begin(), report.ks.end());
  for (const DirectionInput& d : directions) {
    DirectionRecall dr;
    dr.name = d.name;
    for (std::size_t k : report.ks) dr.recall.push_back(recall_at_k(d.ranked, d.truth, k));
    report.directions.push_back(std::move(dr));
  }
  const auto values = report.all_values();
  report.ar = average_recall(values);
  return report;
}

std::string format_eval_text(const EvalReport& report) {
  const auto names = column_names(report);
  auto values = report.all_values();
  values.push_back(report.ar);
  std::ostringstream out;
  for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << " = " << fmt(values[i]) << "\n";
  return out.str();
}

std::string format_eval_csv(const EvalReport& report) {
  const auto names = column_names(report);
  auto values = report.all_values();
  values.push_back(report.ar);
  std::ostringstream out;
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << "\n";
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << fmt(values[i]);
  out << "\n";
  return out.str();
}

}  // namespace hiercascade
