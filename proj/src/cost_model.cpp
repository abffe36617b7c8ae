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

#include "hiercascade/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <sstream>
#include <tuple>

#include "hiercascade/cascade.hpp"
#include "hiercascade/errors.hpp"

namespace hiercascade {
namespace {

std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw Error(ErrorCode::kInvalidArgument, "cost overflows 64 bits");
  }
  return out;
}

std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) {
    throw Error(ErrorCode::kInvalidArgument, "cost overflows 64 bits");
  }
  return out;
}

// Keeps only the leading decimal digit: 768000012000 -> 7e11.
std::string leading_digit(std::uint64_t v) {
  if (v == 0) return "0";
  int exponent = 0;
  while (v >= 10) {
    v /= 10;
    ++exponent;
  }
  return std::to_string(v) + "e" + std::to_string(exponent);
}

double leading_digit_value(std::uint64_t v) {
  if (v == 0) return 0.0;
  double scale = 1.0;
  while (v >= 10) {
    v /= 10;
    scale *= 10.0;
  }
  return static_cast<double>(v) * scale;
}

}  // namespace

std::uint64_t CostParams::chunk() const {
  if (chunk_layers != 0) return chunk_layers;
  return levels() == 0 ? 0 : encoder_layers / levels();
}

void CostParams::validate() const {
  if (dims.empty()) throw Error(ErrorCode::kInvalidArgument, "need at least one level");
  if (counts.size() != dims.size()) {
    throw Error(ErrorCode::kInvalidArgument, "counts and dims differ in length");
  }
  if (encoder_layers == 0) throw Error(ErrorCode::kInvalidArgument, "encoder_layers must be > 0");
  if (chunk() == 0) throw Error(ErrorCode::kInvalidArgument, "chunk_layers resolves to zero");
  for (auto d : dims) {
    if (d == 0) throw Error(ErrorCode::kInvalidArgument, "dims must be positive");
  }
  if (mul(chunk(), levels()) > encoder_layers + chunk()) {
    throw Error(ErrorCode::kInvalidArgument, "early outputs do not fit in the encoder stack");
  }
}

std::uint64_t traditional_cost(const CostParams& p) {
  p.validate();
  return add(mul(p.encoder_layers, p.t_e), mul(mul(p.gallery, p.dims.back()), p.unit_mul));
}

CostReport hierarchical_cost(const CostParams& p) {
  p.validate();
  CostReport r;
  const std::uint64_t chunk_time = mul(p.chunk(), p.t_e);
  r.first_encode = chunk_time;
  std::uint64_t total = chunk_time;
  for (std::size_t l = 0; l + 1 < p.levels(); ++l) {
    WindowCost w;
    w.encode = chunk_time;
    w.search = mul(mul(p.counts[l], p.dims[l]), p.unit_mul);
    w.search_dominates = w.search > w.encode;
    total = add(total, w.cost());
    r.windows.push_back(w);
  }
  r.final_search = mul(mul(p.counts.back(), p.dims.back()), p.unit_mul);
  r.hierarchical = add(total, r.final_search);
  r.traditional = traditional_cost(p);
  r.speedup = r.hierarchical == 0
                  ? 0.0
                  : static_cast<double>(r.traditional) / static_cast<double>(r.hierarchical);
  return r;
}

StageDurations analytic_durations(const CostParams& p) {
  p.validate();
  StageDurations d;
  const std::uint64_t chunk_time = mul(p.chunk(), p.t_e);
  for (std::size_t l = 0; l < p.levels(); ++l) {
    d.encode.push_back(chunk_time);
    d.search.push_back(mul(mul(p.counts[l], p.dims[l]), p.unit_mul));
  }
  return d;
}

StageDurations measured_durations(const CostParams& p, std::span<const CascadeTrace> traces) {
  p.validate();
  StageDurations d;
  const std::uint64_t chunk_time = mul(p.chunk(), p.t_e);
  for (std::size_t l = 0; l < p.levels(); ++l) {
    d.encode.push_back(chunk_time);
    std::uint64_t sum = 0;
    for (const CascadeTrace& t : traces) {
      if (t.levels.size() != p.levels()) {
        throw Error(ErrorCode::kScheduleMismatch, "trace level count differs from parameters");
      }
      sum = add(sum, static_cast<std::uint64_t>(std::max<std::int64_t>(t.levels[l].time_ns, 0)));
    }
    d.search.push_back(traces.empty() ? 0 : sum / traces.size());
  }
  return d;
}

PipelineResult simulate_pipeline(const StageDurations& durations) {
  const std::size_t levels = durations.encode.size();
  if (levels == 0 || durations.search.size() != levels) {
    throw Error(ErrorCode::kInvalidArgument, "encode and search stage counts must match");
  }

  // Stage index: 2*l = encode[l], 2*l+1 = search[l].
  const std::size_t stages = 2 * levels;
  auto duration = [&](std::size_t s) {
    return s % 2 == 0 ? durations.encode[s / 2] : durations.search[s / 2];
  };
  auto deps = [&](std::size_t s) {
    std::vector<std::size_t> out;
    const std::size_t l = s / 2;
    if (s % 2 == 0) {
      if (l >= 1) out.push_back(2 * (l - 1));
      if (l >= 2) out.push_back(2 * (l - 2) + 1);
    } else {
      out.push_back(2 * l);
      if (l >= 1) out.push_back(2 * (l - 1) + 1);
    }
    return out;
  };

  std::vector<bool> started(stages, false), done(stages, false);
  std::vector<std::uint64_t> start(stages, 0), finish(stages, 0);
  // (finish time, stage) min-heap; stage index breaks ties deterministically.
  using Event = std::pair<std::uint64_t, std::size_t>;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;

  auto try_start = [&](std::uint64_t now) {
    for (std::size_t s = 0; s < stages; ++s) {
      if (started[s]) continue;
      const auto d = deps(s);
      if (!std::all_of(d.begin(), d.end(), [&](std::size_t x) { return done[x]; })) continue;
      started[s] = true;
      start[s] = now;
      finish[s] = add(now, duration(s));
      events.emplace(finish[s], s);
    }
  };

  try_start(0);
  std::uint64_t now = 0;
  while (!events.empty()) {
    const auto [time, stage] = events.top();
    events.pop();
    now = time;
    done[stage] = true;
    // Drain simultaneous completions before releasing dependents.
    while (!events.empty() && events.top().first == now) {
      done[events.top().second] = true;
      events.pop();
    }
    try_start(now);
  }

  PipelineResult result;
  result.makespan = now;

  // Walk back from the last search through whichever dependency released
  // each stage; prefer the search side on ties.
  std::vector<CriticalStage> path;
  std::size_t s = stages - 1;
  while (true) {
    const std::size_t l = s / 2;
    path.push_back({(s % 2 == 0 ? "encode[" : "search[") + std::to_string(l) + "]", start[s],
                    finish[s]});
    const auto d = deps(s);
    if (d.empty()) break;
    std::size_t next = d.front();
    bool found = false;
    for (auto it = d.rbegin(); it != d.rend(); ++it) {
      if (finish[*it] == start[s]) {
        next = *it;
        found = true;
        break;
      }
    }
    if (!found) break;
    s = next;
  }
  std::reverse(path.begin(), path.end());
  result.critical_path = std::move(path);
  return result;
}

std::string format_cost_report(const CostParams& p, const CostReport& r) {
  std::ostringstream out;
  char speedup[64];
  std::snprintf(speedup, sizeof speedup, "%.3f", r.speedup);
  char exact[64];
  std::snprintf(exact, sizeof exact, "%.12g", r.speedup);

  out << "traditional = " << r.traditional << "\n";
  out << "hierarchical = " << r.hierarchical << "\n";
  out << "speedup = " << speedup << "\n";
  out << "speedup_exact = " << exact << "\n";
  out << "gallery = " << p.gallery << "\n";
  out << "levels = " << p.levels() << "\n";
  out << "encoder_layers = " << p.encoder_layers << "\n";
  out << "chunk_layers = " << p.chunk() << "\n";
  out << "t_e = " << p.t_e << "\n";
  out << "unit_mul = " << p.unit_mul << "\n";
  out << "encode_first = " << r.first_encode << "\n";
  for (std::size_t l = 0; l < r.windows.size(); ++l) {
    const WindowCost& w = r.windows[l];
    out << "window_" << l + 1 << "_encode = " << w.encode << "\n";
    out << "window_" << l + 1 << "_search = " << w.search << "\n";
    out << "window_" << l + 1 << "_dominant = " << (w.search_dominates ? "search" : "encode")
        << "\n";
  }
  out << "search_final = " << r.final_search << "\n";
  // Leading-digit rounding of both totals, the way order-of-magnitude
  // estimates are usually quoted; the ratio of the rounded totals differs
  // from the exact speedup.
  const double rt = leading_digit_value(r.traditional);
  const double rh = leading_digit_value(r.hierarchical);
  char rounded[64];
  std::snprintf(rounded, sizeof rounded, "%.3g", rh == 0.0 ? 0.0 : rt / rh);
  out << "traditional_leading_digit = " << leading_digit(r.traditional) << "\n";
  out << "hierarchical_leading_digit = " << leading_digit(r.hierarchical) << "\n";
  out << "speedup_leading_digit = " << rounded << "\n";
  return out.str();
}

}  // namespace hiercascade
