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

// Analytic retrieval-time model in abstract units.
//
//   flat:          layers * t_e + N * d_L * mul
//   hierarchical:  chunk * t_e
//                  + sum_{l < L} max(chunk * t_e, N_l * d_l * mul)
//                  + N_L * d_L * mul
//
// where chunk = chunk_layers. Each max() is an overlap window: the encoder
// produces the next early output while the current level is being searched.
// All arithmetic is exact unsigned 64-bit; overflow throws.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hiercascade {

struct CostParams {
  std::uint64_t t_e = 1000;
  std::uint64_t encoder_layers = 12;
  std::uint64_t unit_mul = 1;
  std::uint64_t gallery = 0;           // N
  std::vector<std::uint64_t> dims;     // d_l
  std::vector<std::uint64_t> counts;   // N_l, candidates scanned at level l
  std::uint64_t chunk_layers = 0;      // 0: encoder_layers / levels

  std::size_t levels() const { return dims.size(); }
  std::uint64_t chunk() const;
  /// Throws InvalidArgument.
  void validate() const;
};

struct WindowCost {
  std::uint64_t encode = 0;
  std::uint64_t search = 0;
  bool search_dominates = false;
  std::uint64_t cost() const { return search_dominates ? search : encode; }
};

struct CostReport {
  std::uint64_t traditional = 0;
  std::uint64_t hierarchical = 0;
  double speedup = 0.0;
  std::uint64_t first_encode = 0;
  std::vector<WindowCost> windows;  // levels 0..L-2
  std::uint64_t final_search = 0;
};

std::uint64_t traditional_cost(const CostParams& p);
CostReport hierarchical_cost(const CostParams& p);

/// Per-stage durations fed to the pipeline simulator. encode[l] produces the
/// level-l query vector; search[l] scans level l.
struct StageDurations {
  std::vector<std::uint64_t> encode;
  std::vector<std::uint64_t> search;
};

StageDurations analytic_durations(const CostParams& p);

/// Per-level mean search time (ns) over a batch of traces, with encode time
/// per chunk taken from the parameters.
struct CascadeTrace;
StageDurations measured_durations(const CostParams& p, std::span<const CascadeTrace> traces);

struct CriticalStage {
  std::string stage;  // "encode[l]" or "search[l]"
  std::uint64_t start = 0;
  std::uint64_t finish = 0;
};

struct PipelineResult {
  std::uint64_t makespan = 0;
  std::vector<CriticalStage> critical_path;
};

/// Discrete-event schedule with one encoder and one searcher. encode[l+1]
/// and search[l] start together once encode[l] and search[l-1] are both
/// done; search[l] also needs encode[l].
PipelineResult simulate_pipeline(const StageDurations& durations);

/// Flat `key = value` lines.
std::string format_cost_report(const CostParams& p, const CostReport& r);

}  // namespace hiercascade
