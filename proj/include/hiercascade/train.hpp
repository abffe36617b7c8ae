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
#include <vector>

#include "hiercascade/objectives.hpp"
#include "hiercascade/schedule.hpp"
#include "hiercascade/store.hpp"

namespace hiercascade {

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 50;
  std::size_t batch = 32;
  std::uint64_t seed = 7;
  /// Also fit a matching scorer on the final level after the projections.
  bool train_vlm = false;
  double vlm_learning_rate = 0.05;
  std::size_t vlm_epochs = 50;
};

struct TrainResult {
  std::vector<ProjectionPair> projections;  // one per level
  std::optional<VlmScorer> scorer;
  /// history[0] is the objective before the first step, history[e] after epoch e.
  std::vector<double> history;
  std::vector<double> vlm_history;
};

/// Seeded initial projections: weights N(0, 1/d_in), zero bias.
std::vector<ProjectionPair> init_projections(const HierSchedule& schedule, std::size_t d_in,
                                             std::uint64_t seed);

/// Mean hierarchical loss over the fixed batch partition of the dataset.
double dataset_objective(std::span<const RawItem> queries, std::span<const RawItem> galleries,
                         std::span<const ProjectionPair> projections, std::size_t batch);

/// Full-batch gradient descent on the summed per-level contrastive loss.
/// Row i of `queries` is paired with row i of `galleries`. Throws
/// DegenerateBatch, DimMismatch, DivergenceDetected.
TrainResult train_eol(std::span<const RawItem> queries, std::span<const RawItem> galleries,
                      const TrainConfig& cfg, const HierSchedule& schedule);

/// Level-wise projections of one side applied to raw items.
std::vector<HierEmbedding> encode_corpus(std::span<const EolProjection> projections,
                                         std::span<const RawItem> items,
                                         const HierSchedule& schedule);

std::vector<EolProjection> query_side(std::span<const ProjectionPair> projections);
std::vector<EolProjection> gallery_side(std::span<const ProjectionPair> projections);

// Projection and scorer files reuse the store format.
//   projections: schedule = the level schedule, d_raw = input dim, item r
//   (r < d_raw) holds column r of every level's weight, item d_raw the biases.
//   scorer: one level of dim d, item r (r < d) holds row r of W, item d holds
//   [b, 0, ...].
GalleryStore projections_to_store(std::span<const EolProjection> projections,
                                  const HierSchedule& schedule);
std::vector<EolProjection> projections_from_store(const GalleryStore& store);
GalleryStore scorer_to_store(const VlmScorer& scorer);
VlmScorer scorer_from_store(const GalleryStore& store);

}  // namespace hiercascade
