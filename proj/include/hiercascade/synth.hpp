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
#include <vector>

#include <Eigen/Dense>

#include "hiercascade/store.hpp"

namespace hiercascade {

/// Latent-factor pair generator: query_i = A_q z_i + noise * e,
/// gallery_i = A_g z_i + noise * e', with e, e' standard normal, z_i uniform
/// on the sphere of radius sqrt(latent), and A orthonormal up to scale.
struct SynthConfig {
  std::size_t pairs = 1000;
  std::size_t d_raw = 64;
  std::size_t latent = 16;
  double noise = 0.1;
  std::uint64_t seed = 7;
  /// Use one mixing matrix for both sides (A_q == A_g).
  bool same_view = false;
  /// First id assigned; item i gets id first_id + i on both sides.
  std::uint64_t first_id = 0;
};

struct SynthData {
  std::vector<RawItem> queries;
  std::vector<RawItem> galleries;
  /// truth[i] = gallery id matched by query i.
  std::vector<std::uint64_t> truth;
};

/// Deterministic in the config. Components are rounded to float on creation
/// so in-memory and on-disk datasets agree bitwise.
SynthData generate_pairs(const SynthConfig& cfg);

/// Rows of raw vectors as a double matrix (n x d_raw).
Eigen::MatrixXd to_matrix(std::span<const RawItem> items);

}  // namespace hiercascade
