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

// Training objectives for per-level embedding projections: dot-product
// similarity, in-batch bidirectional contrastive loss per level, the sum over
// levels, and the bilinear matching scorer used for re-ranking. Every loss
// returns closed-form gradients; finite_diff_grad is the oracle they are
// checked against.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace hiercascade {

/// Affine early-output projection for one level and one side:
/// out = weight * raw + bias.
struct EolProjection {
  std::size_t level = 0;
  Eigen::MatrixXd weight;  // out_dim x in_dim
  Eigen::VectorXd bias;    // out_dim

  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }

  static EolProjection zeros(std::size_t level, std::size_t out_dim, std::size_t in_dim);
};

/// Query-side and gallery-side projections of one level.
struct ProjectionPair {
  EolProjection query;
  EolProjection gallery;
};

/// n paired raw vectors as rows; row i of `queries` matches row i of `galleries`.
struct PairBatch {
  Eigen::MatrixXd queries;
  Eigen::MatrixXd galleries;

  std::size_t size() const { return static_cast<std::size_t>(queries.rows()); }
};

/// Bilinear matching scorer: p(q, g) = sigmoid(q^T W g + b).
struct VlmScorer {
  Eigen::MatrixXd weight;
  double bias = 0.0;

  static VlmScorer zeros(std::size_t dim);
};

Eigen::VectorXd project_eol(const EolProjection& p, const Eigen::VectorXd& raw);
/// Projects every row of `rows` (n x in_dim) to an n x out_dim matrix.
Eigen::MatrixXd project_rows(const EolProjection& p, const Eigen::MatrixXd& rows);

double similarity(std::span<const double> a, std::span<const double> b);
double similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Max-shifted softmax of `sims`.
std::vector<double> softmax(std::span<const double> sims);
/// Probability of `target_index` under softmax(sims). Throws IndexOutOfRange.
double in_batch_softmax(std::span<const double> sims, std::size_t target_index);

struct SimilarityLoss {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // d loss / d S
};

/// Bidirectional in-batch cross-entropy for an n x n similarity matrix whose
/// diagonal holds the matched pairs; mean over the batch. Throws
/// DegenerateBatch when n < 2.
SimilarityLoss contrastive_loss(const Eigen::MatrixXd& sims);

struct ProjectionGrad {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct LevelLoss {
  double loss = 0.0;
  ProjectionGrad query;
  ProjectionGrad gallery;
};

LevelLoss retrieval_loss_level(const PairBatch& batch, const ProjectionPair& projections);

struct HrlLoss {
  double loss = 0.0;
  std::vector<double> level_losses;
  std::vector<LevelLoss> levels;  // per-level gradients
};

HrlLoss hrl_loss(const PairBatch& batch, std::span<const ProjectionPair> projections);

double vlm_logit(const VlmScorer& scorer, const Eigen::VectorXd& q, const Eigen::VectorXd& g);
/// Always strictly inside (0, 1), even for saturated logits.
double vlm_score(const VlmScorer& scorer, const Eigen::VectorXd& q, const Eigen::VectorXd& g);

struct VlmPair {
  Eigen::VectorXd query;
  Eigen::VectorXd gallery;
  int label = 0;
};

struct VlmLoss {
  double loss = 0.0;
  Eigen::MatrixXd weight_grad;
  double bias_grad = 0.0;
};

/// Mean binary cross-entropy evaluated from the logit. Throws EmptyInput.
VlmLoss vlm_loss(const VlmScorer& scorer, std::span<const VlmPair> pairs);

/// Positives (i, i) plus one negative (i, (i + 1) mod n) per row.
std::vector<VlmPair> make_vlm_pairs(const Eigen::MatrixXd& queries,
                                    const Eigen::MatrixXd& galleries);

using FlatLoss = std::function<double(std::span<const double>)>;

/// Central differences, 64-bit. Throws NonFiniteLoss.
std::vector<double> finite_diff_grad(const FlatLoss& f, std::span<const double> point,
                                     double step);

/// |a - b| / max(1, |a|, |b|)
double relative_error(double a, double b);

// Parameter packing: weight (column-major) then bias, query side before
// gallery side, level order.
std::vector<double> flatten(std::span<const ProjectionPair> projections);
std::vector<ProjectionPair> unflatten(std::span<const ProjectionPair> shape,
                                      std::span<const double> flat);
std::vector<double> flatten(std::span<const LevelLoss> grads);
std::vector<double> flatten(const VlmScorer& scorer);
VlmScorer unflatten_scorer(std::size_t dim, std::span<const double> flat);

}  // namespace hiercascade
