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

#include "hiercascade/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "hiercascade/errors.hpp"
#include "hiercascade/synth.hpp"

namespace hiercascade {
namespace {

// Seeded fixed partition of [0, n) into batches of `batch` rows; a trailing
// remainder of one row joins the previous batch.
std::vector<std::vector<std::size_t>> partition(std::size_t n, std::size_t batch,
                                                std::mt19937_64* rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (rng) std::shuffle(order.begin(), order.end(), *rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t begin = 0; begin < n; begin += batch) {
    const std::size_t end = std::min(n, begin + batch);
    if (end - begin < 2 && !out.empty()) {
      out.back().insert(out.back().end(), order.begin() + static_cast<std::ptrdiff_t>(begin),
                        order.begin() + static_cast<std::ptrdiff_t>(end));
    } else {
      out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                       order.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  return out;
}

std::vector<PairBatch> make_batches(const Eigen::MatrixXd& q, const Eigen::MatrixXd& g,
                                    const std::vector<std::vector<std::size_t>>& parts) {
  std::vector<PairBatch> batches;
  batches.reserve(parts.size());
  for (const auto& rows : parts) {
    PairBatch b;
    b.queries.resize(static_cast<Eigen::Index>(rows.size()), q.cols());
    b.galleries.resize(static_cast<Eigen::Index>(rows.size()), g.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      b.queries.row(static_cast<Eigen::Index>(i)) = q.row(static_cast<Eigen::Index>(rows[i]));
      b.galleries.row(static_cast<Eigen::Index>(i)) = g.row(static_cast<Eigen::Index>(rows[i]));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

void check_pairs(std::span<const RawItem> queries, std::span<const RawItem> galleries,
                 std::size_t batch) {
  if (batch < 2) throw Error(ErrorCode::kDegenerateBatch, "batch size must be >= 2");
  if (queries.size() != galleries.size()) {
    throw Error(ErrorCode::kDimMismatch, "query and gallery counts differ");
  }
  if (queries.size() < batch) {
    throw Error(ErrorCode::kDegenerateBatch, "dataset smaller than one batch");
  }
}

struct Objective {
  double loss = 0.0;
  std::vector<double> grad;
};

Objective mean_objective(const std::vector<PairBatch>& batches,
                         std::span<const ProjectionPair> projections) {
  Objective out;
  for (const PairBatch& b : batches) {
    const HrlLoss l = hrl_loss(b, projections);
    const std::vector<double> g = flatten(std::span<const LevelLoss>(l.levels));
    if (out.grad.empty()) out.grad.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) out.grad[i] += g[i];
    out.loss += l.loss;
  }
  const double inv = 1.0 / static_cast<double>(batches.size());
  out.loss *= inv;
  for (double& v : out.grad) v *= inv;
  return out;
}

void check_finite_loss(double loss, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::kDivergenceDetected, "loss is not finite at epoch " +
                                                    std::to_string(epoch));
  }
}

// Parameters are stored as float; anything outside that range cannot be saved.
void check_finite_params(std::span<const double> params, std::size_t epoch) {
  constexpr double kLimit = std::numeric_limits<float>::max();
  for (double v : params) {
    if (!(std::abs(v) <= kLimit)) {
      throw Error(ErrorCode::kDivergenceDetected, "parameters overflow at epoch " +
                                                      std::to_string(epoch));
    }
  }
}

Eigen::MatrixXd final_level(const Eigen::MatrixXd& rows, const EolProjection& p) {
  return project_rows(p, rows);
}

}  // namespace

std::vector<ProjectionPair> init_projections(const HierSchedule& schedule, std::size_t d_in,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d_in)));
  std::vector<ProjectionPair> out;
  for (std::size_t l = 0; l < schedule.levels(); ++l) {
    ProjectionPair p{EolProjection::zeros(l, schedule.dim(l), d_in),
                     EolProjection::zeros(l, schedule.dim(l), d_in)};
    for (EolProjection* side : {&p.query, &p.gallery}) {
      for (Eigen::Index c = 0; c < side->weight.cols(); ++c) {
        for (Eigen::Index r = 0; r < side->weight.rows(); ++r) side->weight(r, c) = normal(rng);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

double dataset_objective(std::span<const RawItem> queries, std::span<const RawItem> galleries,
                         std::span<const ProjectionPair> projections, std::size_t batch) {
  check_pairs(queries, galleries, batch);
  const auto batches =
      make_batches(to_matrix(queries), to_matrix(galleries), partition(queries.size(), batch, nullptr));
  return mean_objective(batches, projections).loss;
}

TrainResult train_eol(std::span<const RawItem> queries, std::span<const RawItem> galleries,
                      const TrainConfig& cfg, const HierSchedule& schedule) {
  check_pairs(queries, galleries, cfg.batch);
  if (!(cfg.learning_rate >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be >= 0");
  }
  const Eigen::MatrixXd q = to_matrix(queries);
  const Eigen::MatrixXd g = to_matrix(galleries);
  if (q.cols() != g.cols()) throw Error(ErrorCode::kDimMismatch, "query/gallery raw dims differ");

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  result.projections = init_projections(schedule, static_cast<std::size_t>(q.cols()), rng());
  const auto batches = make_batches(q, g, partition(queries.size(), cfg.batch, &rng));

  std::vector<double> params = flatten(std::span<const ProjectionPair>(result.projections));
  Objective obj = mean_objective(batches, result.projections);
  check_finite_loss(obj.loss, 0);
  result.history.push_back(obj.loss);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * obj.grad[i];
    check_finite_params(params, epoch);
    result.projections = unflatten(std::span<const ProjectionPair>(result.projections), params);
    obj = mean_objective(batches, result.projections);
    check_finite_loss(obj.loss, epoch);
    result.history.push_back(obj.loss);
  }

  if (cfg.train_vlm) {
    const EolProjection& qp = result.projections.back().query;
    const EolProjection& gp = result.projections.back().gallery;
    std::vector<VlmPair> pairs;
    for (const PairBatch& b : batches) {
      auto part = make_vlm_pairs(final_level(b.queries, qp), final_level(b.galleries, gp));
      pairs.insert(pairs.end(), part.begin(), part.end());
    }
    VlmScorer scorer = VlmScorer::zeros(schedule.final_dim());
    VlmLoss vl = vlm_loss(scorer, pairs);
    result.vlm_history.push_back(vl.loss);
    for (std::size_t epoch = 1; epoch <= cfg.vlm_epochs; ++epoch) {
      scorer.weight -= cfg.vlm_learning_rate * vl.weight_grad;
      scorer.bias -= cfg.vlm_learning_rate * vl.bias_grad;
      check_finite_params(flatten(scorer), epoch);
      vl = vlm_loss(scorer, pairs);
      check_finite_loss(vl.loss, epoch);
      result.vlm_history.push_back(vl.loss);
    }
    result.scorer = std::move(scorer);
  }
  return result;
}

std::vector<HierEmbedding> encode_corpus(std::span<const EolProjection> projections,
                                         std::span<const RawItem> items,
                                         const HierSchedule& schedule) {
  if (projections.size() != schedule.levels()) {
    throw Error(ErrorCode::kDimMismatch, "need one projection per level");
  }
  for (std::size_t l = 0; l < schedule.levels(); ++l) {
    if (projections[l].out_dim() != schedule.dim(l)) {
      throw Error(ErrorCode::kDimMismatch, "projection " + std::to_string(l) + " outputs " +
                                               std::to_string(projections[l].out_dim()) +
                                               ", schedule wants " +
                                               std::to_string(schedule.dim(l)));
    }
  }
  std::vector<HierEmbedding> out(items.size());
  constexpr std::size_t kChunk = 4096;
  for (std::size_t begin = 0; begin < items.size(); begin += kChunk) {
    const auto chunk = items.subspan(begin, std::min(kChunk, items.size() - begin));
    const Eigen::MatrixXd rows = to_matrix(chunk);
    for (std::size_t l = 0; l < schedule.levels(); ++l) {
      const Eigen::MatrixXd projected = project_rows(projections[l], rows);
      for (std::size_t i = 0; i < chunk.size(); ++i) {
        HierEmbedding& e = out[begin + i];
        e.id = chunk[i].id;
        e.levels.resize(schedule.levels());
        auto& v = e.levels[l];
        v.resize(schedule.dim(l));
        for (std::size_t j = 0; j < v.size(); ++j) {
          v[j] = static_cast<float>(
              projected(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
      }
    }
  }
  return out;
}

std::vector<EolProjection> query_side(std::span<const ProjectionPair> projections) {
  std::vector<EolProjection> out;
  for (const auto& p : projections) out.push_back(p.query);
  return out;
}

std::vector<EolProjection> gallery_side(std::span<const ProjectionPair> projections) {
  std::vector<EolProjection> out;
  for (const auto& p : projections) out.push_back(p.gallery);
  return out;
}

GalleryStore projections_to_store(std::span<const EolProjection> projections,
                                  const HierSchedule& schedule) {
  if (projections.size() != schedule.levels()) {
    throw Error(ErrorCode::kDimMismatch, "need one projection per level");
  }
  const std::size_t d_in = projections.front().in_dim();
  std::vector<std::uint64_t> ids(d_in + 1);
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<std::vector<float>> blocks(schedule.levels());
  for (std::size_t l = 0; l < schedule.levels(); ++l) {
    const EolProjection& p = projections[l];
    if (p.in_dim() != d_in || p.out_dim() != schedule.dim(l)) {
      throw Error(ErrorCode::kDimMismatch, "projection " + std::to_string(l) + " shape");
    }
    auto& block = blocks[l];
    block.reserve((d_in + 1) * p.out_dim());
    for (std::size_t r = 0; r < d_in; ++r) {
      for (std::size_t j = 0; j < p.out_dim(); ++j) {
        block.push_back(static_cast<float>(
            p.weight(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r))));
      }
    }
    for (std::size_t j = 0; j < p.out_dim(); ++j) {
      block.push_back(static_cast<float>(p.bias[static_cast<Eigen::Index>(j)]));
    }
  }
  return GalleryStore::from_blocks(schedule, std::move(ids), std::move(blocks),
                                   static_cast<std::uint32_t>(d_in));
}

std::vector<EolProjection> projections_from_store(const GalleryStore& store) {
  const std::size_t d_in = store.d_raw();
  if (d_in == 0 || store.size() != d_in + 1) {
    throw Error(ErrorCode::kScheduleMismatch, "not a projection store");
  }
  std::vector<EolProjection> out;
  for (std::size_t l = 0; l < store.schedule().levels(); ++l) {
    const std::size_t d = store.schedule().dim(l);
    EolProjection p = EolProjection::zeros(l, d, d_in);
    for (std::size_t r = 0; r < d_in; ++r) {
      const auto col = store.vector(l, store.position_of(r));
      for (std::size_t j = 0; j < d; ++j) {
        p.weight(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) = col[j];
      }
    }
    const auto bias = store.vector(l, store.position_of(d_in));
    for (std::size_t j = 0; j < d; ++j) p.bias[static_cast<Eigen::Index>(j)] = bias[j];
    out.push_back(std::move(p));
  }
  return out;
}

GalleryStore scorer_to_store(const VlmScorer& scorer) {
  const auto d = static_cast<std::size_t>(scorer.weight.rows());
  std::vector<std::uint64_t> ids(d + 1);
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<float> block;
  block.reserve((d + 1) * d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      block.push_back(static_cast<float>(
          scorer.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    }
  }
  block.push_back(static_cast<float>(scorer.bias));
  block.insert(block.end(), d - 1, 0.0f);
  std::vector<std::vector<float>> blocks;
  blocks.push_back(std::move(block));
  return GalleryStore::from_blocks(HierSchedule({static_cast<std::uint32_t>(d)}, {kFullPool}),
                                   std::move(ids), std::move(blocks));
}

VlmScorer scorer_from_store(const GalleryStore& store) {
  if (store.schedule().levels() != 1 || store.size() != store.schedule().dim(0) + 1u) {
    throw Error(ErrorCode::kScheduleMismatch, "not a scorer store");
  }
  const std::size_t d = store.schedule().dim(0);
  VlmScorer s = VlmScorer::zeros(d);
  for (std::size_t r = 0; r < d; ++r) {
    const auto row = store.vector(0, store.position_of(r));
    for (std::size_t c = 0; c < d; ++c) {
      s.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  s.bias = store.vector(0, store.position_of(d))[0];
  return s;
}

}  // namespace hiercascade
