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

#include "hiercascade/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hiercascade/errors.hpp"

namespace hiercascade {
namespace {

void require_dim(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw Error(ErrorCode::kDimMismatch, std::string(what) + ": expected " +
                                             std::to_string(expected) + ", got " +
                                             std::to_string(got));
  }
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

EolProjection EolProjection::zeros(std::size_t level, std::size_t out_dim, std::size_t in_dim) {
  EolProjection p;
  p.level = level;
  p.weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out_dim),
                                   static_cast<Eigen::Index>(in_dim));
  p.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out_dim));
  return p;
}

VlmScorer VlmScorer::zeros(std::size_t dim) {
  VlmScorer s;
  s.weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  return s;
}

Eigen::VectorXd project_eol(const EolProjection& p, const Eigen::VectorXd& raw) {
  require_dim(p.in_dim(), static_cast<std::size_t>(raw.size()), "projection input");
  return p.weight * raw + p.bias;
}

Eigen::MatrixXd project_rows(const EolProjection& p, const Eigen::MatrixXd& rows) {
  require_dim(p.in_dim(), static_cast<std::size_t>(rows.cols()), "projection input");
  Eigen::MatrixXd out = rows * p.weight.transpose();
  out.rowwise() += p.bias.transpose();
  return out;
}

double similarity(std::span<const double> a, std::span<const double> b) {
  require_dim(a.size(), b.size(), "similarity");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return similarity(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                    std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

std::vector<double> softmax(std::span<const double> sims) {
  if (sims.empty()) throw Error(ErrorCode::kEmptyInput, "softmax of empty vector");
  const double max = *std::max_element(sims.begin(), sims.end());
  std::vector<double> out(sims.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    out[i] = std::exp(sims[i] - max);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double in_batch_softmax(std::span<const double> sims, std::size_t target_index) {
  if (target_index >= sims.size()) {
    throw Error(ErrorCode::kIndexOutOfRange, std::to_string(target_index) + " >= " +
                                                 std::to_string(sims.size()));
  }
  const double max = *std::max_element(sims.begin(), sims.end());
  double sum = 0.0;
  for (double s : sims) sum += std::exp(s - max);
  return std::exp(sims[target_index] - max) / sum;
}

SimilarityLoss contrastive_loss(const Eigen::MatrixXd& sims) {
  const Eigen::Index n = sims.rows();
  if (n < 2) throw Error(ErrorCode::kDegenerateBatch, "batch of " + std::to_string(n));
  require_dim(static_cast<std::size_t>(n), static_cast<std::size_t>(sims.cols()),
              "similarity matrix columns");

  // Query-to-gallery softmax over each row, gallery-to-query over each column.
  const Eigen::VectorXd row_max = sims.rowwise().maxCoeff();
  Eigen::MatrixXd row_p = (sims.colwise() - row_max).array().exp().matrix();
  const Eigen::VectorXd row_sum = row_p.rowwise().sum();
  row_p.array().colwise() /= row_sum.array();

  const Eigen::RowVectorXd col_max = sims.colwise().maxCoeff();
  Eigen::MatrixXd col_p = (sims.rowwise() - col_max).array().exp().matrix();
  const Eigen::RowVectorXd col_sum = col_p.colwise().sum();
  col_p.array().rowwise() /= col_sum.array();

  // Each cross-entropy term is (max - target) + log(sum), both non-negative.
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += (row_max[i] - sims(i, i)) + std::log(row_sum[i]);
    total += (col_max[i] - sims(i, i)) + std::log(col_sum[i]);
  }

  const double scale = 0.5 / static_cast<double>(n);
  SimilarityLoss out;
  out.loss = scale * total;
  out.grad = scale * (row_p + col_p);
  out.grad.diagonal().array() -= 2.0 * scale;
  return out;
}

LevelLoss retrieval_loss_level(const PairBatch& batch, const ProjectionPair& projections) {
  const std::size_t n = batch.size();
  if (n < 2) throw Error(ErrorCode::kDegenerateBatch, "batch of " + std::to_string(n));
  require_dim(n, static_cast<std::size_t>(batch.galleries.rows()), "gallery batch size");
  require_dim(projections.query.out_dim(), projections.gallery.out_dim(),
              "gallery projection output");

  const Eigen::MatrixXd u = project_rows(projections.query, batch.queries);
  const Eigen::MatrixXd v = project_rows(projections.gallery, batch.galleries);
  const SimilarityLoss sl = contrastive_loss(u * v.transpose());

  const Eigen::MatrixXd du = sl.grad * v;
  const Eigen::MatrixXd dv = sl.grad.transpose() * u;

  LevelLoss out;
  out.loss = sl.loss;
  out.query.weight = du.transpose() * batch.queries;
  out.query.bias = du.colwise().sum().transpose();
  out.gallery.weight = dv.transpose() * batch.galleries;
  out.gallery.bias = dv.colwise().sum().transpose();
  return out;
}

HrlLoss hrl_loss(const PairBatch& batch, std::span<const ProjectionPair> projections) {
  if (projections.empty()) throw Error(ErrorCode::kEmptyInput, "no levels");
  HrlLoss out;
  out.levels.reserve(projections.size());
  for (const ProjectionPair& level : projections) {
    out.levels.push_back(retrieval_loss_level(batch, level));
    out.level_losses.push_back(out.levels.back().loss);
    out.loss += out.levels.back().loss;
  }
  return out;
}

double vlm_logit(const VlmScorer& scorer, const Eigen::VectorXd& q, const Eigen::VectorXd& g) {
  require_dim(static_cast<std::size_t>(scorer.weight.rows()), static_cast<std::size_t>(q.size()),
              "scorer query");
  require_dim(static_cast<std::size_t>(scorer.weight.cols()), static_cast<std::size_t>(g.size()),
              "scorer gallery");
  return q.dot(scorer.weight * g) + scorer.bias;
}

double vlm_score(const VlmScorer& scorer, const Eigen::VectorXd& q, const Eigen::VectorXd& g) {
  const double p = stable_sigmoid(vlm_logit(scorer, q, g));
  return std::clamp(p, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

VlmLoss vlm_loss(const VlmScorer& scorer, std::span<const VlmPair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "no labeled pairs");
  VlmLoss out;
  out.weight_grad = Eigen::MatrixXd::Zero(scorer.weight.rows(), scorer.weight.cols());
  for (const VlmPair& pair : pairs) {
    const double z = vlm_logit(scorer, pair.query, pair.gallery);
    const double y = pair.label ? 1.0 : 0.0;
    out.loss += softplus(z) - y * z;
    const double dz = stable_sigmoid(z) - y;
    out.weight_grad.noalias() += dz * pair.query * pair.gallery.transpose();
    out.bias_grad += dz;
  }
  const double inv = 1.0 / static_cast<double>(pairs.size());
  out.loss *= inv;
  out.weight_grad *= inv;
  out.bias_grad *= inv;
  return out;
}

std::vector<VlmPair> make_vlm_pairs(const Eigen::MatrixXd& queries,
                                    const Eigen::MatrixXd& galleries) {
  const Eigen::Index n = queries.rows();
  if (n < 2) throw Error(ErrorCode::kDegenerateBatch, "batch of " + std::to_string(n));
  std::vector<VlmPair> pairs;
  pairs.reserve(static_cast<std::size_t>(2 * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    pairs.push_back({queries.row(i).transpose(), galleries.row(i).transpose(), 1});
    pairs.push_back({queries.row(i).transpose(), galleries.row((i + 1) % n).transpose(), 0});
  }
  return pairs;
}

std::vector<double> finite_diff_grad(const FlatLoss& f, std::span<const double> point,
                                     double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::kInvalidArgument, "step must be positive");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = f(x);
    x[i] = orig - step;
    const double down = f(x);
    x[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorCode::kNonFiniteLoss, "coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

namespace {

void append(std::vector<double>& out, const Eigen::MatrixXd& m) {
  out.insert(out.end(), m.data(), m.data() + m.size());
}
void append(std::vector<double>& out, const Eigen::VectorXd& v) {
  out.insert(out.end(), v.data(), v.data() + v.size());
}

void take(std::span<const double>& flat, Eigen::MatrixXd& m) {
  const auto n = static_cast<std::size_t>(m.size());
  if (flat.size() < n) throw Error(ErrorCode::kDimMismatch, "flat parameter vector too short");
  std::copy_n(flat.begin(), n, m.data());
  flat = flat.subspan(n);
}
void take(std::span<const double>& flat, Eigen::VectorXd& v) {
  const auto n = static_cast<std::size_t>(v.size());
  if (flat.size() < n) throw Error(ErrorCode::kDimMismatch, "flat parameter vector too short");
  std::copy_n(flat.begin(), n, v.data());
  flat = flat.subspan(n);
}

}  // namespace

std::vector<double> flatten(std::span<const ProjectionPair> projections) {
  std::vector<double> out;
  for (const ProjectionPair& p : projections) {
    append(out, p.query.weight);
    append(out, p.query.bias);
    append(out, p.gallery.weight);
    append(out, p.gallery.bias);
  }
  return out;
}

std::vector<ProjectionPair> unflatten(std::span<const ProjectionPair> shape,
                                      std::span<const double> flat) {
  std::vector<ProjectionPair> out(shape.begin(), shape.end());
  for (ProjectionPair& p : out) {
    take(flat, p.query.weight);
    take(flat, p.query.bias);
    take(flat, p.gallery.weight);
    take(flat, p.gallery.bias);
  }
  if (!flat.empty()) throw Error(ErrorCode::kDimMismatch, "flat parameter vector too long");
  return out;
}

std::vector<double> flatten(std::span<const LevelLoss> grads) {
  std::vector<double> out;
  for (const LevelLoss& g : grads) {
    append(out, g.query.weight);
    append(out, g.query.bias);
    append(out, g.gallery.weight);
    append(out, g.gallery.bias);
  }
  return out;
}

std::vector<double> flatten(const VlmScorer& scorer) {
  std::vector<double> out;
  append(out, scorer.weight);
  out.push_back(scorer.bias);
  return out;
}

VlmScorer unflatten_scorer(std::size_t dim, std::span<const double> flat) {
  VlmScorer s = VlmScorer::zeros(dim);
  take(flat, s.weight);
  if (flat.size() != 1) throw Error(ErrorCode::kDimMismatch, "scorer parameter count");
  s.bias = flat[0];
  return s;
}

}  // namespace hiercascade
