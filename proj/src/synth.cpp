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

#include "hiercascade/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hiercascade/errors.hpp"

namespace hiercascade {
namespace {

// Random mixing with orthonormal columns (or rows when latent > d_raw),
// scaled so each raw coordinate has unit variance. Well-conditioned, so the
// two views differ by a rotation rather than an arbitrary linear map.
Eigen::MatrixXd random_mixing(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = normal(rng);
  }
  const double scale =
      std::sqrt(std::max(1.0, static_cast<double>(rows) / static_cast<double>(cols)));
  if (rows >= cols) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    return scale * (qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols()));
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g.transpose());
  return scale *
         (qr.householderQ() * Eigen::MatrixXd::Identity(g.cols(), g.rows())).transpose();
}

RawItem make_view(const Eigen::MatrixXd& mixing, const Eigen::VectorXd& z, double noise,
                  std::mt19937_64& rng, std::uint64_t id) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::VectorXd clean = mixing * z;
  RawItem item;
  item.id = id;
  item.raw.resize(static_cast<std::size_t>(clean.size()));
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    const double eps = noise > 0.0 ? noise * normal(rng) : 0.0;
    item.raw[static_cast<std::size_t>(i)] = static_cast<float>(clean[i] + eps);
  }
  return item;
}

}  // namespace

SynthData generate_pairs(const SynthConfig& cfg) {
  if (cfg.d_raw == 0 || cfg.latent == 0) {
    throw Error(ErrorCode::kInvalidArgument, "d_raw and latent must be positive");
  }
  if (!(cfg.noise >= 0.0) || !std::isfinite(cfg.noise)) {
    throw Error(ErrorCode::kInvalidArgument, "noise must be finite and >= 0");
  }

  std::mt19937_64 rng(cfg.seed);
  const Eigen::MatrixXd a_query = random_mixing(rng, cfg.d_raw, cfg.latent);
  const Eigen::MatrixXd a_gallery =
      cfg.same_view ? a_query : random_mixing(rng, cfg.d_raw, cfg.latent);

  // Latent factors are uniform on the sphere of radius sqrt(latent): every
  // point is then the unique maximizer of its own inner product.
  std::normal_distribution<double> normal(0.0, 1.0);
  const double radius = std::sqrt(static_cast<double>(cfg.latent));

  SynthData data;
  data.queries.reserve(cfg.pairs);
  data.galleries.reserve(cfg.pairs);
  data.truth.reserve(cfg.pairs);
  Eigen::VectorXd z(static_cast<Eigen::Index>(cfg.latent));
  for (std::size_t i = 0; i < cfg.pairs; ++i) {
    double norm = 0.0;
    do {
      for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = normal(rng);
      norm = z.norm();
    } while (norm == 0.0);
    z *= radius / norm;
    const std::uint64_t id = cfg.first_id + i;
    data.queries.push_back(make_view(a_query, z, cfg.noise, rng, id));
    data.galleries.push_back(make_view(a_gallery, z, cfg.noise, rng, id));
    data.truth.push_back(id);
  }
  return data;
}

Eigen::MatrixXd to_matrix(std::span<const RawItem> items) {
  if (items.empty()) return {};
  const std::size_t d = items.front().raw.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(items.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].raw.size() != d) {
      throw Error(ErrorCode::kDimMismatch, "raw item " + std::to_string(items[i].id));
    }
    for (std::size_t j = 0; j < d; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = items[i].raw[j];
    }
  }
  return m;
}

}  // namespace hiercascade
