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

#include "hiercascade/schedule.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "hiercascade/errors.hpp"

namespace hiercascade {
namespace {

// kFullPool compares above every finite pool.
std::uint64_t pool_rank(std::uint32_t pool) {
  return pool == kFullPool ? UINT64_MAX : pool;
}

}  // namespace

HierSchedule::HierSchedule(std::vector<std::uint32_t> dims, std::vector<std::uint32_t> pools)
    : dims_(std::move(dims)), pools_(std::move(pools)) {
  if (dims_.empty()) {
    throw Error(ErrorCode::kInvalidSchedule, "schedule needs at least one level");
  }
  if (pools_.size() != dims_.size()) {
    throw Error(ErrorCode::kInvalidSchedule,
                "dims has " + std::to_string(dims_.size()) + " levels but pools has " +
                    std::to_string(pools_.size()));
  }
  for (std::size_t l = 0; l < dims_.size(); ++l) {
    if (dims_[l] == 0) {
      throw Error(ErrorCode::kInvalidSchedule, "dim at level " + std::to_string(l) + " is zero");
    }
    if (l + 1 < dims_.size() && dims_[l] >= dims_[l + 1]) {
      throw Error(ErrorCode::kInvalidSchedule,
                  "dims must be strictly increasing: " + to_string());
    }
    if (l + 1 < pools_.size() && pool_rank(pools_[l]) < pool_rank(pools_[l + 1])) {
      throw Error(ErrorCode::kInvalidSchedule, "pools must be non-increasing: " + to_string());
    }
  }
}

HierSchedule HierSchedule::unpruned(std::vector<std::uint32_t> dims) {
  std::vector<std::uint32_t> pools(dims.size(), kFullPool);
  return HierSchedule(std::move(dims), std::move(pools));
}

std::size_t HierSchedule::effective_pool(std::size_t level, std::size_t current_pool) const {
  const std::uint32_t k = pools_.at(level);
  if (k == kFullPool) return current_pool;
  return std::min<std::size_t>(k, current_pool);
}

HierSchedule HierSchedule::with_pools(std::vector<std::uint32_t> pools) const {
  return HierSchedule(dims_, std::move(pools));
}

std::string HierSchedule::to_string() const {
  std::ostringstream out;
  out << "dims=[";
  for (std::size_t l = 0; l < dims_.size(); ++l) out << (l ? "," : "") << dims_[l];
  out << "] pools=[";
  for (std::size_t l = 0; l < pools_.size(); ++l) out << (l ? "," : "") << pools_[l];
  out << "]";
  return out.str();
}

std::vector<std::uint64_t> parse_uint_list(const std::string& text) {
  std::vector<std::uint64_t> values;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    token.erase(0, token.find_first_not_of(" \t"));
    token.erase(token.find_last_not_of(" \t") + 1);
    if (token.empty()) throw Error(ErrorCode::kInvalidArgument, "empty entry in '" + text + "'");
    std::uint64_t value = 0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc() || ptr != end) {
      // Allow 1e9-style integral values.
      double real = 0.0;
      auto [rptr, rec] = std::from_chars(token.data(), end, real);
      if (rec != std::errc() || rptr != end || !(real >= 0.0) || real > 9007199254740992.0 ||
          std::floor(real) != real) {
        throw Error(ErrorCode::kInvalidArgument, "not a non-negative integer: '" + token + "'");
      }
      value = static_cast<std::uint64_t>(real);
    }
    values.push_back(value);
  }
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "empty list");
  return values;
}

}  // namespace hiercascade
