// Copyright 2026 The xmodal Authors.
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

#include "xmodal/numerics/rng.hpp"

#include <cmath>
#include <numbers>

#include "xmodal/errors.hpp"

namespace xmodal::numerics {

namespace {
constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}  // namespace

uint64_t mix64(uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t RngState::next_u64() {
  ++position_;
  return mix64(seed_ + position_ * kGolden);
}

double RngState::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t RngState::uniform_int(uint64_t n) {
  if (n == 0) throw ContractError("uniform_int: empty range");
  // Rejection on the top of the range keeps the draw unbiased.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

int64_t RngState::uniform_range(int64_t lo, int64_t hi) {
  if (hi < lo) throw ContractError("uniform_range: hi < lo");
  return lo + static_cast<int64_t>(uniform_int(static_cast<uint64_t>(hi - lo) + 1));
}

double RngState::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int64_t RngState::geometric(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ContractError("geometric: p outside (0, 1]");
  if (p == 1.0) return 1;
  double u = uniform();
  while (u <= 0.0) u = uniform();
  return static_cast<int64_t>(std::floor(std::log(u) / std::log1p(-p))) + 1;
}

size_t RngState::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("categorical: bad weight");
    total += w;
  }
  if (total <= 0.0) throw ContractError("categorical: weights sum to zero");
  const double target = uniform() * total;
  double acc = 0.0;
  size_t last_positive = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

RngState RngState::fork(uint64_t stream) const {
  return RngState(mix64(seed_ ^ mix64(stream + kGolden)), 0);
}

}  // namespace xmodal::numerics
