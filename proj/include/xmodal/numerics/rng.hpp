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

#ifndef XMODAL_NUMERICS_RNG_HPP_
#define XMODAL_NUMERICS_RNG_HPP_

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace xmodal::numerics {

// Counter-based random stream (SplitMix64 over seed + position). The full
// state is the (seed, position) pair, so a stream can be persisted, replayed
// and forked without hidden engine state. All distributions are implemented
// here rather than through <random> so draws are identical across standard
// libraries.
class RngState {
 public:
  RngState() = default;
  explicit RngState(uint64_t seed, uint64_t position = 0)
      : seed_(seed), position_(position) {}

  uint64_t seed() const { return seed_; }
  uint64_t position() const { return position_; }

  uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  uint64_t uniform_int(uint64_t n);
  // Uniform integer in [lo, hi], both inclusive.
  int64_t uniform_range(int64_t lo, int64_t hi);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Number of trials up to and including the first success, support {1, 2, ...}.
  int64_t geometric(double p);
  // Index drawn with probability proportional to weights (nonnegative, nonzero sum).
  size_t categorical(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_int(i)]);
    }
  }

  // Independent child stream, a pure function of (seed, stream id); the parent
  // does not advance.
  RngState fork(uint64_t stream) const;

  friend bool operator==(const RngState&, const RngState&) = default;

 private:
  uint64_t seed_ = 0;
  uint64_t position_ = 0;
};

uint64_t mix64(uint64_t x);

}  // namespace xmodal::numerics

#endif  // XMODAL_NUMERICS_RNG_HPP_
