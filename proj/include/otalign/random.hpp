// Copyright 2026 The otalign Authors.
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

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "otalign/matrix.hpp"

namespace otalign {

struct Seed {
  std::uint64_t value = 0;
};

// Fixed sub-stream indices. Each consumer of randomness owns one so that,
// for example, changing the amount of dropout noise never shifts the data
// generator.
namespace streams {
inline constexpr std::uint64_t kPrototypes = 1;
inline constexpr std::uint64_t kSamples = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kShuffle = 4;
inline constexpr std::uint64_t kDropout = 5;
inline constexpr std::uint64_t kGradcheck = 6;
}  // namespace streams

// Deterministic generator: a 64-bit Mersenne twister whose state is derived
// from (seed, stream) by SplitMix64 mixing. The float transforms are written
// out here rather than taken from <random> distributions, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(Seed seed, std::uint64_t stream = 0);

  // Independent generator for sub-stream `index` of this generator's key.
  Rng substream(std::uint64_t index) const;

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller (no cached second draw).
  double normal();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// rows x cols weights drawn uniformly from [-sqrt(6 / fan_in), sqrt(6 / fan_in)]
// with fan_in = cols.
Matrix fan_in_uniform(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace otalign
