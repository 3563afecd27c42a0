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

#include "otalign/random.hpp"

#include <cmath>
#include <numbers>

#include "otalign/errors.hpp"

namespace otalign {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t derive_key(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(parent ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace

Rng::Rng(Seed seed, std::uint64_t stream)
    : key_(derive_key(splitmix64(seed.value), stream)), engine_(key_) {}

Rng Rng::substream(std::uint64_t index) const {
  Rng child(Seed{0});
  child.key_ = derive_key(key_, index);
  child.engine_.seed(child.key_);
  return child;
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  require(n > 0, "Rng::below: empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

Matrix fan_in_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  require(cols > 0, "fan_in_uniform: fan-in must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(cols));
  Matrix w(rows, cols);
  for (double& x : w.data()) x = rng.uniform(-bound, bound);
  return w;
}

}  // namespace otalign
