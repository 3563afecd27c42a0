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

#include "otalign/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "otalign/errors.hpp"

namespace otalign {

double logsumexp(std::span<const double> v) {
  require(!v.empty(), "logsumexp: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> v) {
  require(!v.empty(), "softmax: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

std::vector<double> log_softmax(std::span<const double> v) {
  const double lse = logsumexp(v);
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x -= lse;
  return out;
}

std::size_t argmax(std::span<const double> v) {
  require(!v.empty(), "argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace otalign
