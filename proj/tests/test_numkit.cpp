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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "otalign/errors.hpp"
#include "otalign/matrix.hpp"
#include "otalign/numeric.hpp"
#include "otalign/random.hpp"

using namespace otalign;

TEST_CASE("logsumexp examples") {
  CHECK(logsumexp(std::vector<double>{0.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(logsumexp(std::vector<double>{1000.0, 1000.0}) ==
        doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  CHECK(logsumexp(std::vector<double>{5.0}) == 5.0);
  CHECK_THROWS_AS(logsumexp(std::vector<double>{}), ContractError);
}

TEST_CASE("logsumexp shifts exactly with a constant") {
  Rng rng(Seed{7});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(1 + rng.below(8));
    for (double& x : v) x = 10.0 * rng.normal();
    const double c = rng.uniform(-50.0, 50.0);
    std::vector<double> shifted = v;
    for (double& x : shifted) x += c;
    CHECK(std::abs(logsumexp(shifted) - (logsumexp(v) + c)) <= 1e-12);
  }
}

TEST_CASE("softmax examples and invariants") {
  const auto half = softmax(std::vector<double>{0.0, 0.0});
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);
  CHECK(softmax(std::vector<double>{-123.0})[0] == 1.0);
  const auto quarter = softmax(std::vector<double>{std::log(1.0), std::log(3.0)});
  CHECK(quarter[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(quarter[1] == doctest::Approx(0.75).epsilon(1e-14));

  Rng rng(Seed{3});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(1 + rng.below(10));
    for (double& x : v) x = 5.0 * rng.normal();
    const auto p = softmax(v);
    double sum = 0.0;
    for (double x : p) {
      CHECK(x > 0.0);
      CHECK(x <= 1.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(argmax(p) == argmax(v));
    std::vector<double> shifted = v;
    for (double& x : shifted) x += 17.0;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
  }
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0, 2.0}) == 1);
  CHECK(argmax(std::vector<double>{0.0, 0.0}) == 0);
}

TEST_CASE("softplus and sigmoid stay finite at extremes") {
  CHECK(softplus(1000.0) == 1000.0);
  CHECK(softplus(-1000.0) >= 0.0);
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) >= 0.0);
}

TEST_CASE("rng determinism and sub-streams") {
  Rng a(Seed{42}), b(Seed{42});
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng s1 = Rng(Seed{42}).substream(1);
  Rng s2 = Rng(Seed{42}).substream(2);
  int same = 0;
  for (int i = 0; i < 10; ++i) same += s1.next_u64() == s2.next_u64();
  CHECK(same < 10);

  Rng d1(Seed{1}, streams::kSamples), d2(Seed{1}, streams::kInit);
  CHECK(d1.next_u64() != d2.next_u64());
}

TEST_CASE("rng distributions") {
  Rng rng(Seed{2024});
  double mean = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    mean += x;
    sq += x * x;
  }
  mean /= n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(rng.below(7) < 7);
  }
}

TEST_CASE("fan-in uniform bound") {
  Rng rng(Seed{5});
  const Matrix w = fan_in_uniform(10, 24, rng);
  CHECK(w.max_abs() <= std::sqrt(6.0 / 24.0));
  CHECK(w.max_abs() > 0.0);
}

TEST_CASE("matrix products") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  const Matrix b = Matrix::from_rows({{1, 0, 2}, {0, 1, 1}});
  const Matrix ab = matmul(a, b);
  CHECK(ab == Matrix::from_rows({{1, 2, 4}, {3, 4, 10}, {5, 6, 16}}));
  CHECK(matmul_tn(a, a) == matmul(a.transposed(), a));
  CHECK(matmul_nt(b, b) == matmul(b, b.transposed()));
  CHECK(Matrix::from_columns({{1, 3, 5}, {2, 4, 6}}) == a);
  CHECK_THROWS_AS(matmul(a, a), ContractError);
}
