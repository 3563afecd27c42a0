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
#include <numeric>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "otalign/errors.hpp"
#include "otalign/ot.hpp"
#include "otalign/seqdist.hpp"

using namespace otalign;

TEST_CASE("average matcher") {
  const MatchedPair p = match_average(Matrix::from_rows({{1, 3}, {2, 4}}), Matrix::from_rows({{5}, {6}}));
  CHECK(p.u_tilde == Matrix::from_rows({{2}, {3}}));
  CHECK(p.v_tilde == Matrix::from_rows({{5}, {6}}));
  CHECK(p.length() == 1);

  Rng rng(Seed{31});
  const Matrix u = testing::random_matrix(3, 6, rng);
  const Matrix shuffled = Matrix::from_columns({u.column(5), u.column(2), u.column(0), u.column(4),
                                                u.column(1), u.column(3)});
  CHECK((match_average(u, u).u_tilde - match_average(shuffled, u).u_tilde).max_abs() <= 1e-12);
}

TEST_CASE("interpolation matcher") {
  Rng rng(Seed{32});
  const Matrix u = testing::random_matrix(2, 4, rng);
  const Matrix v = testing::random_matrix(2, 4, rng);
  CHECK(match_interpolate(u, v).u_tilde == u);

  // The longer sequence is resampled onto the shorter length; endpoints stay.
  const MatchedPair up = match_interpolate(Matrix::from_rows({{0, 2}}), Matrix::from_rows({{0, 4, 8}}));
  CHECK(up.u_tilde == Matrix::from_rows({{0, 2}}));
  CHECK((up.v_tilde - Matrix::from_rows({{0, 8}})).max_abs() <= 1e-15);

  const MatchedPair down = match_interpolate(Matrix::from_rows({{0, 3, 6, 9}}), Matrix(1, 2));
  CHECK((down.u_tilde - Matrix::from_rows({{0, 9}})).max_abs() <= 1e-15);
  CHECK(down.v_tilde.cols() == 2);
}

TEST_CASE("attention matcher") {
  Rng rng(Seed{33});
  const Matrix u(4, 7, 0.0);
  Matrix same = u;
  const std::vector<double> col{1.0, -2.0, 0.5, 3.0};
  for (std::size_t j = 0; j < 7; ++j) same.set_column(j, col);
  const Matrix v = testing::random_matrix(4, 3, rng);
  const MatchedPair p = match_attention(same, v);
  CHECK(p.u_tilde.rows() == 4);
  CHECK(p.u_tilde.cols() == 3);
  CHECK(p.v_tilde.cols() == 3);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(p.u_tilde(k, j) - col[k]) <= 1e-12);

  // Both u columns equally similar to v's single column.
  const Matrix u2 = Matrix::from_rows({{1, 0}, {0, 1}});
  const Matrix v2 = Matrix::from_rows({{1}, {1}});
  const MatchedPair q = match_attention(u2, v2);
  CHECK(std::abs(q.u_tilde(0, 0) - 0.5) <= 1e-15);
  CHECK(std::abs(q.u_tilde(1, 0) - 0.5) <= 1e-15);

  CHECK_THROWS_AS(match_attention(Matrix(2, 2), v2), ContractError);
}

TEST_CASE("every matcher returns equal shapes") {
  Rng rng(Seed{34});
  for (LengthMatch kind : {LengthMatch::kAverage, LengthMatch::kInterpolate, LengthMatch::kAttention})
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix u = testing::random_matrix(3, 1 + rng.below(8), rng);
      const Matrix v = testing::random_matrix(3, 1 + rng.below(8), rng);
      const MatchedPair p = match_lengths(kind, u, v);
      CHECK(p.u_tilde.same_shape(p.v_tilde));
    }
}

TEST_CASE("euclidean loss") {
  CHECK(euclidean_loss({Matrix(2, 3, 1.0), Matrix(2, 3, 1.0)}).value == 0.0);
  const LossResult r = euclidean_loss({Matrix::from_rows({{0}, {0}}), Matrix::from_rows({{3}, {4}})});
  CHECK(r.value == 5.0);
  CHECK_THROWS_AS(euclidean_loss({Matrix(2, 3), Matrix(2, 2)}), ContractError);

  Rng rng(Seed{35});
  MatchedPair pair{testing::random_matrix(3, 4, rng), testing::random_matrix(3, 4, rng)};
  const LossResult g = euclidean_loss(pair);
  auto f = [&] { return euclidean_loss(pair).value; };
  CHECK(oracle::max_relative_error(g.grad_u, oracle::numeric_gradient(pair.u_tilde, f)) <= 1e-6);
  CHECK(oracle::max_relative_error(g.grad_v, oracle::numeric_gradient(pair.v_tilde, f)) <= 1e-6);
}

TEST_CASE("kl loss") {
  Rng rng(Seed{36});
  const Matrix u = testing::random_matrix(3, 2, rng);
  CHECK(std::abs(kl_loss({u, u}).value) <= 1e-15);
  // softmax (1/2, 1/2) against (1/4, 3/4)
  const MatchedPair hand{Matrix::from_rows({{0}, {0}}),
                         Matrix::from_rows({{0}, {std::log(3.0)}})};
  CHECK(std::abs(kl_loss(hand).value - 0.5 * std::log(4.0 / 3.0)) <= 1e-15);
  CHECK(kl_loss(hand).value == doctest::Approx(0.14384).epsilon(1e-4));
  for (int trial = 0; trial < 100; ++trial) {
    const MatchedPair p{testing::random_matrix(4, 3, rng, 3.0), testing::random_matrix(4, 3, rng, 3.0)};
    CHECK(kl_loss(p).value >= -1e-12);
  }
  CHECK_THROWS_AS(kl_loss({Matrix(2, 3), Matrix(3, 3)}), ContractError);
}

TEST_CASE("matched losses pull back through every matcher") {
  Rng rng(Seed{37});
  for (LengthMatch kind : {LengthMatch::kAverage, LengthMatch::kInterpolate, LengthMatch::kAttention})
    for (bool kl : {false, true}) {
      Matrix u = testing::random_matrix(3, 6, rng);
      Matrix v = testing::random_matrix(3, 4, rng);
      auto f = [&] {
        const MatchedPair p = match_lengths(kind, u, v);
        return kl ? kl_loss(p).value : euclidean_loss(p).value;
      };
      const MatchedPair p = match_lengths(kind, u, v);
      const LossResult r = kl ? kl_loss(p) : euclidean_loss(p);
      const auto [gu, gv] = match_lengths_backward(kind, u, v, r.grad_u, r.grad_v);
      CHECK(oracle::max_relative_error(gu, oracle::numeric_gradient(u, f)) <= 1e-4);
      CHECK(oracle::max_relative_error(gv, oracle::numeric_gradient(v, f)) <= 1e-4);
    }
}

TEST_CASE("soft-DTW") {
  Rng rng(Seed{38});
  const Matrix a = testing::random_matrix(3, 1, rng);
  const Matrix b = testing::random_matrix(3, 1, rng);
  CHECK(std::abs(soft_dtw(a, b, 1.0, 2.0).value - lp_distance(a.column(0), b.column(0), 2.0)) <= 1e-12);

  for (int trial = 0; trial < 20; ++trial) {
    const Matrix u = testing::random_matrix(2, 1 + rng.below(6), rng);
    const Matrix v = testing::random_matrix(2, 1 + rng.below(6), rng);
    const double hard = oracle::hard_dtw(oracle::positional_cost(u, v, 2.0, 0.0));
    const double s4 = soft_dtw(u, v, 1e-4, 2.0).value;
    const double s2 = soft_dtw(u, v, 1e-2, 2.0).value;
    const double s0 = soft_dtw(u, v, 1.0, 2.0).value;
    CHECK(std::abs(s4 - hard) <= 1e-4);
    CHECK(s2 <= s4 + 1e-12);
    CHECK(s0 <= s2 + 1e-12);
  }

  Matrix u = testing::random_matrix(3, 5, rng);
  Matrix v = testing::random_matrix(3, 4, rng);
  const LossResult r = soft_dtw(u, v, 0.7, 2.0);
  auto f = [&] { return soft_dtw(u, v, 0.7, 2.0).value; };
  CHECK(oracle::max_relative_error(r.grad_u, oracle::numeric_gradient(u, f)) <= 1e-3);
  CHECK(oracle::max_relative_error(r.grad_v, oracle::numeric_gradient(v, f)) <= 1e-3);
}

TEST_CASE("adversarial losses") {
  Rng rng(Seed{39});
  DiscriminatorParams disc = DiscriminatorParams::init(3, 5, rng);
  const Matrix u = testing::random_matrix(3, 4, rng);
  const Matrix v = testing::random_matrix(3, 2, rng);

  SUBCASE("an undecided discriminator costs ln 2 per column") {
    DiscriminatorParams flat = disc.zeros_like();
    const AdversarialResult r = adversarial_losses(u, v, flat, AdversarialMode::kTrainGenerator, nullptr);
    CHECK(std::abs(r.disc_loss - 6.0 * std::log(2.0)) <= 1e-12);
    CHECK(std::abs(r.gen_loss - 6.0 * std::log(2.0)) <= 1e-12);
  }
  SUBCASE("a confident correct discriminator has near-zero loss") {
    // Logit 400 * leaky(leaky(x0)): large and positive for x0 = 1, large
    // and negative for x0 = -10.
    DiscriminatorParams sure = disc.zeros_like();
    sure.w1(0, 0) = 1.0;
    sure.w2(0, 0) = 1.0;
    sure.w3(0, 0) = 400.0;
    const Matrix speech = Matrix::from_rows({{1, 1}, {0, 5}, {2, 0}});
    const Matrix text = Matrix::from_rows({{-10}, {1}, {1}});
    const AdversarialResult r =
        adversarial_losses(speech, text, sure, AdversarialMode::kTrainDiscriminator, nullptr);
    CHECK(r.disc_loss <= 1e-15);
    CHECK(r.gen_loss >= 100.0);
  }
  SUBCASE("label swap identity and gradient routing") {
    Rng d1 = Rng(Seed{1}).substream(5);
    Rng d2 = d1;
    const AdversarialResult g = adversarial_losses(u, v, disc, AdversarialMode::kTrainGenerator, &d1);
    const AdversarialResult d = adversarial_losses(u, v, disc, AdversarialMode::kTrainDiscriminator, &d2);
    CHECK(g.disc_loss == d.disc_loss);
    CHECK(g.gen_loss == d.gen_loss);
    CHECK(g.value == g.gen_loss);
    CHECK(d.value == d.disc_loss);
    CHECK(d.grad_u.max_abs() == 0.0);
    CHECK(d.grad_v.max_abs() == 0.0);
    CHECK(g.grad_disc.w1.max_abs() == 0.0);
    CHECK(d.grad_disc.w1.max_abs() > 0.0);
    CHECK(g.grad_u.max_abs() > 0.0);
  }
  SUBCASE("generator gradient matches finite differences under fixed masks") {
    Matrix uu = u, vv = v;
    const Rng masks = Rng(Seed{2}).substream(5);
    auto run = [&] {
      Rng m = masks;
      return adversarial_losses(uu, vv, disc, AdversarialMode::kTrainGenerator, &m);
    };
    const AdversarialResult r = run();
    auto f = [&] { return run().value; };
    CHECK(oracle::max_relative_error(r.grad_u, oracle::numeric_gradient(uu, f)) <= 1e-4);
    CHECK(oracle::max_relative_error(r.grad_v, oracle::numeric_gradient(vv, f)) <= 1e-4);
  }
}
