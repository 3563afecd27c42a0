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
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "otalign/ctc.hpp"
#include "otalign/errors.hpp"

using namespace otalign;

namespace {

// h=1, e=2, l=3, o=4; 0 is the blank.
const TokenSequence kHello{1, 2, 3, 3, 4};

Matrix one_hot_log_probs(const TokenSequence& path, std::size_t symbols) {
  Matrix lp(path.size(), symbols, std::log(1e-3));
  for (std::size_t t = 0; t < path.size(); ++t) lp(t, path[t]) = std::log(1.0 - 1e-3 * (symbols - 1));
  return lp;
}

}  // namespace

TEST_CASE("collapse examples") {
  // "heellllloooo" -> "helo"
  CHECK(collapse(TokenSequence{1, 2, 2, 3, 3, 3, 3, 3, 4, 4, 4, 4}) == TokenSequence{1, 2, 3, 4});
  // "he_ll_l_oo__" -> "hello"
  CHECK(collapse(TokenSequence{1, 2, 0, 3, 3, 0, 3, 0, 4, 4, 0, 0}) == kHello);
  CHECK(collapse(TokenSequence{0, 0, 0}).empty());
  CHECK(collapse(TokenSequence{3, 1, 2, 1}) == TokenSequence{3, 1, 2, 1});
}

TEST_CASE("ctc two-frame hand example") {
  const Matrix lp(2, 2, std::log(0.5));
  const CtcResult r = ctc_loss(lp, TokenSequence{1});
  CHECK(r.loss == doctest::Approx(-std::log(0.75)).epsilon(1e-14));
  CHECK(std::abs(r.loss - 0.2876820724517809) < 1e-12);
}

TEST_CASE("ctc single frame") {
  Rng rng(Seed{11});
  const Matrix lp = testing::random_log_probs(1, 4, rng);
  CHECK(ctc_loss(lp, TokenSequence{3}).loss == doctest::Approx(-lp(0, 3)).epsilon(1e-14));
}

TEST_CASE("ctc matches the enumeration oracle") {
  Rng rng(Seed{12});
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t frames = 1 + rng.below(5);
    const std::size_t vocab = 1 + rng.below(3);
    const Matrix lp = testing::random_log_probs(frames, vocab, rng);
    const TokenSequence target = testing::random_feasible_target(frames, vocab, frames, rng);
    const double expected = -std::log(oracle::ctc_probability(lp, target));
    CHECK(std::abs(ctc_loss(lp, target).loss - expected) <= 1e-9);
    CHECK(std::abs(ctc_brute_force(lp, target) - expected) <= 1e-9);
  }
}

TEST_CASE("ctc gradient rows sum to zero and match finite differences") {
  Rng rng(Seed{13});
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t frames = 2 + rng.below(5);
    const std::size_t vocab = 1 + rng.below(3);
    Matrix logits = testing::random_matrix(frames, vocab + 1, rng);
    const TokenSequence target = testing::random_feasible_target(frames, vocab, 3, rng);
    const CtcResult r = ctc_loss(log_softmax_rows(logits), target);
    for (std::size_t t = 0; t < frames; ++t) {
      double s = 0.0;
      for (double g : r.grad.row(t)) s += g;
      CHECK(std::abs(s) <= 1e-10);
    }
    const Matrix fd = oracle::numeric_gradient(
        logits, [&] { return ctc_loss(log_softmax_rows(logits), target).loss; });
    CHECK(oracle::max_relative_error(r.grad, fd) <= 1e-4);
  }
}

TEST_CASE("ctc infeasible and malformed targets") {
  Rng rng(Seed{14});
  const Matrix lp = testing::random_log_probs(2, 3, rng);
  CHECK_THROWS_AS(ctc_loss(lp, TokenSequence{1, 1}), InfeasibleError);
  CHECK_THROWS_AS(ctc_loss(lp, TokenSequence{1, 2, 3}), InfeasibleError);
  CHECK_THROWS_AS(ctc_loss(lp, TokenSequence{0}), ContractError);
  CHECK_THROWS_AS(ctc_loss(lp, TokenSequence{4}), ContractError);
  CHECK(ctc_min_frames(TokenSequence{1, 1, 2, 2}) == 6);
  CHECK(std::isinf(ctc_brute_force(lp, TokenSequence{1, 1})));
  const Matrix big = testing::random_log_probs(12, 3, rng);  // 4^12 > 1e7
  CHECK_THROWS_AS(ctc_brute_force(big, TokenSequence{1}), LimitError);
}

TEST_CASE("collapsed outputs partition the probability space") {
  Rng rng(Seed{15});
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix lp = testing::random_log_probs(1 + rng.below(5), 1 + rng.below(3), rng);
    double total = 0.0;
    for (const auto& [seq, p] : ctc_output_distribution(lp)) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("greedy decode") {
  CHECK(greedy_decode(one_hot_log_probs({0, 1, 1, 0, 2}, 3)) == TokenSequence{1, 2});
  CHECK(greedy_decode(one_hot_log_probs({0, 0, 0}, 3)).empty());
  CHECK(greedy_decode(one_hot_log_probs({1, 2, 0, 3, 3, 0, 3, 0, 4, 4, 0, 0}, 5)) == kHello);
  // A tie between blank and a token goes to the blank.
  CHECK(greedy_decode(Matrix(1, 2, std::log(0.5))).empty());
}

TEST_CASE("word error rate") {
  CHECK(wer(TokenSequence{1, 2, 3}, TokenSequence{1, 2, 3}) == 0.0);
  CHECK(wer(TokenSequence{1, 2, 3}, TokenSequence{1, 9, 3}) == doctest::Approx(1.0 / 3.0));
  CHECK(wer(TokenSequence{1}, TokenSequence{}) == 1.0);
  CHECK(edit_distance(TokenSequence{1, 2}, TokenSequence{2, 1, 2}) == 1);
  CHECK_THROWS_AS(wer(TokenSequence{}, TokenSequence{1}), ContractError);
}
