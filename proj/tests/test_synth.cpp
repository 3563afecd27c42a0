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

#include "doctest.h"
#include "otalign/encoder.hpp"
#include "otalign/errors.hpp"
#include "otalign/synth.hpp"

using namespace otalign;

namespace {

Sample two_tokens(std::size_t each) {
  Sample s;
  s.frames = Matrix(2, 2 * each);
  s.transcript = {3, 1};
  s.segments = {{0, each}, {each, 2 * each}};
  return s;
}

}  // namespace

TEST_CASE("noiseless single repeats reproduce the prototypes") {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.repeat_min = cfg.repeat_max = 1;
  cfg.ensure_ctc_feasible = false;
  cfg.n_samples = 20;
  const Matrix protos = synth_prototypes(cfg);
  for (const Sample& s : generate(cfg)) {
    CHECK(s.frames.cols() == s.transcript.size());
    for (std::size_t t = 0; t < s.transcript.size(); ++t)
      CHECK(s.frames.column(t) == protos.column(static_cast<std::size_t>(s.transcript[t] - 1)));
  }
}

TEST_CASE("segments partition the frames in transcript order") {
  SynthConfig cfg;
  cfg.n_samples = 200;
  for (const Sample& s : generate(cfg)) {
    REQUIRE(s.segments.size() == s.transcript.size());
    std::size_t cursor = 0;
    for (const Segment& seg : s.segments) {
      CHECK(seg.start == cursor);
      CHECK(seg.end - seg.start >= cfg.repeat_min);
      CHECK(seg.end - seg.start <= cfg.repeat_max);
      cursor = seg.end;
    }
    CHECK(cursor == s.frames.cols());
    CHECK(s.transcript.size() >= cfg.transcript_len_min);
    CHECK(s.transcript.size() <= cfg.transcript_len_max);
    for (int t : s.transcript) {
      CHECK(t >= 1);
      CHECK(t <= static_cast<int>(cfg.vocab));
    }
  }
}

TEST_CASE("generation is deterministic in the seed") {
  SynthConfig cfg;
  cfg.n_samples = 30;
  const Dataset a = generate(cfg);
  const Dataset b = generate(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t n = 0; n < a.size(); ++n) {
    CHECK(a[n].frames == b[n].frames);
    CHECK(a[n].transcript == b[n].transcript);
    CHECK(a[n].segments == b[n].segments);
  }
  cfg.seed = 2;
  CHECK(generate(cfg)[0].frames != a[0].frames);
}

TEST_CASE("every default sample is CTC-feasible after subsampling") {
  SynthConfig cfg;
  for (const Sample& s : generate(cfg))
    CHECK(subsampled_length(s.frames.cols()) >= ctc_min_frames(s.transcript));
}

TEST_CASE("adjacent repeats only when enabled") {
  SynthConfig cfg;
  cfg.n_samples = 300;
  auto repeats = [](const Dataset& data) {
    int count = 0;
    for (const Sample& s : data)
      for (std::size_t k = 1; k < s.transcript.size(); ++k) count += s.transcript[k] == s.transcript[k - 1];
    return count;
  };
  CHECK(repeats(generate(cfg)) == 0);
  cfg.adjacent_repeats = true;
  CHECK(repeats(generate(cfg)) > 0);
}

TEST_CASE("prototypes are unit norm and separated") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    const Matrix p = synth_prototypes(cfg);
    const double threshold = 4.0 * cfg.noise_sigma / std::sqrt(static_cast<double>(cfg.frame_dim));
    for (std::size_t i = 0; i < p.cols(); ++i) {
      double norm = 0.0;
      for (double x : p.column(i)) norm += x * x;
      CHECK(std::abs(norm - 1.0) <= 1e-12);
      for (std::size_t j = i + 1; j < p.cols(); ++j) {
        double d = 0.0;
        for (std::size_t k = 0; k < p.rows(); ++k) d += (p(k, i) - p(k, j)) * (p(k, i) - p(k, j));
        CHECK(std::sqrt(d) > threshold);
      }
    }
  }
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  cfg.vocab = 1;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = SynthConfig{};
  cfg.repeat_min = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("diagonal mass") {
  SUBCASE("ground-truth plan") {
    const Sample s = two_tokens(8);
    const Matrix plan = Matrix::from_rows({{0.25, 0}, {0.25, 0}, {0, 0.25}, {0, 0.25}});
    CHECK(diagonal_mass(plan, s) == 1.0);
  }
  SUBCASE("uniform plan, segments aligned with output frames") {
    const Sample s = two_tokens(8);  // four output frames, each inside one token
    CHECK(diagonal_mass(Matrix(4, 2, 0.125), s) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("uniform plan, one output frame straddles the boundary") {
    const Sample s = two_tokens(6);  // output frames cover 0-3, 4-7, 8-11
    CHECK(diagonal_mass(Matrix(3, 2, 1.0 / 6.0), s) == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
  }
  SUBCASE("always a fraction") {
    const Sample s = two_tokens(7);
    const Matrix plan = Matrix::from_rows({{0.3, 0.01}, {0.2, 0.1}, {0.0, 0.2}, {0.09, 0.1}});
    const double d = diagonal_mass(plan, s);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(diagonal_mass(Matrix(3, 2, 0.1), two_tokens(8)), ContractError);
    CHECK_THROWS_AS(diagonal_mass(Matrix(4, 3, 0.1), two_tokens(8)), ContractError);
  }
}
