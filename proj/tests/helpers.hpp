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

#include <vector>

#include "otalign/ctc.hpp"
#include "otalign/matrix.hpp"
#include "otalign/random.hpp"

namespace testing {

inline otalign::Matrix random_matrix(std::size_t rows, std::size_t cols, otalign::Rng& rng,
                                     double scale = 1.0) {
  otalign::Matrix m(rows, cols);
  for (double& x : m.data()) x = scale * rng.normal();
  return m;
}

inline otalign::Matrix random_log_probs(std::size_t frames, std::size_t vocab, otalign::Rng& rng) {
  return otalign::log_softmax_rows(random_matrix(frames, vocab + 1, rng, 1.5));
}

// Blank-free target of length 1..max_len that fits in `frames`.
inline otalign::TokenSequence random_feasible_target(std::size_t frames, std::size_t vocab,
                                                     std::size_t max_len, otalign::Rng& rng) {
  while (true) {
    const std::size_t len = 1 + rng.below(max_len);
    otalign::TokenSequence t(len);
    for (int& x : t) x = static_cast<int>(1 + rng.below(vocab));
    if (otalign::ctc_min_frames(t) <= frames) return t;
  }
}

}  // namespace testing
