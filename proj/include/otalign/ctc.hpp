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

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "otalign/matrix.hpp"

namespace otalign {

// Token index 0 is the CTC blank everywhere: in log-prob tables, decoded
// sequences and dataset files. Real tokens are 1..V.
inline constexpr int kBlank = 0;

using TokenSequence = std::vector<int>;

// Frame log-probabilities are an S x (V+1) matrix whose rows are log-softmax
// outputs.
struct CtcResult {
  double loss = 0.0;  // -log p(target | frames)
  Matrix grad;        // d loss / d pre-softmax logits, S x (V+1)
};

// Merges runs of equal tokens, then drops blanks. Runs separated by a blank
// stay distinct: "a _ a" collapses to "a a".
TokenSequence collapse(std::span<const int> alignment);

// Smallest frame count that can emit `target`: one frame per token plus one
// blank between every pair of equal neighbours.
std::size_t ctc_min_frames(std::span<const int> target);

// Forward-backward in the log domain over the blank-interleaved target.
// Throws InfeasibleError when the table has fewer than ctc_min_frames rows
// and ContractError when the target contains a blank or an out-of-range id.
CtcResult ctc_loss(const Matrix& log_probs, std::span<const int> target);

// Exhaustive oracle: sums the probability of every alignment in
// {0..V}^S collapsing to `target`. Returns +inf when no alignment does.
// Refuses (LimitError) when (V+1)^S exceeds 1e7.
double ctc_brute_force(const Matrix& log_probs, std::span<const int> target);

// Probability mass of every distinct collapsed output, by enumeration. Same
// budget as ctc_brute_force.
std::map<TokenSequence, double> ctc_output_distribution(const Matrix& log_probs);

// collapse(argmax per frame); argmax ties go to the lowest index.
TokenSequence greedy_decode(const Matrix& log_probs);

// Row-wise log-softmax of an S x (V+1) logit table.
Matrix log_softmax_rows(const Matrix& logits);

// Levenshtein distance with unit costs.
std::size_t edit_distance(std::span<const int> reference, std::span<const int> hypothesis);

// edit_distance / |reference|; the reference must be non-empty.
double wer(std::span<const int> reference, std::span<const int> hypothesis);

}  // namespace otalign
