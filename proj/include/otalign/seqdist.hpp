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
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "otalign/loss.hpp"
#include "otalign/matrix.hpp"
#include "otalign/random.hpp"

namespace otalign {

// Two sequences brought to a common length p; both are d x p.
struct MatchedPair {
  Matrix u_tilde;
  Matrix v_tilde;
  std::size_t length() const { return u_tilde.cols(); }
};

enum class LengthMatch { kAverage, kInterpolate, kAttention };

std::string_view to_string(LengthMatch kind);
std::optional<LengthMatch> parse_length_match(std::string_view name);

// Global mean of each sequence (p = 1).
MatchedPair match_average(const Matrix& u, const Matrix& v);

// Linear interpolation of the longer sequence onto the shorter one's length.
// Output column j samples the source at normalized position j / (p - 1), so
// first and last columns are reproduced exactly.
MatchedPair match_interpolate(const Matrix& u, const Matrix& v);

// Cosine cross-attention: with unit-norm columns U', V',
//   U~ = U softmax(U'^T V'),  V~ = V softmax(V'^T V'),
// softmax taken down each column so every output is a convex combination of
// source columns. Zero-norm columns are rejected.
MatchedPair match_attention(const Matrix& u, const Matrix& v);

MatchedPair match_lengths(LengthMatch kind, const Matrix& u, const Matrix& v);

// Pulls gradients w.r.t. (U~, V~) back to (U, V) for the given matcher.
std::pair<Matrix, Matrix> match_lengths_backward(LengthMatch kind, const Matrix& u,
                                                 const Matrix& v, const Matrix& grad_u_tilde,
                                                 const Matrix& grad_v_tilde);

// sqrt(sum_i |u~_i - v~_i|^2). The gradient at zero distance is zero.
LossResult euclidean_loss(const MatchedPair& pair);

// sum_i KL(softmax(u~_i) || softmax(v~_i)), softmax over the feature axis.
LossResult kl_loss(const MatchedPair& pair);

// Soft-DTW over the grid of |u_i - v_j|_p costs with
// softmin(a, b, c) = -smoothing * log(exp(-a/s) + exp(-b/s) + exp(-c/s)).
// No length normalization.
LossResult soft_dtw(const Matrix& u, const Matrix& v, double smoothing, double p);

// Feed-forward discriminator d -> h -> h -> 1 with leaky-ReLU hidden layers,
// each followed by dropout. Its output is the logit of "produced by the
// speech encoder".
struct DiscriminatorParams {
  Matrix w1, b1;  // h x d, h x 1
  Matrix w2, b2;  // h x h, h x 1
  Matrix w3, b3;  // 1 x h, 1 x 1
  double leaky_slope = 0.2;
  double dropout = 0.1;

  static DiscriminatorParams init(std::size_t dim, std::size_t hidden, Rng& rng);
  DiscriminatorParams zeros_like() const;
  std::size_t input_dim() const { return w1.cols(); }
};

enum class AdversarialMode { kTrainDiscriminator, kTrainGenerator };

struct AdversarialResult {
  double value = 0.0;  // disc_loss or gen_loss depending on the mode
  double disc_loss = 0.0;
  double gen_loss = 0.0;
  Matrix grad_u;                     // zero in discriminator mode
  Matrix grad_v;                     // zero in discriminator mode
  DiscriminatorParams grad_disc;     // zero in generator mode
};

// L_disc = sum_i bce(p_i, 1) + sum_j bce(q_j, 0) and L_gen with the labels
// swapped, where p_i, q_j are discriminator probabilities for the columns of
// u and v. Dropout masks come from `dropout_stream`; pass nullptr to disable
// dropout. Masks are drawn column by column, u first.
AdversarialResult adversarial_losses(const Matrix& u, const Matrix& v,
                                     const DiscriminatorParams& disc, AdversarialMode mode,
                                     Rng* dropout_stream);

}  // namespace otalign
