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

#include "otalign/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "otalign/errors.hpp"
#include "otalign/numeric.hpp"

namespace otalign {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kBruteForceBudget = 1e7;

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

void check_target(std::span<const int> target, std::size_t alphabet) {
  for (int token : target) {
    if (token == kBlank) throw ContractError("ctc: target contains the blank token");
    if (token < 0 || static_cast<std::size_t>(token) >= alphabet)
      throw ContractError("ctc: target token " + std::to_string(token) +
                          " outside vocabulary of size " + std::to_string(alphabet));
  }
}

std::size_t enumeration_size(const Matrix& log_probs) {
  const double count =
      std::pow(static_cast<double>(log_probs.cols()), static_cast<double>(log_probs.rows()));
  if (count > kBruteForceBudget)
    throw LimitError("ctc brute force: " + std::to_string(log_probs.cols()) + "^" +
                     std::to_string(log_probs.rows()) + " alignments exceed the 1e7 budget");
  return static_cast<std::size_t>(count);
}

// Calls visit(alignment, probability) for every alignment in {0..V}^S.
template <typename Visit>
void enumerate_alignments(const Matrix& log_probs, Visit&& visit) {
  const std::size_t frames = log_probs.rows();
  const std::size_t alphabet = log_probs.cols();
  const std::size_t total = enumeration_size(log_probs);
  std::vector<int> alignment(frames, 0);
  for (std::size_t n = 0; n < total; ++n) {
    double logp = 0.0;
    for (std::size_t t = 0; t < frames; ++t) logp += log_probs(t, alignment[t]);
    visit(alignment, std::exp(logp));
    for (std::size_t t = frames; t-- > 0;) {
      if (static_cast<std::size_t>(++alignment[t]) < alphabet) break;
      alignment[t] = 0;
    }
  }
}

}  // namespace

TokenSequence collapse(std::span<const int> alignment) {
  TokenSequence out;
  int previous = -1;
  for (int token : alignment) {
    if (token != previous && token != kBlank) out.push_back(token);
    previous = token;
  }
  return out;
}

std::size_t ctc_min_frames(std::span<const int> target) {
  std::size_t frames = target.size();
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++frames;
  return frames;
}

CtcResult ctc_loss(const Matrix& log_probs, std::span<const int> target) {
  const std::size_t frames = log_probs.rows();
  const std::size_t alphabet = log_probs.cols();
  require(alphabet >= 1, "ctc_loss: empty vocabulary");
  check_target(target, alphabet);
  const std::size_t needed = ctc_min_frames(target);
  if (frames < needed || frames == 0)
    throw InfeasibleError("ctc_loss: " + std::to_string(frames) + " frames cannot emit a target " +
                          "that needs " + std::to_string(std::max<std::size_t>(needed, 1)));

  // Extended label sequence: blank, y1, blank, y2, ..., yT, blank.
  const std::size_t states = 2 * target.size() + 1;
  std::vector<int> label(states, kBlank);
  for (std::size_t k = 0; k < target.size(); ++k) label[2 * k + 1] = target[k];
  auto can_skip = [&](std::size_t s) {
    return s >= 2 && label[s] != kBlank && label[s] != label[s - 2];
  };

  Matrix alpha(frames, states, kNegInf);
  alpha(0, 0) = log_probs(0, label[0]);
  if (states > 1) alpha(0, 1) = log_probs(0, label[1]);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, alpha(t - 1, s - 2));
      if (acc != kNegInf) alpha(t, s) = acc + log_probs(t, label[s]);
    }
  }

  // beta(t, s): log-probability of finishing from state s at frame t,
  // excluding the emission at frame t.
  Matrix beta(frames, states, kNegInf);
  beta(frames - 1, states - 1) = 0.0;
  if (states > 1) beta(frames - 1, states - 2) = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = beta(t + 1, s) + log_probs(t + 1, label[s]);
      if (s + 1 < states) acc = log_add(acc, beta(t + 1, s + 1) + log_probs(t + 1, label[s + 1]));
      if (s + 2 < states && can_skip(s + 2))
        acc = log_add(acc, beta(t + 1, s + 2) + log_probs(t + 1, label[s + 2]));
      beta(t, s) = acc;
    }
  }

  double log_likelihood = alpha(frames - 1, states - 1);
  if (states > 1) log_likelihood = log_add(log_likelihood, alpha(frames - 1, states - 2));
  if (log_likelihood == kNegInf)
    throw InfeasibleError("ctc_loss: target has zero probability under the given frames");

  CtcResult result;
  result.loss = -log_likelihood;
  result.grad = Matrix(frames, alphabet);
  for (std::size_t t = 0; t < frames; ++t) {
    auto g = result.grad.row(t);
    for (std::size_t k = 0; k < alphabet; ++k) g[k] = std::exp(log_probs(t, k));
    for (std::size_t s = 0; s < states; ++s) {
      const double occupancy = alpha(t, s) + beta(t, s);
      if (occupancy == kNegInf) continue;
      g[label[s]] -= std::exp(occupancy - log_likelihood);
    }
  }
  return result;
}

double ctc_brute_force(const Matrix& log_probs, std::span<const int> target) {
  check_target(target, log_probs.cols());
  double total = 0.0;
  enumerate_alignments(log_probs, [&](const std::vector<int>& alignment, double p) {
    const TokenSequence out = collapse(alignment);
    if (std::equal(out.begin(), out.end(), target.begin(), target.end())) total += p;
  });
  if (total <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(total);
}

std::map<TokenSequence, double> ctc_output_distribution(const Matrix& log_probs) {
  std::map<TokenSequence, double> mass;
  enumerate_alignments(log_probs, [&](const std::vector<int>& alignment, double p) {
    mass[collapse(alignment)] += p;
  });
  return mass;
}

TokenSequence greedy_decode(const Matrix& log_probs) {
  std::vector<int> best(log_probs.rows());
  for (std::size_t t = 0; t < log_probs.rows(); ++t)
    best[t] = static_cast<int>(argmax(log_probs.row(t)));
  return collapse(best);
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    const auto row = log_softmax(logits.row(t));
    std::copy(row.begin(), row.end(), out.row(t).begin());
  }
  return out;
}

std::size_t edit_distance(std::span<const int> reference, std::span<const int> hypothesis) {
  std::vector<std::size_t> prev(hypothesis.size() + 1), cur(hypothesis.size() + 1);
  for (std::size_t j = 0; j <= hypothesis.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= reference.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hypothesis.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hypothesis.size()];
}

double wer(std::span<const int> reference, std::span<const int> hypothesis) {
  require(!reference.empty(), "wer: empty reference");
  return static_cast<double>(edit_distance(reference, hypothesis)) /
         static_cast<double>(reference.size());
}

}  // namespace otalign
