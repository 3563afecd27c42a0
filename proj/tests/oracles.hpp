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

// Reference implementations used only by the tests. They share no code with
// the library beyond the Matrix container.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "otalign/matrix.hpp"

namespace oracle {

using otalign::Matrix;

inline std::vector<int> collapse(const std::vector<int>& path) {
  std::vector<int> out;
  int prev = -1;
  for (int t : path) {
    if (t != prev && t != 0) out.push_back(t);
    prev = t;
  }
  return out;
}

// Probability that a path drawn from the rows of exp(log_probs) collapses to
// `target`, by walking every path.
inline double ctc_probability(const Matrix& log_probs, const std::vector<int>& target) {
  const std::size_t frames = log_probs.rows();
  const std::size_t symbols = log_probs.cols();
  std::vector<int> path(frames, 0);
  double total = 0.0;
  while (true) {
    if (collapse(path) == target) {
      double p = 1.0;
      for (std::size_t t = 0; t < frames; ++t) p *= std::exp(log_probs(t, path[t]));
      total += p;
    }
    std::size_t k = 0;
    while (k < frames && ++path[k] == static_cast<int>(symbols)) path[k++] = 0;
    if (k == frames) break;
  }
  return total;
}

// Uniform-mass square OT: minimum over permutations of the mean cost.
inline double assignment_cost(const Matrix& cost) {
  std::vector<std::size_t> perm(cost.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += cost(i, perm[i]);
    best = std::min(best, s / static_cast<double>(perm.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline double position(std::size_t i, std::size_t length) {
  return length == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(length - 1);
}

// C_ij = (sum_k |u_ki - v_kj|^p + gamma^p |s_i - t_j|^p)^(1/p).
inline Matrix positional_cost(const Matrix& u, const Matrix& v, double p, double gamma) {
  Matrix c(u.cols(), v.cols());
  for (std::size_t i = 0; i < u.cols(); ++i)
    for (std::size_t j = 0; j < v.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < u.rows(); ++k) s += std::pow(std::abs(u(k, i) - v(k, j)), p);
      s += std::pow(gamma, p) * std::pow(std::abs(position(i, u.cols()) - position(j, v.cols())), p);
      c(i, j) = std::pow(s, 1.0 / p);
    }
  return c;
}

// Classic DTW with steps (1,0), (0,1), (1,1).
inline double hard_dtw(const Matrix& cost) {
  const std::size_t m = cost.rows(), n = cost.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> r(m + 1, std::vector<double>(n + 1, inf));
  r[0][0] = 0.0;
  for (std::size_t i = 1; i <= m; ++i)
    for (std::size_t j = 1; j <= n; ++j)
      r[i][j] = cost(i - 1, j - 1) + std::min({r[i - 1][j - 1], r[i - 1][j], r[i][j - 1]});
  return r[m][n];
}

// Central difference of f along every entry of x.
inline Matrix numeric_gradient(Matrix& x, const std::function<double()>& f, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  auto values = x.data();
  auto out = g.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = f();
    values[i] = saved - h;
    const double down = f();
    values[i] = saved;
    out[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Max over entries of |a - n| / max(|a|, |n|); entries where both are below
// `absolute` are compared absolutely instead.
inline double max_relative_error(const Matrix& analytic, const Matrix& numeric,
                                 double absolute = 1e-8) {
  double worst = 0.0;
  auto a = analytic.data();
  auto n = numeric.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(std::abs(a[i]), std::abs(n[i]));
    const double err = scale < absolute ? std::abs(a[i] - n[i]) : std::abs(a[i] - n[i]) / scale;
    worst = std::max(worst, err);
  }
  return worst;
}

// Minimal XML well-formedness check: balanced, properly nested tags and
// quoted attributes. Enough for the SVG the plot command writes.
inline bool well_formed_xml(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool root_seen = false;
  while ((i = text.find('<', i)) != std::string::npos) {
    const std::size_t close = text.find('>', i);
    if (close == std::string::npos) return false;
    std::string tag = text.substr(i + 1, close - i - 1);
    i = close + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    std::size_t quotes = std::count(tag.begin(), tag.end(), '"');
    if (quotes % 2) return false;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" /\n"));
    if (stack.empty()) {
      if (root_seen) return false;
      root_seen = true;
    }
    if (!self_closing) stack.push_back(name);
  }
  return root_seen && stack.empty();
}

}  // namespace oracle
