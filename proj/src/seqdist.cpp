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

#include "otalign/seqdist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "otalign/errors.hpp"
#include "otalign/numeric.hpp"
#include "otalign/ot.hpp"

namespace otalign {

namespace {

// Column-stochastic weights W (src x dst) such that resized = source * W.
Matrix interpolation_weights(std::size_t src, std::size_t dst) {
  require(src > 0 && dst > 0, "interpolate: empty sequence");
  Matrix w(src, dst);
  const auto positions = normalized_positions(dst);
  for (std::size_t j = 0; j < dst; ++j) {
    const double x = positions[j] * static_cast<double>(src - 1);
    const auto lo = std::min(static_cast<std::size_t>(std::floor(x)), src - 1);
    const std::size_t hi = std::min(lo + 1, src - 1);
    const double frac = x - static_cast<double>(lo);
    w(lo, j) += 1.0 - frac;
    if (frac > 0.0) w(hi, j) += frac;
  }
  return w;
}

Matrix average_weights(std::size_t len) {
  require(len > 0, "match_average: empty sequence");
  return Matrix(len, 1, 1.0 / static_cast<double>(len));
}

struct Normalized {
  Matrix unit;                // columns scaled to unit l2 norm
  std::vector<double> norms;  // original column norms
};

Normalized normalize_columns(const Matrix& x) {
  Normalized out{x, std::vector<double>(x.cols(), 0.0)};
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.rows(); ++k) s += x(k, j) * x(k, j);
    const double norm = std::sqrt(s);
    require(norm > 0.0, "match_attention: zero-norm column " + std::to_string(j));
    out.norms[j] = norm;
    for (std::size_t k = 0; k < x.rows(); ++k) out.unit(k, j) /= norm;
  }
  return out;
}

// dL/dx from dL/dx_bar for x_bar = x / |x|, column by column.
Matrix normalize_columns_backward(const Normalized& n, const Matrix& grad_unit) {
  Matrix out(grad_unit.rows(), grad_unit.cols());
  for (std::size_t j = 0; j < grad_unit.cols(); ++j) {
    double dot = 0.0;
    for (std::size_t k = 0; k < grad_unit.rows(); ++k) dot += n.unit(k, j) * grad_unit(k, j);
    for (std::size_t k = 0; k < grad_unit.rows(); ++k)
      out(k, j) = (grad_unit(k, j) - n.unit(k, j) * dot) / n.norms[j];
  }
  return out;
}

// Softmax down each column.
Matrix softmax_columns(const Matrix& scores) {
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t j = 0; j < scores.cols(); ++j) out.set_column(j, softmax(scores.column(j)));
  return out;
}

Matrix softmax_columns_backward(const Matrix& probs, const Matrix& grad_probs) {
  Matrix out(probs.rows(), probs.cols());
  for (std::size_t j = 0; j < probs.cols(); ++j) {
    double dot = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) dot += probs(i, j) * grad_probs(i, j);
    for (std::size_t i = 0; i < probs.rows(); ++i)
      out(i, j) = probs(i, j) * (grad_probs(i, j) - dot);
  }
  return out;
}

struct AttentionCache {
  Normalized u_bar;
  Normalized v_bar;
  Matrix cross;  // softmax(U'^T V'), m x n
  Matrix self;   // softmax(V'^T V'), n x n
};

AttentionCache attention_forward(const Matrix& u, const Matrix& v) {
  require(u.rows() == v.rows(), "match_attention: feature dimension mismatch");
  require(u.cols() > 0 && v.cols() > 0, "match_attention: empty sequence");
  AttentionCache c{normalize_columns(u), normalize_columns(v), {}, {}};
  c.cross = softmax_columns(matmul_tn(c.u_bar.unit, c.v_bar.unit));
  c.self = softmax_columns(matmul_tn(c.v_bar.unit, c.v_bar.unit));
  return c;
}

double leaky(double x, double slope) { return x > 0.0 ? x : slope * x; }

}  // namespace

std::string_view to_string(LengthMatch kind) {
  switch (kind) {
    case LengthMatch::kAverage: return "average";
    case LengthMatch::kInterpolate: return "interpolate";
    case LengthMatch::kAttention: return "attention";
  }
  return "unknown";
}

std::optional<LengthMatch> parse_length_match(std::string_view name) {
  if (name == "average") return LengthMatch::kAverage;
  if (name == "interpolate") return LengthMatch::kInterpolate;
  if (name == "attention") return LengthMatch::kAttention;
  return std::nullopt;
}

MatchedPair match_average(const Matrix& u, const Matrix& v) {
  require(u.rows() == v.rows(), "match_average: feature dimension mismatch");
  return {matmul(u, average_weights(u.cols())), matmul(v, average_weights(v.cols()))};
}

MatchedPair match_interpolate(const Matrix& u, const Matrix& v) {
  require(u.rows() == v.rows(), "match_interpolate: feature dimension mismatch");
  require(u.cols() > 0 && v.cols() > 0, "match_interpolate: empty sequence");
  if (u.cols() >= v.cols()) return {matmul(u, interpolation_weights(u.cols(), v.cols())), v};
  return {u, matmul(v, interpolation_weights(v.cols(), u.cols()))};
}

MatchedPair match_attention(const Matrix& u, const Matrix& v) {
  const AttentionCache c = attention_forward(u, v);
  return {matmul(u, c.cross), matmul(v, c.self)};
}

MatchedPair match_lengths(LengthMatch kind, const Matrix& u, const Matrix& v) {
  switch (kind) {
    case LengthMatch::kAverage: return match_average(u, v);
    case LengthMatch::kInterpolate: return match_interpolate(u, v);
    case LengthMatch::kAttention: return match_attention(u, v);
  }
  throw ContractError("match_lengths: unknown matcher");
}

std::pair<Matrix, Matrix> match_lengths_backward(LengthMatch kind, const Matrix& u,
                                                 const Matrix& v, const Matrix& grad_u_tilde,
                                                 const Matrix& grad_v_tilde) {
  switch (kind) {
    case LengthMatch::kAverage:
      return {matmul_nt(grad_u_tilde, average_weights(u.cols())),
              matmul_nt(grad_v_tilde, average_weights(v.cols()))};
    case LengthMatch::kInterpolate:
      if (u.cols() >= v.cols())
        return {matmul_nt(grad_u_tilde, interpolation_weights(u.cols(), v.cols())), grad_v_tilde};
      return {grad_u_tilde, matmul_nt(grad_v_tilde, interpolation_weights(v.cols(), u.cols()))};
    case LengthMatch::kAttention: {
      const AttentionCache c = attention_forward(u, v);
      // U~ = U A with A = softmax(Ub^T Vb).
      Matrix grad_u = matmul_nt(grad_u_tilde, c.cross);
      const Matrix grad_scores_uv = softmax_columns_backward(c.cross, matmul_tn(u, grad_u_tilde));
      Matrix grad_ub = matmul_nt(c.v_bar.unit, grad_scores_uv);
      Matrix grad_vb = matmul(c.u_bar.unit, grad_scores_uv);
      // V~ = V B with B = softmax(Vb^T Vb).
      Matrix grad_v = matmul_nt(grad_v_tilde, c.self);
      const Matrix grad_scores_vv = softmax_columns_backward(c.self, matmul_tn(v, grad_v_tilde));
      grad_vb += matmul(c.v_bar.unit, grad_scores_vv + grad_scores_vv.transposed());
      grad_u += normalize_columns_backward(c.u_bar, grad_ub);
      grad_v += normalize_columns_backward(c.v_bar, grad_vb);
      return {std::move(grad_u), std::move(grad_v)};
    }
  }
  throw ContractError("match_lengths_backward: unknown matcher");
}

LossResult euclidean_loss(const MatchedPair& pair) {
  require(pair.u_tilde.same_shape(pair.v_tilde), "euclidean_loss: unmatched shapes");
  Matrix diff = pair.u_tilde - pair.v_tilde;
  LossResult out;
  out.value = diff.norm();
  if (out.value > 0.0) diff *= 1.0 / out.value;
  else diff.fill(0.0);
  out.grad_v = diff * -1.0;
  out.grad_u = std::move(diff);
  return out;
}

LossResult kl_loss(const MatchedPair& pair) {
  require(pair.u_tilde.same_shape(pair.v_tilde), "kl_loss: unmatched shapes");
  const std::size_t d = pair.u_tilde.rows();
  LossResult out;
  out.grad_u = Matrix(d, pair.length());
  out.grad_v = Matrix(d, pair.length());
  for (std::size_t i = 0; i < pair.length(); ++i) {
    const auto log_p = log_softmax(pair.u_tilde.column(i));
    const auto log_q = log_softmax(pair.v_tilde.column(i));
    double kl = 0.0;
    for (std::size_t k = 0; k < d; ++k) kl += std::exp(log_p[k]) * (log_p[k] - log_q[k]);
    out.value += kl;
    for (std::size_t k = 0; k < d; ++k) {
      const double p = std::exp(log_p[k]);
      out.grad_u(k, i) = p * ((log_p[k] - log_q[k]) - kl);
      out.grad_v(k, i) = std::exp(log_q[k]) - p;
    }
  }
  return out;
}

LossResult soft_dtw(const Matrix& u, const Matrix& v, double smoothing, double p) {
  require(smoothing > 0.0, "soft_dtw: smoothing must be > 0");
  require(u.cols() > 0 && v.cols() > 0, "soft_dtw: empty sequence");
  const std::size_t m = u.cols();
  const std::size_t n = v.cols();
  const Matrix cost = lp_cost(u, v, p);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based tables with a border row/column on each side.
  Matrix r(m + 2, n + 2, kInf);
  r(0, 0) = 0.0;
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      const double args[3] = {-r(i - 1, j - 1) / smoothing, -r(i - 1, j) / smoothing,
                              -r(i, j - 1) / smoothing};
      r(i, j) = cost(i - 1, j - 1) - smoothing * logsumexp(args);
    }
  }

  LossResult out;
  out.value = r(m, n);

  // Backward pass: e(i, j) = d R(m, n) / d R(i, j).
  Matrix d_ext(m + 2, n + 2, 0.0);
  for (std::size_t i = 1; i <= m; ++i)
    for (std::size_t j = 1; j <= n; ++j) d_ext(i, j) = cost(i - 1, j - 1);
  for (std::size_t i = 1; i <= m; ++i) r(i, n + 1) = -kInf;
  for (std::size_t j = 1; j <= n; ++j) r(m + 1, j) = -kInf;
  r(m + 1, n + 1) = r(m, n);
  Matrix e(m + 2, n + 2, 0.0);
  e(m + 1, n + 1) = 1.0;
  for (std::size_t j = n; j >= 1; --j) {
    for (std::size_t i = m; i >= 1; --i) {
      const double a = std::exp((r(i + 1, j) - r(i, j) - d_ext(i + 1, j)) / smoothing);
      const double b = std::exp((r(i, j + 1) - r(i, j) - d_ext(i, j + 1)) / smoothing);
      const double c = std::exp((r(i + 1, j + 1) - r(i, j) - d_ext(i + 1, j + 1)) / smoothing);
      e(i, j) = e(i + 1, j) * a + e(i, j + 1) * b + e(i + 1, j + 1) * c;
    }
  }

  out.grad_u = Matrix(u.rows(), m);
  out.grad_v = Matrix(v.rows(), n);
  std::vector<double> ui(u.rows()), vj(v.rows()), g(u.rows());
  for (std::size_t i = 0; i < m; ++i) {
    ui = u.column(i);
    for (std::size_t j = 0; j < n; ++j) {
      vj = v.column(j);
      std::fill(g.begin(), g.end(), 0.0);
      add_lp_distance_gradient(ui, vj, p, e(i + 1, j + 1), g);
      for (std::size_t k = 0; k < g.size(); ++k) {
        out.grad_u(k, i) += g[k];
        out.grad_v(k, j) -= g[k];
      }
    }
  }
  return out;
}

DiscriminatorParams DiscriminatorParams::init(std::size_t dim, std::size_t hidden, Rng& rng) {
  require(dim > 0 && hidden > 0, "DiscriminatorParams::init: empty layer");
  DiscriminatorParams d;
  d.w1 = fan_in_uniform(hidden, dim, rng);
  d.b1 = Matrix(hidden, 1);
  d.w2 = fan_in_uniform(hidden, hidden, rng);
  d.b2 = Matrix(hidden, 1);
  d.w3 = fan_in_uniform(1, hidden, rng);
  d.b3 = Matrix(1, 1);
  return d;
}

DiscriminatorParams DiscriminatorParams::zeros_like() const {
  DiscriminatorParams z = *this;
  for (Matrix* m : {&z.w1, &z.b1, &z.w2, &z.b2, &z.w3, &z.b3}) m->fill(0.0);
  return z;
}

AdversarialResult adversarial_losses(const Matrix& u, const Matrix& v,
                                     const DiscriminatorParams& disc, AdversarialMode mode,
                                     Rng* dropout_stream) {
  require(u.rows() == disc.input_dim() && v.rows() == disc.input_dim(),
          "adversarial_losses: feature dimension does not match the discriminator");
  const std::size_t m = u.cols();
  const std::size_t n = v.cols();
  const std::size_t total = m + n;
  const std::size_t hidden = disc.w1.rows();

  Matrix x(u.rows(), total);
  for (std::size_t k = 0; k < u.rows(); ++k) {
    for (std::size_t i = 0; i < m; ++i) x(k, i) = u(k, i);
    for (std::size_t j = 0; j < n; ++j) x(k, m + j) = v(k, j);
  }

  // Inverted dropout masks (0 or 1/(1-p)), drawn column by column.
  Matrix mask1(hidden, total, 1.0), mask2(hidden, total, 1.0);
  if (dropout_stream != nullptr && disc.dropout > 0.0) {
    const double keep = 1.0 - disc.dropout;
    for (std::size_t c = 0; c < total; ++c) {
      for (std::size_t k = 0; k < hidden; ++k)
        mask1(k, c) = dropout_stream->uniform() < keep ? 1.0 / keep : 0.0;
      for (std::size_t k = 0; k < hidden; ++k)
        mask2(k, c) = dropout_stream->uniform() < keep ? 1.0 / keep : 0.0;
    }
  }

  auto affine = [](const Matrix& w, const Matrix& b, const Matrix& in) {
    Matrix out = matmul(w, in);
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += b(r, 0);
    return out;
  };
  const Matrix pre1 = affine(disc.w1, disc.b1, x);
  Matrix h1(hidden, total);
  for (std::size_t k = 0; k < h1.size(); ++k)
    h1.data()[k] = leaky(pre1.data()[k], disc.leaky_slope) * mask1.data()[k];
  const Matrix pre2 = affine(disc.w2, disc.b2, h1);
  Matrix h2(hidden, total);
  for (std::size_t k = 0; k < h2.size(); ++k)
    h2.data()[k] = leaky(pre2.data()[k], disc.leaky_slope) * mask2.data()[k];
  const Matrix logits = affine(disc.w3, disc.b3, h2);

  AdversarialResult out;
  Matrix grad_logits(1, total);
  const bool train_disc = mode == AdversarialMode::kTrainDiscriminator;
  for (std::size_t c = 0; c < total; ++c) {
    const double z = logits(0, c);
    const bool speech = c < m;
    // bce(sigmoid(z), 1) = softplus(-z), bce(sigmoid(z), 0) = softplus(z).
    out.disc_loss += speech ? softplus(-z) : softplus(z);
    out.gen_loss += speech ? softplus(z) : softplus(-z);
    const bool label_one = speech == train_disc;
    grad_logits(0, c) = sigmoid(z) - (label_one ? 1.0 : 0.0);
  }
  out.value = train_disc ? out.disc_loss : out.gen_loss;

  auto leaky_backward = [&](const Matrix& grad_h, const Matrix& pre, const Matrix& mask) {
    Matrix g(grad_h.rows(), grad_h.cols());
    for (std::size_t k = 0; k < g.size(); ++k)
      g.data()[k] = grad_h.data()[k] * mask.data()[k] *
                    (pre.data()[k] > 0.0 ? 1.0 : disc.leaky_slope);
    return g;
  };
  const Matrix grad_pre2 = leaky_backward(matmul_tn(disc.w3, grad_logits), pre2, mask2);
  const Matrix grad_pre1 = leaky_backward(matmul_tn(disc.w2, grad_pre2), pre1, mask1);

  out.grad_u = Matrix(u.rows(), m);
  out.grad_v = Matrix(v.rows(), n);
  out.grad_disc = disc.zeros_like();
  if (train_disc) {
    auto row_sums = [](const Matrix& g) {
      Matrix s(g.rows(), 1);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) s(r, 0) += g(r, c);
      return s;
    };
    out.grad_disc.w3 = matmul_nt(grad_logits, h2);
    out.grad_disc.b3 = row_sums(grad_logits);
    out.grad_disc.w2 = matmul_nt(grad_pre2, h1);
    out.grad_disc.b2 = row_sums(grad_pre2);
    out.grad_disc.w1 = matmul_nt(grad_pre1, x);
    out.grad_disc.b1 = row_sums(grad_pre1);
  } else {
    const Matrix grad_x = matmul_tn(disc.w1, grad_pre1);
    for (std::size_t k = 0; k < u.rows(); ++k) {
      for (std::size_t i = 0; i < m; ++i) out.grad_u(k, i) = grad_x(k, i);
      for (std::size_t j = 0; j < n; ++j) out.grad_v(k, j) = grad_x(k, m + j);
    }
  }
  return out;
}

}  // namespace otalign
