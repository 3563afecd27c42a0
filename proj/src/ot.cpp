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

#include "otalign/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "otalign/errors.hpp"
#include "otalign/numeric.hpp"

namespace otalign {

namespace {

constexpr double kNormFloor = 1e-12;
// Sweeps per intermediate epsilon-scaling stage.
constexpr std::size_t kStageSweeps = 20;
// Scalings outside [1/x, x] are folded back into the potentials.
constexpr double kAbsorbAbove = 1e50;
// Scaling sweeps between Newton attempts, and Newton steps per attempt.
constexpr std::size_t kNewtonAfter = 50;
constexpr std::size_t kNewtonSteps = 20;

// Solves L x = rhs for a weighted graph Laplacian L (off-diagonal entries
// -w) with node k - 1 grounded at x = 0. Elimination in the GTH form: each
// pivot is recomputed as the sum of its remaining weights, so nothing is
// subtracted and tiny couplings keep full relative accuracy. `w` is k x k,
// symmetric with zero diagonal, and is overwritten. Returns false if some
// node has lost every connection.
bool solve_grounded_laplacian(std::vector<double>& w, std::vector<double>& rhs, std::size_t k,
                              std::vector<double>& x) {
  std::vector<double> pivot(k, 0.0);
  for (std::size_t e = 0; e + 1 < k; ++e) {
    double d = 0.0;
    for (std::size_t b = e + 1; b < k; ++b) d += w[e * k + b];
    if (!(d > 0.0)) return false;
    pivot[e] = d;
    for (std::size_t a = e + 1; a < k; ++a) {
      const double wae = w[a * k + e];
      if (wae == 0.0) continue;
      rhs[a] += wae * rhs[e] / d;
      for (std::size_t b = e + 1; b < k; ++b)
        if (b != a) w[a * k + b] += wae * w[e * k + b] / d;
    }
  }
  x.assign(k, 0.0);
  for (std::size_t e = k - 1; e-- > 0;) {
    double s = rhs[e];
    for (std::size_t b = e + 1; b < k; ++b) s += w[e * k + b] * x[b];
    x[e] = s / pivot[e];
  }
  return true;
}

double lp_norm_of_difference(std::span<const double> x, std::span<const double> y, double p) {
  double s = 0.0;
  if (p == 2.0) {
    for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
    return std::sqrt(s);
  }
  if (p == 1.0) {
    for (std::size_t k = 0; k < x.size(); ++k) s += std::abs(x[k] - y[k]);
    return s;
  }
  for (std::size_t k = 0; k < x.size(); ++k) s += std::pow(std::abs(x[k] - y[k]), p);
  return std::pow(s, 1.0 / p);
}

void check_measure(std::span<const double> w, const char* name) {
  require(!w.empty(), std::string("sinkhorn: empty marginal ") + name);
  double total = 0.0;
  for (double x : w) {
    require(x > 0.0 && std::isfinite(x), std::string("sinkhorn: marginal ") + name +
                                             " must be positive");
    total += x;
  }
  require(std::abs(total - 1.0) <= 1e-9, std::string("sinkhorn: marginal ") + name +
                                             " must sum to one");
}

// d|u_i - v_j|/du_i accumulated with plan weights into grad (d x m), using
// only the first grad.rows() coordinates of each column.
void accumulate_plan_gradient(const Matrix& u, const Matrix& v, const Matrix& weights, double p,
                              double scale, Matrix& grad_u, Matrix* grad_v) {
  const std::size_t d = grad_u.rows();
  std::vector<double> ui(u.rows()), vj(v.rows()), gi(d), gj(d);
  for (std::size_t i = 0; i < u.cols(); ++i) {
    for (std::size_t k = 0; k < u.rows(); ++k) ui[k] = u(k, i);
    for (std::size_t j = 0; j < v.cols(); ++j) {
      for (std::size_t k = 0; k < v.rows(); ++k) vj[k] = v(k, j);
      std::fill(gi.begin(), gi.end(), 0.0);
      add_lp_distance_gradient(ui, vj, p, scale * weights(i, j), gi);
      for (std::size_t k = 0; k < d; ++k) {
        grad_u(k, i) += gi[k];
        if (grad_v != nullptr) (*grad_v)(k, j) -= gi[k];
      }
    }
  }
}

// Projects an approximate plan onto the transport polytope: shrink rows that
// overshoot a, then columns that overshoot b, then spread the remaining
// deficit as a rank-one correction. The change in l1 is at most twice the
// marginal violation, so a converged plan is left essentially untouched while
// a stalled one becomes exactly feasible.
void round_to_marginals(Matrix& plan, std::span<const double> a, std::span<const double> b) {
  const std::size_t m = plan.rows();
  const std::size_t n = plan.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += plan(i, j);
    if (r > a[i])
      for (std::size_t j = 0; j < n; ++j) plan(i, j) *= a[i] / r;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < m; ++i) c += plan(i, j);
    if (c > b[j])
      for (std::size_t i = 0; i < m; ++i) plan(i, j) *= b[j] / c;
  }
  std::vector<double> err_r(m), err_c(n);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += plan(i, j);
    err_r[i] = std::max(0.0, a[i] - r);
    total += err_r[i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < m; ++i) c += plan(i, j);
    err_c[j] = std::max(0.0, b[j] - c);
  }
  if (total <= 0.0) return;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) plan(i, j) += err_r[i] * err_c[j] / total;
}

}  // namespace

void add_lp_distance_gradient(std::span<const double> x, std::span<const double> y, double p,
                       double weight, std::span<double> out) {
  if (weight == 0.0) return;
  const double norm = std::max(lp_norm_of_difference(x, y, p), kNormFloor);
  if (p == 2.0) {
    const double scale = weight / norm;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += scale * (x[k] - y[k]);
    return;
  }
  if (p == 1.0) {
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double diff = x[k] - y[k];
      out[k] += weight * static_cast<double>((diff > 0.0) - (diff < 0.0));
    }
    return;
  }
  const double scale = weight / std::pow(norm, p - 1.0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double diff = x[k] - y[k];
    const double sign = static_cast<double>((diff > 0.0) - (diff < 0.0));
    out[k] += scale * sign * std::pow(std::abs(diff), p - 1.0);
  }
}

PointCloud::PointCloud(Matrix f) : features(std::move(f)) {
  require(features.cols() > 0, "PointCloud: no points");
  masses.assign(features.cols(), 1.0 / static_cast<double>(features.cols()));
}

void OtConfig::validate() const {
  require(lambda > 0.0, "OtConfig: lambda must be > 0");
  require(p >= 1.0, "OtConfig: p must be >= 1");
  require(gamma >= 0.0, "OtConfig: gamma must be >= 0");
  require(tol > 0.0, "OtConfig: tol must be > 0");
  require(max_iter >= 1, "OtConfig: max_iter must be >= 1");
}

std::vector<double> normalized_positions(std::size_t length) {
  require(length >= 1, "normalized_positions: length must be >= 1");
  std::vector<double> s(length, 0.0);
  if (length == 1) return s;
  const double denom = static_cast<double>(length - 1);
  for (std::size_t i = 0; i < length; ++i) s[i] = static_cast<double>(i) / denom;
  return s;
}

PointCloud augment_positions(const PointCloud& cloud, double gamma) {
  require(gamma >= 0.0, "augment_positions: gamma must be >= 0");
  const std::size_t d = cloud.dim();
  const std::size_t m = cloud.size();
  const auto s = normalized_positions(m);
  Matrix out(d + 1, m);
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t i = 0; i < m; ++i) out(k, i) = cloud.features(k, i);
  for (std::size_t i = 0; i < m; ++i) out(d, i) = gamma * s[i];
  PointCloud result(std::move(out));
  result.masses = cloud.masses;
  return result;
}

double lp_distance(std::span<const double> x, std::span<const double> y, double p) {
  require(x.size() == y.size(), "lp_distance: dimension mismatch");
  require(p >= 1.0, "lp_distance: p must be >= 1");
  return lp_norm_of_difference(x, y, p);
}

Matrix lp_cost(const Matrix& u, const Matrix& v, double p) {
  require(u.rows() == v.rows(), "lp_cost: feature dimension mismatch");
  require(p >= 1.0, "lp_cost: p must be >= 1");
  const Matrix ut = u.transposed();
  const Matrix vt = v.transposed();
  Matrix cost(u.cols(), v.cols());
  for (std::size_t i = 0; i < u.cols(); ++i)
    for (std::size_t j = 0; j < v.cols(); ++j)
      cost(i, j) = lp_norm_of_difference(ut.row(i), vt.row(j), p);
  return cost;
}

Matrix pairwise_cost(const PointCloud& u, const PointCloud& v, double p, double gamma) {
  require(u.dim() == v.dim(), "pairwise_cost: feature dimension mismatch");
  require(p >= 1.0, "pairwise_cost: p must be >= 1");
  require(gamma >= 0.0, "pairwise_cost: gamma must be >= 0");
  const auto s = normalized_positions(u.size());
  const auto t = normalized_positions(v.size());
  Matrix cost(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      double feature_term = 0.0;
      for (std::size_t k = 0; k < u.dim(); ++k)
        feature_term += std::pow(std::abs(u.features(k, i) - v.features(k, j)), p);
      const double position_term = std::pow(gamma, p) * std::pow(std::abs(s[i] - t[j]), p);
      cost(i, j) = std::pow(feature_term + position_term, 1.0 / p);
    }
  }
  return cost;
}

TransportPlan sinkhorn(std::span<const double> a, std::span<const double> b, const Matrix& cost,
                       const OtConfig& cfg) {
  cfg.validate();
  check_measure(a, "a");
  check_measure(b, "b");
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  require(cost.rows() == m && cost.cols() == n, "sinkhorn: cost shape does not match marginals");
  require(cost.all_finite(), "sinkhorn: cost matrix has non-finite entries");

  const double lambda = cfg.lambda;
  std::vector<double> log_a(m), log_b(n);
  for (std::size_t i = 0; i < m; ++i) log_a[i] = std::log(a[i]);
  for (std::size_t j = 0; j < n; ++j) log_b[j] = std::log(b[j]);

  // Dual potentials; the plan is Z_ij = exp((f_i + g_j - C_ij) / lambda).
  std::vector<double> f(m, 0.0), g(n, 0.0), scratch(std::max(m, n));
  auto log_sweep = [&](double eps) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) scratch[j] = (g[j] - cost(i, j)) / eps;
      f[i] = eps * (log_a[i] - logsumexp(std::span<const double>(scratch.data(), n)));
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < m; ++i) scratch[i] = (f[i] - cost(i, j)) / eps;
      g[j] = eps * (log_b[j] - logsumexp(std::span<const double>(scratch.data(), m)));
    }
  };

  // Epsilon scaling: with lambda small against the cost range, a cold start
  // moves the potentials by O(lambda) per sweep. Anneal from the cost scale
  // down to lambda, halving each stage and warm-starting the next.
  std::size_t sweeps = 0;
  for (double eps = cost.max_abs() / 2.0; eps > lambda && sweeps < cfg.max_iter; eps /= 2.0)
    for (std::size_t k = 0; k < kStageSweeps && sweeps < cfg.max_iter; ++k, ++sweeps)
      log_sweep(eps);

  // Final stage at lambda: absorb the potentials into a stabilized kernel
  // K_ij = exp((f_i + g_j - C_ij) / lambda) and run scaling iterations
  // Z = diag(u) K diag(v). Marginals then converge to machine precision
  // instead of stalling at the round-off of (f + g - C) / lambda. The
  // scalings are folded back into f, g whenever they drift far from one.
  Matrix kernel(m, n);
  std::vector<double> u(m, 1.0), v(n, 1.0), kv(m), ktu(n);
  auto absorb = [&] {
    for (std::size_t i = 0; i < m; ++i) f[i] += lambda * std::log(u[i]);
    for (std::size_t j = 0; j < n; ++j) g[j] += lambda * std::log(v[j]);
    std::fill(u.begin(), u.end(), 1.0);
    std::fill(v.begin(), v.end(), 1.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) kernel(i, j) = std::exp((f[i] + g[j] - cost(i, j)) / lambda);
  };
  auto out_of_range = [](const std::vector<double>& x) {
    return std::any_of(x.begin(), x.end(),
                       [](double e) { return !(e < kAbsorbAbove && e > 1.0 / kAbsorbAbove); });
  };

  TransportPlan result;
  if (sweeps < cfg.max_iter) {
    // One log-domain sweep first so every kernel row holds an O(a_i) entry.
    log_sweep(lambda);
    absorb();
    ++sweeps;
    auto violation = [&] {
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += kernel(i, j) * v[j];
        kv[i] = s;
      }
      double worst = 0.0;
      for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, std::abs(u[i] * kv[i] - a[i]));
      return worst;
    };
    double current = violation();
    if (current <= cfg.tol) result.converged = true;

    // Scaling converges linearly and crawls when the plan is close to a
    // permutation (lambda small against the cost range). Newton steps on the
    // semi-dual in f, with g always the exact column normalization, finish
    // the job. That Hessian is a graph Laplacian over rows with weights
    // sum_j Z_ij Z_qj / colsum_j. A step is kept only if the row violation
    // drops, so the recorded history stays monotone; otherwise it is
    // shortened, then damped harder.
    // Row q = m is a virtual ground tied to each row i with weight mu * a_i
    // (Levenberg-Marquardt damping). It fixes the shift invariance and keeps
    // steps bounded along blocks the plan has almost disconnected.
    const std::size_t k = m + 1;
    std::vector<double> weights(k * k), base(k * k), rhs(k), rhs0(k), step(k), trial_f(m),
        trial_g(n), col_sum(n);
    auto trial_violation = [&](double t) {
      for (std::size_t i = 0; i < m; ++i) trial_f[i] = f[i] + t * step[i];
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) scratch[i] = (trial_f[i] - cost(i, j)) / lambda;
        trial_g[j] = lambda * (log_b[j] - logsumexp(std::span<const double>(scratch.data(), m)));
      }
      double worst = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += std::exp((trial_f[i] + trial_g[j] - cost(i, j)) / lambda);
        worst = std::max(worst, std::abs(s - a[i]));
      }
      return worst;
    };
    auto newton_step = [&] {
      absorb();  // kernel now holds the current plan
      std::fill(col_sum.begin(), col_sum.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) col_sum[j] += kernel(i, j);
      for (std::size_t i = 0; i < m; ++i) {
        double row = 0.0, col_term = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          row += kernel(i, j);
          col_term += kernel(i, j) * (b[j] - col_sum[j]) / col_sum[j];
        }
        rhs0[i] = lambda * (a[i] - row - col_term);
        base[i * k + i] = 0.0;
        for (std::size_t q = i + 1; q < m; ++q) {
          double w = 0.0;
          for (std::size_t j = 0; j < n; ++j) w += kernel(i, j) * kernel(q, j) / col_sum[j];
          base[i * k + q] = base[q * k + i] = w;
        }
      }
      rhs0[m] = 0.0;
      for (double mu = 1e-12; mu <= 1.0; mu *= 1e4) {
        weights = base;
        for (std::size_t i = 0; i < m; ++i) weights[i * k + m] = weights[m * k + i] = mu * a[i];
        weights[m * k + m] = 0.0;
        rhs = rhs0;
        if (!solve_grounded_laplacian(weights, rhs, k, step)) continue;
        for (double t = 1.0; t >= 0.25; t /= 2.0) {
          if (trial_violation(t) < current) {
            f = trial_f;
            g = trial_g;
            absorb();
            current = violation();
            return true;
          }
        }
      }
      return false;
    };

    std::size_t since_newton = 0;
    while (!result.converged && sweeps < cfg.max_iter) {
      if (++since_newton > kNewtonAfter) {
        since_newton = 0;
        for (std::size_t s = 0; s < kNewtonSteps && !result.converged && sweeps < cfg.max_iter; ++s) {
          if (!newton_step()) {
            current = violation();  // absorb() moved the state; refresh kv
            break;
          }
          ++sweeps;
          result.violation_history.push_back(current);
          if (current <= cfg.tol) result.converged = true;
        }
        continue;
      }
      for (std::size_t i = 0; i < m; ++i) u[i] = a[i] / kv[i];
      std::fill(ktu.begin(), ktu.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ktu[j] += kernel(i, j) * u[i];
      for (std::size_t j = 0; j < n; ++j) v[j] = b[j] / ktu[j];
      ++sweeps;
      if (out_of_range(u) || out_of_range(v)) absorb();
      current = violation();
      result.violation_history.push_back(current);
      if (current <= cfg.tol) result.converged = true;
    }
  }
  result.iterations = sweeps;

  result.plan = Matrix(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) result.plan(i, j) = u[i] * kernel(i, j) * v[j];
  round_to_marginals(result.plan, a, b);

  std::vector<double> row_sum(m, 0.0), col_sum(n, 0.0);
  double transport = 0.0;
  double entropic = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double z = result.plan(i, j);
      row_sum[i] += z;
      col_sum[j] += z;
      transport += z * cost(i, j);
      if (z > 0.0) entropic += z * (std::log(z) - 1.0);
    }
  }
  double error = 0.0;
  for (std::size_t i = 0; i < m; ++i) error = std::max(error, std::abs(row_sum[i] - a[i]));
  for (std::size_t j = 0; j < n; ++j) error = std::max(error, std::abs(col_sum[j] - b[j]));
  result.marginal_error = error;
  result.transport_cost = transport;
  result.objective = transport + lambda * entropic;
  return result;
}

double exact_ot_bruteforce(const Matrix& cost) {
  if (cost.rows() != cost.cols())
    throw LimitError("exact_ot_bruteforce: needs a square cost matrix (m = n)");
  const std::size_t n = cost.rows();
  if (n == 0 || n > 8)
    throw LimitError("exact_ot_bruteforce: n = " + std::to_string(n) + " outside 1..8");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

double exact_ot_bruteforce(const PointCloud& u, const PointCloud& v, double p) {
  if (u.size() != v.size()) throw LimitError("exact_ot_bruteforce: clouds differ in size");
  return exact_ot_bruteforce(lp_cost(u.features, v.features, p));
}

WassersteinResult wasserstein_loss(const Matrix& u, const Matrix& v, const OtConfig& cfg) {
  cfg.validate();
  require(u.rows() == v.rows(), "wasserstein_loss: feature dimension mismatch");
  const PointCloud cu(u);
  const PointCloud cv(v);
  const bool positional = cfg.gamma > 0.0;
  const Matrix au = positional ? augment_positions(cu, cfg.gamma).features : u;
  const Matrix av = positional ? augment_positions(cv, cfg.gamma).features : v;

  WassersteinResult out;
  out.grad_u = Matrix(u.rows(), u.cols());
  out.grad_v = Matrix(v.rows(), v.cols());

  out.plan = sinkhorn(cu.masses, cv.masses, lp_cost(au, av, cfg.p), cfg);
  out.value = out.plan.objective;
  out.converged = out.plan.converged;
  accumulate_plan_gradient(au, av, out.plan.plan, cfg.p, 1.0, out.grad_u, &out.grad_v);

  if (cfg.debias) {
    // dW(x,x)/dx_k = sum_j (Z_kj + Z_jk) d c(x_k, x_j) / dx_k.
    auto self_term = [&](const Matrix& x, const std::vector<double>& w, Matrix& grad) {
      const TransportPlan self = sinkhorn(w, w, lp_cost(x, x, cfg.p), cfg);
      out.value -= 0.5 * self.objective;
      out.converged = out.converged && self.converged;
      const Matrix symmetric = self.plan + self.plan.transposed();
      accumulate_plan_gradient(x, x, symmetric, cfg.p, -0.5, grad, nullptr);
    };
    self_term(au, cu.masses, out.grad_u);
    self_term(av, cv.masses, out.grad_v);
  }
  return out;
}

}  // namespace otalign
