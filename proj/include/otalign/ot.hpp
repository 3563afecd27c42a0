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
#include <span>
#include <vector>

#include "otalign/matrix.hpp"

namespace otalign {

// Discrete measure: one point per column of a d x m feature matrix, with
// uniform masses 1/m.
struct PointCloud {
  Matrix features;
  std::vector<double> masses;

  explicit PointCloud(Matrix features);
  std::size_t size() const { return features.cols(); }
  std::size_t dim() const { return features.rows(); }
};

struct OtConfig {
  double lambda = 1.0;  // entropic weight, > 0
  double p = 2.0;       // order of the ground cost norm, >= 1
  double gamma = 1.0;   // weight of the positional coordinate, >= 0
  std::size_t max_iter = 5000;
  double tol = 1e-9;    // stop once the max marginal violation is below this
  bool debias = true;

  void validate() const;
};

struct TransportPlan {
  Matrix plan;                 // m x n, nonnegative
  double transport_cost = 0.0; // <C, Z>
  double objective = 0.0;      // <C, Z> - lambda * H(Z), H(Z) = -sum Z (log Z - 1)
  std::size_t iterations = 0;
  bool converged = false;
  double marginal_error = 0.0; // max(|Z 1 - a|_inf, |Z^T 1 - b|_inf)
  // Max marginal violation measured after each full sweep.
  std::vector<double> violation_history;
};

// Positions (i - 1) / (L - 1) for i = 1..L; a single element sits at 0.
std::vector<double> normalized_positions(std::size_t length);

// Appends gamma * s_i as an extra feature row.
PointCloud augment_positions(const PointCloud& cloud, double gamma);

// |x - y|_p for two equally sized vectors.
double lp_distance(std::span<const double> x, std::span<const double> y, double p);

// out[k] += weight * d|x - y|_p / dx_k for k < out.size(). Trailing
// coordinates of x and y (positions) enter the norm only. The norm is floored
// at 1e-12, which makes the gradient zero at coincident points.
void add_lp_distance_gradient(std::span<const double> x, std::span<const double> y, double p,
                              double weight, std::span<double> out);

// Plain ground cost C_ij = |u_i - v_j|_p between the columns of u and v.
Matrix lp_cost(const Matrix& u, const Matrix& v, double p);

// Position-aware cost evaluated directly:
//   C_ij = (|u_i - v_j|_p^p + gamma^p |s_i - t_j|^p)^(1/p).
Matrix pairwise_cost(const PointCloud& u, const PointCloud& v, double p, double gamma);

// Log-domain Sinkhorn on the Gibbs kernel exp(-C / lambda). Each sweep
// updates the row potential then the column potential, so column marginals
// are exact after every sweep and the reported violation is the row one.
TransportPlan sinkhorn(std::span<const double> a, std::span<const double> b, const Matrix& cost,
                       const OtConfig& cfg);

// Exact uniform-mass OT on a square cost matrix by scanning all permutations
// (Birkhoff: some permutation is optimal). n <= 8.
double exact_ot_bruteforce(const Matrix& cost);
double exact_ot_bruteforce(const PointCloud& u, const PointCloud& v, double p);

struct WassersteinResult {
  double value = 0.0;
  Matrix grad_u;          // d x m
  Matrix grad_v;          // d x n
  TransportPlan plan;     // plan of the cross term W(u, v)
  bool converged = true;  // all Sinkhorn solves converged
};

// Entropic Wasserstein loss between the columns of u and v. Positions are
// appended with weight cfg.gamma (gamma = 0 leaves the cost unchanged). With
// cfg.debias the value is W(u,v) - W(u,u)/2 - W(v,v)/2. Gradients use the
// envelope property dW/dC = Z*, so they are exact only at convergence.
WassersteinResult wasserstein_loss(const Matrix& u, const Matrix& v, const OtConfig& cfg);

}  // namespace otalign
