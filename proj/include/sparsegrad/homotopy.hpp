// Copyright 2026 The sparsegrad Authors
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

// Homotopy (LARS with sign constraints) solver for basis pursuit denoising:
//
//   min ||z||_1  subject to  ||A z - y||_2 <= rho
//
// The solver follows the solution path of the penalized problem
// 0.5 ||A z - y||^2 + lambda ||z||_1 as lambda decreases from
// ||A^T y||_inf towards zero and stops at the first point on the path whose
// residual reaches rho. The active-set Gram matrix is kept as a Cholesky
// factor with rank-one updates and Givens downdates.

#ifndef SPARSEGRAD_HOMOTOPY_HPP_
#define SPARSEGRAD_HOMOTOPY_HPP_

#include <vector>

#include "sparsegrad/core.hpp"

namespace sparsegrad {

struct SolverOptions {
  double residual_tol = 0.0;  ///< rho; must be positive
  int max_steps = 0;          ///< breakpoint budget; 0 means 4 * m
  double kkt_tol = 1e-6;
};

struct SparseSolution {
  Vector z;
  std::vector<Index> support;   ///< sorted indices of nonzero entries of z
  double residual_norm = 0.0;   ///< ||A z - y|| against the requested data
  double lambda_final = 0.0;
  int path_steps = 0;
  bool converged = false;       ///< residual_norm <= residual_tol
  /// Data vector for which z is an exact path point at lambda_final. Equals y
  /// unless a warm start ran out of steps while still moving the data.
  Vector data;
  /// Active set in path order with its sign pattern. Can hold an index whose
  /// coefficient is still zero (it joined at the last breakpoint).
  std::vector<Index> active;
  std::vector<double> active_signs;
  /// Residual norm after every breakpoint, in path order.
  std::vector<double> breakpoint_residuals;
};

/// Full solve. Throws MaxStepsExceeded when the path needs more than
/// max_steps breakpoints and DegenerateStep when the active columns are
/// numerically dependent.
SparseSolution solve_bpdn(const Matrix& a, const Vector& y, const SolverOptions& options);

/// Resumes the path from `start`, spending at most `inner_steps` breakpoints.
/// When `start` was computed for different data, the data is first moved to
/// `y` at fixed lambda (each active-set change counts as a step). The result
/// may not meet the tolerance; inspect `converged`.
SparseSolution solve_bpdn_warm(const Matrix& a, const Vector& y, const SparseSolution& start,
                               int inner_steps, const SolverOptions& options);

/// Lasso optimality certificate at (z, lambda): on the support the
/// correlation A^T (y - A z) equals lambda * sign(z_j), elsewhere it is
/// bounded by lambda, all within tol.
bool kkt_check(const Matrix& a, const Vector& y, const Vector& z, double lambda, double tol);

/// Zero solution for data y (the top of the path).
SparseSolution zero_solution(const Matrix& a, const Vector& y);

}  // namespace sparsegrad

#endif  // SPARSEGRAD_HOMOTOPY_HPP_
