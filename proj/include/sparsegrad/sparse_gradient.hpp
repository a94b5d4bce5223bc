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

// Gradient estimation: average SP measurements of A grad f, then recover the
// sparse gradient with the homotopy solver. Also the parameter advisor for
// the measurement count m and the repetition count k.

#ifndef SPARSEGRAD_SPARSE_GRADIENT_HPP_
#define SPARSEGRAD_SPARSE_GRADIENT_HPP_

#include <cstdint>
#include <vector>

#include "sparsegrad/core.hpp"
#include "sparsegrad/homotopy.hpp"
#include "sparsegrad/measurement.hpp"
#include "sparsegrad/objective.hpp"

namespace sparsegrad {

struct EstimatorConfig {
  Index m = 0;
  int k = 1;
  /// SP step. Zero or negative selects default_delta(x) at every point.
  double delta = 0.0;
  /// Absolute residual bound rho handed to the solver.
  double residual_tol = 0.0;
  /// When positive, rho = relative_tol * ||y_bar|| instead. Descent uses this
  /// because the scale of A grad f changes along the run.
  double relative_tol = 0.0;
  std::uint64_t matrix_seed = 0;
  std::uint64_t sign_seed = 1;
  int max_steps = 0;
  double kkt_tol = 1e-6;
  /// Least-squares refit on the recovered support. Off by default.
  bool refit = false;

  /// Throws InvalidArgument on m < 1, k < 1 or a missing tolerance.
  void validate() const;
  double delta_at(const Vector& x) const { return delta > 0.0 ? delta : default_delta(x); }
  /// Tolerance that will be used for a given measurement vector.
  double tolerance_for(const Vector& y_bar) const;
};

struct GradientEstimate {
  Vector g;
  std::vector<Index> support;
  double residual_norm = 0.0;
  EstimatorConfig config;
  std::int64_t evals_used = 0;
  double delta = 0.0;         ///< step actually used
  double residual_tol = 0.0;  ///< rho actually used
  int path_steps = 0;
  Vector y_bar;
};

/// Measure with A = gaussian_matrix(m, n, matrix_seed) and recover. Solver
/// failures are rethrown as RecoveryFailed.
GradientEstimate estimate_gradient(const Objective& obj, const Vector& x,
                                   const EstimatorConfig& cfg);
/// Same, with a prebuilt matrix (descent keeps A for the whole run).
GradientEstimate estimate_gradient(const Objective& obj, const Vector& x,
                                   const EstimatorConfig& cfg, const MeasurementMatrix& a);

/// Recovery step alone: BPDN on (A, y_bar) plus the optional refit.
Vector recover_gradient(const Matrix& a, const Vector& y_bar, const EstimatorConfig& cfg,
                        SparseSolution* solution = nullptr);

/// Residual tolerance from `probes` extra SP draws. The spread of single-shot
/// measurements estimates the per-entry noise; the tolerance is that noise
/// norm divided by sqrt(k), clamped below by 2 m K delta with K taken from
/// second differences along the probe directions. Costs 1 + 2 * probes
/// evaluations for a deterministic objective (3 * probes if noisy).
double calibrate_tolerance(const Objective& obj, const Vector& x, const EstimatorConfig& cfg,
                           int probes);
double calibrate_tolerance(const Objective& obj, const Vector& x, const EstimatorConfig& cfg,
                           const MeasurementMatrix& a, int probes);

/// Least m with m^2 / (m + 1) >= 2 s (sqrt(log(e n / s)) + sqrt(log(1/eps) / s)
/// + tau / sqrt(s))^2.
Index min_measurements(Index s, Index n, double epsilon, double tau);

/// Least integer strictly greater than 2 m^3 C^2 / t^2 * log(2 / eps).
std::int64_t min_repetitions(Index m, double c, double t, double epsilon);

struct AdvisorReport {
  Index m_min = 0;
  std::int64_t k_min = 0;
  // echoed inputs
  Index s = 0;
  Index n = 0;
  double epsilon = 0.0;
  double tau = 0.0;
  double c = 0.0;
  double k_const = 0.0;  ///< K, the O(delta) constant
  double delta = 0.0;
  double t = 0.0;
  /// 2 m K delta; the repetition bound needs t above it.
  double t_floor = 0.0;
  bool t_admissible = true;
};

/// m_min for (s, n, eps, tau), then k_min at m = m_min for (C, t, eps).
AdvisorReport advise(Index s, Index n, double epsilon, double tau, double c, double t,
                     double k_const = 0.0, double delta = 0.0);

}  // namespace sparsegrad

#endif  // SPARSEGRAD_SPARSE_GRADIENT_HPP_
