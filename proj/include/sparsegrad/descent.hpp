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

// Gradient descent driven by estimated gradients: plain SGD, the Nesterov
// variant, the adaptive variant that advances a warm-started homotopy path
// by a few breakpoints per iteration, and finite-difference and exact
// gradient baselines.

#ifndef SPARSEGRAD_DESCENT_HPP_
#define SPARSEGRAD_DESCENT_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sparsegrad/core.hpp"
#include "sparsegrad/objective.hpp"
#include "sparsegrad/sparse_gradient.hpp"

namespace sparsegrad {

struct StepSchedule {
  enum class Kind { kHarmonic, kConstant };
  Kind kind = Kind::kHarmonic;
  double a0 = 0.1;
  double n0 = 10.0;

  /// a(n) = a0 / (1 + n / n0), or a0 for the constant stub.
  double operator()(int n) const;
  void validate() const;

  static StepSchedule harmonic(double a0, double n0) { return {Kind::kHarmonic, a0, n0}; }
  static StepSchedule constant(double a0) { return {Kind::kConstant, a0, 1.0}; }
};

struct StopRule {
  int max_iter = 100000;
  /// Evaluation budget; 0 disables it. An iteration is only started when its
  /// predicted cost still fits.
  std::int64_t eval_budget = 100000;
  /// Stop once |g| <= g_tol * |g_0| for `patience` consecutive iterations;
  /// 0 disables it.
  double g_tol = 1e-4;
  int patience = 3;
  /// Stop as soon as the (noise-free) objective drops to this value.
  std::optional<double> target_value;
};

enum class StopReason { kMaxIter, kBudget, kGradTol, kTarget, kDiverged };
const char* to_string(StopReason reason);

struct DescentRecord {
  int n = 0;
  double f = 0.0;          ///< noise-free f(x(n)), not counted as an evaluation
  double grad_norm = 0.0;  ///< norm of the direction that produced x(n)
  double step = 0.0;       ///< a(n - 1)
  std::int64_t evals = 0;  ///< cumulative evaluations spent by the method
  double wall_ms = 0.0;    ///< cumulative, monotonic clock
};

struct DescentTrace {
  std::string method;
  std::vector<DescentRecord> records;
  Vector x_final;
  StopReason stop_reason = StopReason::kMaxIter;

  int iterations() const { return records.empty() ? 0 : records.back().n; }
  /// First record with f <= value, if any.
  const DescentRecord* first_below(double value) const;
};

/// Nesterov sequences: lambda(0) = 0, lambda(n) = (1 + sqrt(1 + 4 lambda(n-1)^2)) / 2
/// and gamma(n) = (1 - lambda(n)) / lambda(n + 1).
struct NesterovState {
  int n = 1;
  double lambda_prev = 0.0;  ///< lambda(n - 1)
  double lambda_cur = 1.0;   ///< lambda(n)
  double lambda_next = 0.0;  ///< lambda(n + 1)
  double gamma = 0.0;        ///< gamma(n)
  Vector z_prev;             ///< z(n)

  static double next_lambda(double lambda) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * lambda * lambda)); }
  /// State at n = 1: lambda(0) = 0, lambda(1) = 1, gamma(1) = 0.
  static NesterovState start(const Vector& z0);
  void advance();
};

/// Gradient source used by the generic loop. `cost` predicts the
/// evaluations one call will spend (for the budget check).
struct GradientOracle {
  std::function<Vector(const Vector& x, int n)> gradient;
  std::int64_t cost = 0;
};

enum class Update { kPlain, kNesterov };

/// Shared loop: x(n+1) = x(n) - a(n) g(x(n)) for kPlain; for kNesterov
/// z(n+1) = x(n) - a(n) g(x(n)), x(n+1) = (1 - c gamma) z(n+1) + c gamma z(n)
/// with c = momentum_scale. gamma is indexed from n = 1, so the first step is
/// a plain gradient step.
DescentTrace run_descent(const Objective& obj, const Vector& x0, const StepSchedule& schedule,
                         const GradientOracle& oracle, const StopRule& stop, Update update,
                         const std::string& method, double momentum_scale = 1.0);

/// SGD with the sparse estimator. A = gaussian_matrix(m, n, matrix_seed) is
/// drawn once; iteration n uses signs from derive_seed(sign_seed, n). With
/// calibration_probes > 0 the tolerance is recalibrated at every iterate.
DescentTrace sgd_run(const Objective& obj, const Vector& x0, const StepSchedule& schedule,
                     const EstimatorConfig& cfg, const StopRule& stop, int calibration_probes = 0);

DescentTrace nesterov_run(const Objective& obj, const Vector& x0, const StepSchedule& schedule,
                          const EstimatorConfig& cfg, const StopRule& stop,
                          int calibration_probes = 0, double momentum_scale = 1.0);

/// Keeps one homotopy solution across iterations and moves it at most
/// `inner_steps` breakpoints towards the solution for each new measurement.
DescentTrace adaptive_run(const Objective& obj, const Vector& x0, const StepSchedule& schedule,
                          const EstimatorConfig& cfg, int inner_steps, const StopRule& stop,
                          int calibration_probes = 0);

/// Central differences at every iterate (2n evaluations per step).
DescentTrace kiefer_wolfowitz_run(const Objective& obj, const Vector& x0,
                                  const StepSchedule& schedule, double delta, const StopRule& stop);

/// Analytic gradient; spends no evaluations.
DescentTrace exact_gradient_run(const Objective& obj, const Vector& x0,
                                const StepSchedule& schedule,
                                const std::function<Vector(const Vector&)>& gradient,
                                const StopRule& stop, Update update = Update::kPlain);

/// Analytic gradient plus a fixed perturbation of norm eps0 along a unit
/// direction drawn from `seed`. Models an estimator with bounded error.
DescentTrace perturbed_gradient_run(const Objective& obj, const Vector& x0,
                                    const StepSchedule& schedule,
                                    const std::function<Vector(const Vector&)>& gradient,
                                    double eps0, std::uint64_t seed, const StopRule& stop);

}  // namespace sparsegrad

#endif  // SPARSEGRAD_DESCENT_HPP_
