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

#include "sparsegrad/descent.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <string>

#include "sparsegrad/errors.hpp"
#include "sparsegrad/homotopy.hpp"
#include "sparsegrad/measurement.hpp"

namespace sparsegrad {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void check_start(const Objective& obj, const Vector& x0) {
  if (x0.size() != obj.dimension()) {
    throw DimensionMismatch("descent: x0 has length " + std::to_string(x0.size()) +
                            ", objective expects " + std::to_string(obj.dimension()));
  }
  if (!all_finite(x0)) throw InvalidArgument("descent: x0 must be finite");
}

std::int64_t calibration_cost(const Objective& obj, int probes) {
  if (probes <= 0) return 0;
  return obj.deterministic() ? 1 + 2 * probes : 3 * probes;
}

std::int64_t estimator_cost(const Objective& obj, const EstimatorConfig& cfg, int probes) {
  const std::int64_t k = cfg.k;
  return (obj.deterministic() ? k + 1 : 2 * k) + calibration_cost(obj, probes);
}

// Config for iteration n: fresh signs, same matrix, optional recalibration.
EstimatorConfig iteration_config(const Objective& obj, const Vector& x, const EstimatorConfig& cfg,
                                 const MeasurementMatrix& a, int n, int probes) {
  EstimatorConfig c = cfg;
  c.sign_seed = derive_seed(cfg.sign_seed, static_cast<std::uint64_t>(n));
  if (probes > 0) {
    c.relative_tol = 0.0;
    c.residual_tol = calibrate_tolerance(obj, x, c, a, probes);
  }
  return c;
}

void check_estimator(const EstimatorConfig& cfg, int probes) {
  if (probes > 0) {
    EstimatorConfig c = cfg;
    c.residual_tol = 1.0;  // replaced at every iterate
    c.validate();
  } else {
    cfg.validate();
  }
}

}  // namespace

double StepSchedule::operator()(int n) const {
  if (kind == Kind::kConstant) return a0;
  return a0 / (1.0 + static_cast<double>(n) / n0);
}

void StepSchedule::validate() const {
  if (!(a0 > 0.0)) throw InvalidArgument("step schedule: a0 must be positive");
  if (!(n0 > 0.0)) throw InvalidArgument("step schedule: n0 must be positive");
}

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kMaxIter: return "max_iter";
    case StopReason::kBudget: return "budget";
    case StopReason::kGradTol: return "g_tol";
    case StopReason::kTarget: return "target";
    case StopReason::kDiverged: return "diverged";
  }
  return "unknown";
}

const DescentRecord* DescentTrace::first_below(double value) const {
  for (const auto& r : records) {
    if (r.f <= value) return &r;
  }
  return nullptr;
}

NesterovState NesterovState::start(const Vector& z0) {
  NesterovState s;
  s.n = 1;
  s.lambda_prev = 0.0;
  s.lambda_cur = next_lambda(0.0);
  s.lambda_next = next_lambda(s.lambda_cur);
  s.gamma = (1.0 - s.lambda_cur) / s.lambda_next;
  s.z_prev = z0;
  return s;
}

void NesterovState::advance() {
  ++n;
  lambda_prev = lambda_cur;
  lambda_cur = lambda_next;
  lambda_next = next_lambda(lambda_cur);
  gamma = (1.0 - lambda_cur) / lambda_next;
}

DescentTrace run_descent(const Objective& obj, const Vector& x0, const StepSchedule& schedule,
                         const GradientOracle& oracle, const StopRule& stop, Update update,
                         const std::string& method, double momentum_scale) {
  check_start(obj, x0);
  schedule.validate();
  if (stop.max_iter < 0 || stop.eval_budget < 0) throw InvalidArgument("descent: bad stop rule");
  const auto start = Clock::now();
  const std::int64_t evals0 = obj.eval_count();

  DescentTrace trace;
  trace.method = method;
  Vector x = x0;
  trace.records.push_back({0, obj.peek(x), 0.0, 0.0, 0, 0.0});
  NesterovState nesterov = NesterovState::start(x0);
  double g0 = -1.0;
  int calm = 0;
  trace.stop_reason = StopReason::kMaxIter;

  if (stop.target_value && trace.records.back().f <= *stop.target_value) {
    trace.stop_reason = StopReason::kTarget;
    trace.x_final = x;
    return trace;
  }
  for (int n = 0;; ++n) {
    if (n >= stop.max_iter) {
      trace.stop_reason = StopReason::kMaxIter;
      break;
    }
    const std::int64_t spent = obj.eval_count() - evals0;
    if (stop.eval_budget > 0 && spent + oracle.cost > stop.eval_budget) {
      trace.stop_reason = StopReason::kBudget;
      break;
    }
    const Vector g = oracle.gradient(x, n);
    const double a = schedule(n);
    Vector next;
    if (update == Update::kPlain) {
      next = x - a * g;
    } else {
      Vector z = x - a * g;
      const double gamma = momentum_scale * nesterov.gamma;
      next = (1.0 - gamma) * z + gamma * nesterov.z_prev;
      nesterov.z_prev = std::move(z);
      nesterov.advance();
    }
    x = std::move(next);
    const double gnorm = g.norm();
    const double fx = obj.peek(x);
    trace.records.push_back({n + 1, fx, gnorm, a, obj.eval_count() - evals0, elapsed_ms(start)});
    if (!all_finite(x) || !std::isfinite(fx)) {
      trace.stop_reason = StopReason::kDiverged;
      break;
    }
    if (stop.target_value && fx <= *stop.target_value) {
      trace.stop_reason = StopReason::kTarget;
      break;
    }
    if (g0 < 0.0) g0 = gnorm;
    if (stop.g_tol > 0.0) {
      calm = gnorm <= stop.g_tol * g0 ? calm + 1 : 0;
      if (calm >= stop.patience) {
        trace.stop_reason = StopReason::kGradTol;
        break;
      }
    }
  }
  trace.x_final = x;
  return trace;
}

DescentTrace sgd_run(const Objective& obj, const Vector& x0, const StepSchedule& schedule,
                     const EstimatorConfig& cfg, const StopRule& stop, int calibration_probes) {
  check_estimator(cfg, calibration_probes);
  check_start(obj, x0);
  auto a = std::make_shared<MeasurementMatrix>(gaussian_matrix(cfg.m, x0.size(), cfg.matrix_seed));
  GradientOracle oracle;
  oracle.cost = estimator_cost(obj, cfg, calibration_probes);
  oracle.gradient = [&obj, &cfg, a, calibration_probes](const Vector& x, int n) {
    const auto c = iteration_config(obj, x, cfg, *a, n, calibration_probes);
    return estimate_gradient(obj, x, c, *a).g;
  };
  return run_descent(obj, x0, schedule, oracle, stop, Update::kPlain, "sgd");
}

DescentTrace nesterov_run(const Objective& obj, const Vector& x0, const StepSchedule& schedule,
                          const EstimatorConfig& cfg, const StopRule& stop,
                          int calibration_probes, double momentum_scale) {
  check_estimator(cfg, calibration_probes);
  check_start(obj, x0);
  auto a = std::make_shared<MeasurementMatrix>(gaussian_matrix(cfg.m, x0.size(), cfg.matrix_seed));
  GradientOracle oracle;
  oracle.cost = estimator_cost(obj, cfg, calibration_probes);
  oracle.gradient = [&obj, &cfg, a, calibration_probes](const Vector& x, int n) {
    const auto c = iteration_config(obj, x, cfg, *a, n, calibration_probes);
    return estimate_gradient(obj, x, c, *a).g;
  };
  return run_descent(obj, x0, schedule, oracle, stop, Update::kNesterov, "nesterov",
                     momentum_scale);
}

DescentTrace adaptive_run(const Objective& obj, const Vector& x0, const StepSchedule& schedule,
                          const EstimatorConfig& cfg, int inner_steps, const StopRule& stop,
                          int calibration_probes) {
  if (inner_steps < 1) throw InvalidArgument("adaptive_run: inner_steps must be >= 1");
  check_estimator(cfg, calibration_probes);
  check_start(obj, x0);
  auto a = std::make_shared<MeasurementMatrix>(gaussian_matrix(cfg.m, x0.size(), cfg.matrix_seed));
  auto path = std::make_shared<SparseSolution>();
  GradientOracle oracle;
  oracle.cost = estimator_cost(obj, cfg, calibration_probes);
  oracle.gradient = [&obj, &cfg, a, path, inner_steps, calibration_probes](const Vector& x, int n) {
    const auto c = iteration_config(obj, x, cfg, *a, n, calibration_probes);
    const auto batch = sp_measure_averaged(obj, x, *a, c.delta_at(x), c.k, c.sign_seed);
    SolverOptions options;
    options.residual_tol = c.tolerance_for(batch.y_bar);
    options.max_steps = c.max_steps;
    options.kkt_tol = c.kkt_tol;
    if (path->z.size() == 0) *path = zero_solution(a->entries, batch.y_bar);
    try {
      *path = solve_bpdn_warm(a->entries, batch.y_bar, *path, inner_steps, options);
    } catch (const MaxStepsExceeded& e) {
      throw RecoveryFailed(std::string("adaptive_run: ") + e.what());
    } catch (const DegenerateStep& e) {
      throw RecoveryFailed(std::string("adaptive_run: ") + e.what());
    }
    return path->z;
  };
  return run_descent(obj, x0, schedule, oracle, stop, Update::kPlain, "adaptive");
}

DescentTrace kiefer_wolfowitz_run(const Objective& obj, const Vector& x0,
                                  const StepSchedule& schedule, double delta, const StopRule& stop) {
  check_start(obj, x0);
  if (!(delta > 0.0)) throw InvalidArgument("kiefer_wolfowitz_run: delta must be positive");
  GradientOracle oracle;
  oracle.cost = 2 * obj.dimension();
  oracle.gradient = [&obj, delta](const Vector& x, int) { return central_fd(obj, x, delta); };
  return run_descent(obj, x0, schedule, oracle, stop, Update::kPlain, "kw");
}

DescentTrace exact_gradient_run(const Objective& obj, const Vector& x0,
                                const StepSchedule& schedule,
                                const std::function<Vector(const Vector&)>& gradient,
                                const StopRule& stop, Update update) {
  if (!gradient) throw InvalidArgument("exact_gradient_run: no gradient");
  GradientOracle oracle;
  oracle.gradient = [&gradient](const Vector& x, int) { return gradient(x); };
  return run_descent(obj, x0, schedule, oracle, stop, update,
                     update == Update::kPlain ? "exact" : "exact_nesterov");
}

DescentTrace perturbed_gradient_run(const Objective& obj, const Vector& x0,
                                    const StepSchedule& schedule,
                                    const std::function<Vector(const Vector&)>& gradient,
                                    double eps0, std::uint64_t seed, const StopRule& stop) {
  if (!gradient) throw InvalidArgument("perturbed_gradient_run: no gradient");
  if (!(eps0 >= 0.0)) throw InvalidArgument("perturbed_gradient_run: eps0 must be >= 0");
  Rng rng(seed);
  Vector u(x0.size());
  for (Index i = 0; i < u.size(); ++i) u(i) = rng.normal();
  u.normalize();
  const Vector bias = eps0 * u;
  GradientOracle oracle;
  oracle.gradient = [&gradient, bias](const Vector& x, int) { return Vector(gradient(x) + bias); };
  return run_descent(obj, x0, schedule, oracle, stop, Update::kPlain, "perturbed");
}

}  // namespace sparsegrad
