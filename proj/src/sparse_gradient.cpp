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

#include "sparsegrad/sparse_gradient.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sparsegrad/errors.hpp"

namespace sparsegrad {
namespace {

// Stream id that separates calibration probes from the measurement signs.
constexpr std::uint64_t kCalibrationStream = 0xC0FFEE5EEDULL;

void check_point(const Objective& obj, const Vector& x) {
  if (x.size() != obj.dimension()) {
    throw DimensionMismatch("estimator: point length " + std::to_string(x.size()) +
                            " does not match objective dimension " +
                            std::to_string(obj.dimension()));
  }
}

}  // namespace

void EstimatorConfig::validate() const {
  if (m < 1) throw InvalidArgument("estimator: m must be >= 1");
  if (k < 1) throw InvalidArgument("estimator: k must be >= 1");
  if (!(residual_tol > 0.0) && !(relative_tol > 0.0)) {
    throw InvalidArgument("estimator: residual_tol (or relative_tol) must be positive");
  }
  if (relative_tol < 0.0 || residual_tol < 0.0) {
    throw InvalidArgument("estimator: tolerances must be nonnegative");
  }
  if (max_steps < 0) throw InvalidArgument("estimator: max_steps must be >= 0");
  if (!(kkt_tol > 0.0)) throw InvalidArgument("estimator: kkt_tol must be positive");
}

double EstimatorConfig::tolerance_for(const Vector& y_bar) const {
  const double rho = relative_tol > 0.0 ? relative_tol * y_bar.norm() : residual_tol;
  return std::max(rho, std::numeric_limits<double>::min());
}

Vector recover_gradient(const Matrix& a, const Vector& y_bar, const EstimatorConfig& cfg,
                        SparseSolution* solution) {
  SolverOptions options;
  options.residual_tol = cfg.tolerance_for(y_bar);
  options.max_steps = cfg.max_steps;
  options.kkt_tol = cfg.kkt_tol;
  SparseSolution sol;
  try {
    sol = solve_bpdn(a, y_bar, options);
  } catch (const MaxStepsExceeded& e) {
    throw RecoveryFailed(std::string("gradient recovery failed: ") + e.what());
  } catch (const DegenerateStep& e) {
    throw RecoveryFailed(std::string("gradient recovery failed: ") + e.what());
  }
  Vector g = sol.z;
  if (cfg.refit && !sol.support.empty()) {
    Matrix sub(a.rows(), static_cast<Index>(sol.support.size()));
    for (std::size_t j = 0; j < sol.support.size(); ++j) {
      sub.col(static_cast<Index>(j)) = a.col(sol.support[j]);
    }
    const Vector coef = sub.colPivHouseholderQr().solve(y_bar);
    g.setZero();
    for (std::size_t j = 0; j < sol.support.size(); ++j) g(sol.support[j]) = coef(static_cast<Index>(j));
  }
  if (solution != nullptr) *solution = std::move(sol);
  return g;
}

GradientEstimate estimate_gradient(const Objective& obj, const Vector& x,
                                   const EstimatorConfig& cfg) {
  cfg.validate();
  check_point(obj, x);
  return estimate_gradient(obj, x, cfg, gaussian_matrix(cfg.m, x.size(), cfg.matrix_seed));
}

GradientEstimate estimate_gradient(const Objective& obj, const Vector& x,
                                   const EstimatorConfig& cfg, const MeasurementMatrix& a) {
  cfg.validate();
  check_point(obj, x);
  if (a.m() != cfg.m || a.n() != x.size()) {
    throw DimensionMismatch("estimate_gradient: matrix shape does not match config");
  }
  GradientEstimate est;
  est.config = cfg;
  est.delta = cfg.delta_at(x);
  const auto batch = sp_measure_averaged(obj, x, a, est.delta, cfg.k, cfg.sign_seed);
  SparseSolution sol;
  est.g = recover_gradient(a.entries, batch.y_bar, cfg, &sol);
  est.residual_tol = cfg.tolerance_for(batch.y_bar);
  est.residual_norm = (a.entries * est.g - batch.y_bar).norm();
  est.path_steps = sol.path_steps;
  for (Index i = 0; i < est.g.size(); ++i) {
    if (est.g(i) != 0.0) est.support.push_back(i);
  }
  est.evals_used = batch.evals_used;
  est.y_bar = batch.y_bar;
  return est;
}

double calibrate_tolerance(const Objective& obj, const Vector& x, const EstimatorConfig& cfg,
                           int probes) {
  check_point(obj, x);
  if (cfg.m < 1) throw InvalidArgument("calibrate_tolerance: m must be >= 1");
  return calibrate_tolerance(obj, x, cfg, gaussian_matrix(cfg.m, x.size(), cfg.matrix_seed),
                             probes);
}

double calibrate_tolerance(const Objective& obj, const Vector& x, const EstimatorConfig& cfg,
                           const MeasurementMatrix& a, int probes) {
  check_point(obj, x);
  if (probes < 2) throw InvalidArgument("calibrate_tolerance: need at least 2 probes");
  if (cfg.k < 1) throw InvalidArgument("calibrate_tolerance: k must be >= 1");
  if (a.n() != x.size()) throw DimensionMismatch("calibrate_tolerance: matrix has wrong width");
  const Index m = a.m();
  const double delta = cfg.delta_at(x);
  const std::uint64_t stream = derive_seed(cfg.sign_seed, kCalibrationStream);

  std::optional<double> base;
  if (obj.deterministic()) base = obj.evaluate(x);

  Vector sum = Vector::Zero(m);
  Vector sum2 = Vector::Zero(m);
  double curvature = 0.0;
  for (int p = 0; p < probes; ++p) {
    const auto signs = rademacher_signs(m, derive_seed(stream, static_cast<std::uint64_t>(p)));
    const Vector step = delta * (a.entries.transpose() * signs.signs);
    const double f0 = base.has_value() ? *base : obj.evaluate(x);
    const double f_plus = obj.evaluate(x + step);
    const double f_minus = obj.evaluate(x - step);
    const Vector y = ((f_plus - f0) / delta) * signs.signs;
    sum += y;
    sum2 += y.cwiseProduct(y);
    // |f(x+p) - 2 f(x) + f(x-p)| / (2 delta) bounds the O(delta) part of
    // every entry of y along this direction.
    curvature = std::max(curvature, std::abs(f_plus - 2.0 * f0 + f_minus) / (2.0 * delta));
  }
  const double count = static_cast<double>(probes);
  const Vector mean = sum / count;
  const Vector var =
      ((sum2 - count * mean.cwiseProduct(mean)) / (count - 1.0)).cwiseMax(0.0);
  const double noise = std::sqrt(var.sum() / static_cast<double>(cfg.k));
  const double tol = std::max(noise, 2.0 * static_cast<double>(m) * curvature);
  return std::max(tol, std::numeric_limits<double>::min());
}

namespace {

double eq2_rhs(Index s, Index n, double epsilon, double tau) {
  const double sd = static_cast<double>(s);
  const double term = std::sqrt(std::log(std::exp(1.0) * static_cast<double>(n) / sd)) +
                      std::sqrt(std::log(1.0 / epsilon) / sd) + tau / std::sqrt(sd);
  return 2.0 * sd * term * term;
}

bool eq2_holds(Index m, double rhs) {
  const double md = static_cast<double>(m);
  return md * md / (md + 1.0) >= rhs;
}

}  // namespace

Index min_measurements(Index s, Index n, double epsilon, double tau) {
  if (s < 1 || n < s) throw InvalidArgument("min_measurements: need 1 <= s <= n");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw InvalidArgument("min_measurements: epsilon must be in (0, 1)");
  }
  if (!(tau > 0.0)) throw InvalidArgument("min_measurements: tau must be positive");
  const double rhs = eq2_rhs(s, n, epsilon, tau);
  // m^2 / (m + 1) >= R  <=>  m >= (R + sqrt(R^2 + 4R)) / 2; then fix rounding.
  Index m = std::max<Index>(1, static_cast<Index>(std::ceil((rhs + std::sqrt(rhs * rhs + 4.0 * rhs)) / 2.0)));
  while (m > 1 && eq2_holds(m - 1, rhs)) --m;
  while (!eq2_holds(m, rhs)) ++m;
  return m;
}

std::int64_t min_repetitions(Index m, double c, double t, double epsilon) {
  if (m < 1) throw InvalidArgument("min_repetitions: m must be >= 1");
  if (!(c > 0.0) || !(t > 0.0)) throw InvalidArgument("min_repetitions: C and t must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw InvalidArgument("min_repetitions: epsilon must be in (0, 1)");
  }
  const double md = static_cast<double>(m);
  const double bound = 2.0 * md * md * md * c * c / (t * t) * std::log(2.0 / epsilon);
  if (!(bound < 9.0e18)) throw InvalidArgument("min_repetitions: bound overflows a 64-bit count");
  return static_cast<std::int64_t>(std::floor(bound)) + 1;
}

AdvisorReport advise(Index s, Index n, double epsilon, double tau, double c, double t,
                     double k_const, double delta) {
  if (k_const < 0.0 || delta < 0.0) throw InvalidArgument("advise: K and delta must be >= 0");
  AdvisorReport report;
  report.s = s;
  report.n = n;
  report.epsilon = epsilon;
  report.tau = tau;
  report.c = c;
  report.k_const = k_const;
  report.delta = delta;
  report.t = t;
  report.m_min = min_measurements(s, n, epsilon, tau);
  report.k_min = min_repetitions(report.m_min, c, t, epsilon);
  report.t_floor = 2.0 * static_cast<double>(report.m_min) * k_const * delta;
  report.t_admissible = t > report.t_floor;
  return report;
}

}  // namespace sparsegrad
