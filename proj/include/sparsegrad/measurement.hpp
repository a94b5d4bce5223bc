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

// Simultaneous-perturbation (SP) measurements of A * grad f(x).
//
// One SP draw perturbs x along p = delta * sum_j Delta_j a_j and forms
//
//   y_i = (f(x + p) - f(x)) / (delta * Delta_i),   i = 1..m,
//
// which equals <grad f, a_i> plus zero-mean cross terms
// sum_{j != i} (Delta_j / Delta_i) <grad f, a_j> and an O(delta) remainder.

#ifndef SPARSEGRAD_MEASUREMENT_HPP_
#define SPARSEGRAD_MEASUREMENT_HPP_

#include <cstdint>
#include <optional>

#include "sparsegrad/core.hpp"
#include "sparsegrad/objective.hpp"

namespace sparsegrad {

struct MeasurementBatch {
  Vector y_bar;                 ///< averaged measurements, length m
  int k = 0;                    ///< repetitions
  double delta = 0.0;
  std::int64_t evals_used = 0;  ///< k + 1 (deterministic f) or 2k (noisy f)
  std::uint64_t matrix_seed = 0;
  std::uint64_t sign_seed = 0;
};

/// Default SP step, 1e-3 * (1 + ||x||).
double default_delta(const Vector& x);

/// One SP draw. Evaluates f at x + delta * A^T signs, plus f(x) unless
/// `f_base` is supplied.
Vector sp_measure_once(const Objective& obj, const Vector& x, const MeasurementMatrix& a,
                       double delta, const PerturbationSigns& signs,
                       std::optional<double> f_base = std::nullopt);

/// Average of k independent SP draws with A fixed. Repetition l uses the
/// signs rademacher_signs(m, derive_seed(seed, l)). Deterministic objectives
/// share one f(x) evaluation; noisy ones re-evaluate f(x) per repetition.
MeasurementBatch sp_measure_averaged(const Objective& obj, const Vector& x,
                                     const MeasurementMatrix& a, double delta, int k,
                                     std::uint64_t seed);

/// Classic SPSA gradient estimate with Delta in {+-1}^n, one-sided
/// differences, averaged over k draws.
Vector naive_sp_estimate(const Objective& obj, const Vector& x, double delta, int k,
                         std::uint64_t seed);

/// Central finite differences; 2n evaluations.
Vector central_fd(const Objective& obj, const Vector& x, double delta);

}  // namespace sparsegrad

#endif  // SPARSEGRAD_MEASUREMENT_HPP_
