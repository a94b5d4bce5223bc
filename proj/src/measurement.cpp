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

#include "sparsegrad/measurement.hpp"

#include <string>
#include <vector>

#include "sparsegrad/errors.hpp"
#include "sparsegrad/parallel.hpp"

namespace sparsegrad {
namespace {

void check_point(const Objective& obj, const Vector& x) {
  if (x.size() != obj.dimension()) {
    throw DimensionMismatch("measurement: point length " + std::to_string(x.size()) +
                            " does not match objective dimension " +
                            std::to_string(obj.dimension()));
  }
}

void check_delta(double delta) {
  if (!(delta > 0.0)) throw InvalidArgument("measurement: delta must be positive");
}

void check_repetitions(int k) {
  if (k < 1) throw InvalidArgument("measurement: k must be >= 1");
}

int jobs_for(const Objective& obj) { return obj.reentrant() ? hardware_jobs() : 1; }

}  // namespace

double default_delta(const Vector& x) { return 1e-3 * (1.0 + x.norm()); }

Vector sp_measure_once(const Objective& obj, const Vector& x, const MeasurementMatrix& a,
                       double delta, const PerturbationSigns& signs,
                       std::optional<double> f_base) {
  check_point(obj, x);
  check_delta(delta);
  if (a.n() != x.size()) throw DimensionMismatch("sp_measure_once: matrix has wrong width");
  if (signs.size() != a.m()) throw DimensionMismatch("sp_measure_once: need one sign per row");
  const Vector probe = x + delta * (a.entries.transpose() * signs.signs);
  const double f_plus = obj.evaluate(probe);
  const double f_zero = f_base.has_value() ? *f_base : obj.evaluate(x);
  // 1 / Delta_i == Delta_i for Rademacher signs.
  return ((f_plus - f_zero) / delta) * signs.signs;
}

MeasurementBatch sp_measure_averaged(const Objective& obj, const Vector& x,
                                     const MeasurementMatrix& a, double delta, int k,
                                     std::uint64_t seed) {
  check_point(obj, x);
  check_delta(delta);
  check_repetitions(k);
  if (a.n() != x.size()) throw DimensionMismatch("sp_measure_averaged: matrix has wrong width");
  const std::int64_t before = obj.eval_count();
  const bool reuse_base = obj.deterministic();
  std::optional<double> base;
  if (reuse_base) base = obj.evaluate(x);

  std::vector<Vector> draws(static_cast<std::size_t>(k));
  parallel_for(k, jobs_for(obj), [&](int l) {
    const auto signs = rademacher_signs(a.m(), derive_seed(seed, static_cast<std::uint64_t>(l)));
    draws[static_cast<std::size_t>(l)] = sp_measure_once(obj, x, a, delta, signs, base);
  });

  MeasurementBatch batch;
  batch.y_bar = Vector::Zero(a.m());
  for (const auto& y : draws) batch.y_bar += y;
  batch.y_bar /= static_cast<double>(k);
  batch.k = k;
  batch.delta = delta;
  batch.evals_used = obj.eval_count() - before;
  batch.matrix_seed = a.seed;
  batch.sign_seed = seed;
  return batch;
}

Vector naive_sp_estimate(const Objective& obj, const Vector& x, double delta, int k,
                         std::uint64_t seed) {
  check_point(obj, x);
  check_delta(delta);
  check_repetitions(k);
  std::optional<double> base;
  if (obj.deterministic()) base = obj.evaluate(x);
  std::vector<Vector> draws(static_cast<std::size_t>(k));
  parallel_for(k, jobs_for(obj), [&](int l) {
    const auto signs = rademacher_signs(x.size(), derive_seed(seed, static_cast<std::uint64_t>(l)));
    const double f_plus = obj.evaluate(x + delta * signs.signs);
    const double f_zero = base.has_value() ? *base : obj.evaluate(x);
    draws[static_cast<std::size_t>(l)] = ((f_plus - f_zero) / delta) * signs.signs;
  });
  Vector g = Vector::Zero(x.size());
  for (const auto& d : draws) g += d;
  return g / static_cast<double>(k);
}

Vector central_fd(const Objective& obj, const Vector& x, double delta) {
  check_point(obj, x);
  check_delta(delta);
  const Index n = x.size();
  Vector g(n);
  parallel_for(static_cast<int>(n), jobs_for(obj), [&](int i) {
    Vector xp = x;
    Vector xm = x;
    xp(i) += delta;
    xm(i) -= delta;
    g(i) = (obj.evaluate(xp) - obj.evaluate(xm)) / (2.0 * delta);
  });
  return g;
}

}  // namespace sparsegrad
