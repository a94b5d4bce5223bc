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

#ifndef SPARSEGRAD_OBJECTIVE_HPP_
#define SPARSEGRAD_OBJECTIVE_HPP_

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sparsegrad/core.hpp"

namespace sparsegrad {

/// Additive i.i.d. Gaussian evaluation noise. The draw for the e-th
/// evaluation depends only on (seed, e), so noisy runs stay reproducible.
struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Black-box scalar objective with an exact evaluation counter. The counter
/// is the cost metric for every estimator in the library.
class Objective {
 public:
  using Function = std::function<double(const Vector&)>;

  Objective(Index dimension, Function f, NoiseModel noise = {}, bool reentrant = false);

  Objective(Objective&&) noexcept = default;
  Objective& operator=(Objective&&) noexcept = default;
  Objective(const Objective&) = delete;
  Objective& operator=(const Objective&) = delete;

  /// Counted (and possibly noisy) evaluation. Throws EvaluationFailed when the
  /// value is not finite.
  double evaluate(const Vector& x) const;
  double operator()(const Vector& x) const { return evaluate(x); }

  /// Noise-free evaluation that does not touch the counter; for monitoring.
  double peek(const Vector& x) const;

  Index dimension() const { return dimension_; }
  bool deterministic() const { return noise_.sigma == 0.0; }
  /// Safe to evaluate from several threads at once.
  bool reentrant() const { return reentrant_; }
  std::int64_t eval_count() const { return count_->load(std::memory_order_relaxed); }
  void reset_count() { count_->store(0); }

 private:
  Index dimension_;
  Function f_;
  NoiseModel noise_;
  bool reentrant_;
  std::unique_ptr<std::atomic<std::int64_t>> count_;
};

/// Objective backed by a child process. Each evaluation runs `argv`, writes x
/// to its stdin as newline-separated decimals (17 significant digits) and
/// reads one decimal from its stdout. A nonzero exit status or unparsable
/// output raises EvaluationFailed.
Objective make_external_objective(std::vector<std::string> argv, Index dimension,
                                  NoiseModel noise = {});

/// Runs the child-process protocol once; exposed for testing.
double evaluate_external(const std::vector<std::string>& argv, const Vector& x);

}  // namespace sparsegrad

#endif  // SPARSEGRAD_OBJECTIVE_HPP_
