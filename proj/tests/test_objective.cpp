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

#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "sparsegrad/errors.hpp"
#include "sparsegrad/objective.hpp"

namespace sparsegrad {
namespace {

Objective squares(Index n, NoiseModel noise = {}) {
  return Objective(n, [](const Vector& x) { return x.squaredNorm(); }, noise);
}

TEST(Objective, CountsEveryEvaluation) {
  auto f = squares(3);
  const Vector x = Vector::Ones(3);
  EXPECT_EQ(f.eval_count(), 0);
  EXPECT_DOUBLE_EQ(f.evaluate(x), 3.0);
  EXPECT_DOUBLE_EQ(f(x), 3.0);
  EXPECT_EQ(f.eval_count(), 2);
  f.peek(x);
  EXPECT_EQ(f.eval_count(), 2);
  f.reset_count();
  EXPECT_EQ(f.eval_count(), 0);
}

TEST(Objective, NoiselessIsRepeatable) {
  auto f = squares(4);
  const Vector x = Vector::LinSpaced(4, -1.0, 2.0);
  EXPECT_EQ(f(x), f(x));
  EXPECT_TRUE(f.deterministic());
}

TEST(Objective, NoiseDependsOnSeedAndEvaluationIndex) {
  auto f = squares(2, {0.1, 9});
  auto g = squares(2, {0.1, 9});
  const Vector x = Vector::Zero(2);
  const double a0 = f(x);
  const double a1 = f(x);
  EXPECT_NE(a0, a1);
  EXPECT_EQ(g(x), a0);
  EXPECT_EQ(g(x), a1);
  EXPECT_FALSE(f.deterministic());
}

TEST(Objective, NoiseHasRequestedScale) {
  auto f = squares(1, {0.5, 3});
  const Vector x = Vector::Zero(1);
  double sum = 0.0, sum2 = 0.0;
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) {
    const double v = f(x);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / trials;
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(std::sqrt(sum2 / trials - mean * mean), 0.5, 0.02);
}

TEST(Objective, RejectsBadInput) {
  EXPECT_THROW(squares(0), InvalidArgument);
  EXPECT_THROW(Objective(2, nullptr), InvalidArgument);
  auto f = squares(2);
  EXPECT_THROW(f(Vector::Zero(3)), DimensionMismatch);
  Objective bad(1, [](const Vector&) { return std::nan(""); });
  EXPECT_THROW(bad(Vector::Zero(1)), EvaluationFailed);
}

TEST(Objective, CounterIsAtomicAcrossThreads) {
  Objective f(1, [](const Vector& x) { return x(0); }, {}, true);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 1000; ++i) f(Vector::Zero(1));
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(f.eval_count(), 4000);
}

TEST(ExternalObjective, EchoRoundTripIsBitExact) {
  auto f = make_external_objective({ECHO_OBJECTIVE_PATH}, 3);
  for (double v : {0.1, -1.0 / 3.0, 6.02214076e23, 1e-300, 1.0 + 1e-15}) {
    Vector x(3);
    x << v, 2.0, 3.0;
    EXPECT_EQ(f(x), v);
  }
  EXPECT_EQ(f.eval_count(), 5);
  EXPECT_TRUE(f.reentrant());
}

TEST(ExternalObjective, NonzeroExitFails) {
  EXPECT_THROW(evaluate_external({ECHO_OBJECTIVE_PATH, "3"}, Vector::Ones(2)), EvaluationFailed);
  EXPECT_THROW(evaluate_external({"/nonexistent/objective"}, Vector::Ones(2)), EvaluationFailed);
}

}  // namespace
}  // namespace sparsegrad
