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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "sparsegrad/core.hpp"
#include "sparsegrad/errors.hpp"
#include "sparsegrad/homotopy.hpp"

namespace sparsegrad {
namespace {

struct Instance {
  Matrix a;
  Vector x_true;
  std::vector<Index> support;
};

// s-sparse vector with +-1 entries at distinct random positions.
Instance make_instance(Index m, Index n, Index s, std::uint64_t seed) {
  Instance inst;
  inst.a = gaussian_matrix(m, n, seed).entries;
  Rng rng(derive_seed(seed, 1));
  inst.x_true = Vector::Zero(n);
  while (static_cast<Index>(inst.support.size()) < s) {
    const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    if (std::find(inst.support.begin(), inst.support.end(), j) != inst.support.end()) continue;
    inst.support.push_back(j);
    inst.x_true(j) = rng.sign();
  }
  std::sort(inst.support.begin(), inst.support.end());
  return inst;
}

// Oracle: smallest singular value of A restricted to the given columns.
double restricted_min_singular(const Matrix& a, const std::vector<Index>& cols) {
  Matrix sub(a.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Index>(c)) = a.col(cols[c]);
  Eigen::JacobiSVD<Matrix> svd(sub);
  return svd.singularValues().minCoeff();
}

SolverOptions tol_options(double tol) {
  SolverOptions o;
  o.residual_tol = tol;
  return o;
}

TEST(SolveBpdn, ZeroDataGivesZeroSolution) {
  const Matrix a = gaussian_matrix(5, 12, 1).entries;
  const auto sol = solve_bpdn(a, Vector::Zero(5), tol_options(1e-8));
  EXPECT_EQ(sol.z, Vector::Zero(12));
  EXPECT_EQ(sol.residual_norm, 0.0);
  EXPECT_EQ(sol.path_steps, 0);
  EXPECT_TRUE(sol.support.empty());
}

TEST(SolveBpdn, ExactRecoveryOfTwoSparseVector) {
  const auto inst = make_instance(20, 60, 2, 2024);
  const Vector y = inst.a * inst.x_true;
  const auto sol = solve_bpdn(inst.a, y, tol_options(1e-8));
  EXPECT_LE((sol.z - inst.x_true).norm(), 1e-6);
  std::vector<Index> significant;
  for (Index j : sol.support) {
    if (std::abs(sol.z(j)) > 1e-6) significant.push_back(j);
  }
  EXPECT_EQ(significant, inst.support);
  EXPECT_LE(sol.residual_norm, 1e-8 * (1 + 1e-9));
  EXPECT_TRUE(kkt_check(inst.a, y, sol.z, sol.lambda_final, 1e-6));
}

TEST(SolveBpdn, NoisyRecoveryWithinRobustBound) {
  const auto inst = make_instance(20, 60, 2, 2024);
  Rng rng(17);
  Vector xi(20);
  for (Index i = 0; i < 20; ++i) xi(i) = rng.normal();
  xi *= 1e-3 / xi.norm();
  const Vector y = inst.a * inst.x_true + xi;
  const auto sol = solve_bpdn(inst.a, y, tol_options(1e-3));
  const double tau_emp = restricted_min_singular(inst.a, inst.support);
  EXPECT_LE((sol.z - inst.x_true).norm(), 2e-3 / tau_emp);
  EXPECT_LE(sol.residual_norm, 1e-3 * (1 + 1e-9));
}

TEST(SolveBpdn, ResidualIsMonotoneAlongPath) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = make_instance(15, 40, 4, seed);
    const Vector y = inst.a * inst.x_true;
    const auto sol = solve_bpdn(inst.a, y, tol_options(1e-9));
    const auto& h = sol.breakpoint_residuals;
    for (std::size_t i = 1; i < h.size(); ++i) {
      EXPECT_LE(h[i], h[i - 1] * (1 + 1e-12) + 1e-12) << "seed " << seed << " step " << i;
    }
    EXPECT_LE(static_cast<Index>(sol.support.size()), 15);
  }
}

TEST(SolveBpdn, RecoversInAtLeast95Of100Seeds) {
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto inst = make_instance(20, 60, 2, 1000 + seed);
    const Vector y = inst.a * inst.x_true;
    const auto sol = solve_bpdn(inst.a, y, tol_options(1e-8));
    if ((sol.z - inst.x_true).norm() <= 1e-6) ++recovered;
  }
  EXPECT_GE(recovered, 95);
}

TEST(SolveBpdn, InvariantUnderColumnPermutation) {
  const auto inst = make_instance(20, 60, 3, 77);
  Rng rng(5);
  Vector noise(20);
  for (Index i = 0; i < 20; ++i) noise(i) = 0.01 * rng.normal();
  const Vector y = inst.a * inst.x_true + noise;
  const auto base = solve_bpdn(inst.a, y, tol_options(0.05));

  std::vector<Index> perm(60);
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index i = 59; i > 0; --i) {
    std::swap(perm[static_cast<std::size_t>(i)], perm[rng.below(static_cast<std::uint64_t>(i + 1))]);
  }
  Matrix permuted(20, 60);
  for (Index c = 0; c < 60; ++c) permuted.col(c) = inst.a.col(perm[static_cast<std::size_t>(c)]);
  const auto sol = solve_bpdn(permuted, y, tol_options(0.05));
  Vector unpermuted = Vector::Zero(60);
  for (Index c = 0; c < 60; ++c) unpermuted(perm[static_cast<std::size_t>(c)]) = sol.z(c);
  EXPECT_LE((unpermuted - base.z).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SolveBpdn, ThrowsWhenStepBudgetTooSmall) {
  const auto inst = make_instance(20, 60, 2, 2024);
  SolverOptions o = tol_options(1e-8);
  o.max_steps = 1;
  EXPECT_THROW(solve_bpdn(inst.a, inst.a * inst.x_true, o), MaxStepsExceeded);
}

TEST(SolveBpdn, RejectsBadArguments) {
  const Matrix a = gaussian_matrix(4, 10, 3).entries;
  EXPECT_THROW(solve_bpdn(a, Vector::Ones(5), tol_options(1e-3)), DimensionMismatch);
  EXPECT_THROW(solve_bpdn(a, Vector::Ones(4), tol_options(0.0)), InvalidArgument);
}

TEST(KktCheck, CertifiesSolverOutputAndRejectsPerturbation) {
  const auto inst = make_instance(20, 60, 2, 31);
  Rng rng(8);
  Vector noise(20);
  for (Index i = 0; i < 20; ++i) noise(i) = 0.05 * rng.normal();
  const Vector y = inst.a * inst.x_true + noise;
  const auto sol = solve_bpdn(inst.a, y, tol_options(0.1));
  const double tol = 1e-6;
  ASSERT_TRUE(kkt_check(inst.a, y, sol.z, sol.lambda_final, tol));
  ASSERT_FALSE(sol.support.empty());
  Vector bumped = sol.z;
  bumped(sol.support.front()) += 10 * tol;
  EXPECT_FALSE(kkt_check(inst.a, y, bumped, sol.lambda_final, tol));
}

TEST(KktCheck, ZeroIsOptimalForLargeLambda) {
  const Matrix a = gaussian_matrix(6, 15, 4).entries;
  const Vector y = Vector::LinSpaced(6, -1.0, 2.0);
  const double top = (a.transpose() * y).cwiseAbs().maxCoeff();
  EXPECT_TRUE(kkt_check(a, y, Vector::Zero(15), top, 1e-12));
  EXPECT_TRUE(kkt_check(a, y, Vector::Zero(15), 2 * top, 1e-12));
  EXPECT_FALSE(kkt_check(a, y, Vector::Zero(15), 0.5 * top, 1e-12));
}

TEST(SolveBpdnWarm, ExactSolutionIsAFixedPoint) {
  const auto inst = make_instance(20, 60, 2, 5);
  Rng rng(2);
  Vector noise(20);
  for (Index i = 0; i < 20; ++i) noise(i) = 0.02 * rng.normal();
  const Vector y = inst.a * inst.x_true + noise;
  const auto opts = tol_options(0.05);
  const auto sol = solve_bpdn(inst.a, y, opts);
  const auto again = solve_bpdn_warm(inst.a, y, sol, 10, opts);
  EXPECT_EQ(again.path_steps, 0);
  EXPECT_LE((again.z - sol.z).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(again.converged);
}

TEST(SolveBpdnWarm, ZeroStartWithFullBudgetMatchesColdSolve) {
  const auto inst = make_instance(20, 60, 3, 6);
  const Vector y = inst.a * inst.x_true;
  SolverOptions opts = tol_options(1e-8);
  const int budget = 80;
  opts.max_steps = budget;
  const auto cold = solve_bpdn(inst.a, y, opts);
  const auto warm = solve_bpdn_warm(inst.a, y, zero_solution(inst.a, y), budget, opts);
  EXPECT_EQ(warm.z, cold.z);
  EXPECT_EQ(warm.path_steps, cold.path_steps);
  EXPECT_EQ(warm.lambda_final, cold.lambda_final);
}

TEST(SolveBpdnWarm, FewStepsReduceResidual) {
  const auto inst = make_instance(20, 60, 2, 2024);
  const Vector y = inst.a * inst.x_true;
  const auto opts = tol_options(1e-8);
  const auto start = zero_solution(inst.a, y);
  const auto partial = solve_bpdn_warm(inst.a, y, start, 2, opts);
  EXPECT_LE(partial.path_steps, 2);
  EXPECT_LT(partial.residual_norm, start.residual_norm);
  EXPECT_FALSE(partial.converged);
}

TEST(SolveBpdnWarm, RepeatedCallsConvergeToColdSolution) {
  const auto inst = make_instance(20, 60, 3, 9);
  Rng rng(3);
  Vector noise(20);
  for (Index i = 0; i < 20; ++i) noise(i) = 0.01 * rng.normal();
  const Vector y = inst.a * inst.x_true + noise;
  const auto opts = tol_options(0.02);
  const auto cold = solve_bpdn(inst.a, y, opts);
  SparseSolution state = zero_solution(inst.a, y);
  for (int call = 0; call < 200 && !state.converged; ++call) {
    state = solve_bpdn_warm(inst.a, y, state, 1, opts);
  }
  ASSERT_TRUE(state.converged);
  EXPECT_LE((state.z - cold.z).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SolveBpdnWarm, NewDataReachesColdSolutionForThatData) {
  const auto inst = make_instance(25, 80, 3, 12);
  Rng rng(4);
  Vector shift(25);
  for (Index i = 0; i < 25; ++i) shift(i) = 0.3 * rng.normal();
  const Vector y_old = inst.a * inst.x_true;
  const Vector y_new = y_old + shift;
  for (double tol : {0.2, 1.0, 3.0}) {
    const auto opts = tol_options(tol);
    const auto old_sol = solve_bpdn(inst.a, y_old, opts);
    const auto cold = solve_bpdn(inst.a, y_new, opts);
    const auto warm = solve_bpdn_warm(inst.a, y_new, old_sol, 100, opts);
    ASSERT_TRUE(warm.converged) << tol;
    EXPECT_LE((warm.z - cold.z).cwiseAbs().maxCoeff(), 1e-8) << tol;
    EXPECT_NEAR(warm.lambda_final, cold.lambda_final, 1e-8 * cold.lambda_final) << tol;
    EXPECT_TRUE(kkt_check(inst.a, y_new, warm.z, warm.lambda_final, 1e-6)) << tol;
  }
}

TEST(SolveBpdnWarm, DependentStartSupportIsDegenerate) {
  Matrix a = gaussian_matrix(6, 10, 21).entries;
  a.col(1) = a.col(0);
  SparseSolution start;
  start.z = Vector::Zero(10);
  start.z(0) = 1.0;
  start.z(1) = 1.0;
  start.support = {0, 1};
  start.lambda_final = 0.1;
  start.data = a.col(0);
  EXPECT_THROW(solve_bpdn_warm(a, a.col(0), start, 5, tol_options(1e-3)), DegenerateStep);
}

}  // namespace
}  // namespace sparsegrad
