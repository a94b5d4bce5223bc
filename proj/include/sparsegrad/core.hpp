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

#ifndef SPARSEGRAD_CORE_HPP_
#define SPARSEGRAD_CORE_HPP_

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace sparsegrad {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Mixes a master seed with a stream id (SplitMix64 finalizer). Used to give
/// every repetition, sample and iteration its own independent generator.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded generator. Uniforms come from the raw 64-bit output of
/// std::mt19937_64 (fully specified by the standard); normals use the
/// Marsaglia polar method, so draws do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double normal();
  /// Fair +1 / -1.
  double sign();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Dense m x n matrix of i.i.d. N(0,1) entries. Rows a_i are both the SP
/// probe directions and the sensing operator.
struct MeasurementMatrix {
  Matrix entries;
  std::uint64_t seed = 0;

  Index m() const { return entries.rows(); }
  Index n() const { return entries.cols(); }
};

/// Rademacher weights, stored as doubles for direct use in arithmetic.
struct PerturbationSigns {
  Vector signs;

  Index size() const { return signs.size(); }
};

/// Generates an unnormalized Gaussian matrix; requires 0 < m < n. Entries are
/// drawn row by row from a single stream, so the result is a pure function of
/// (m, n, seed).
MeasurementMatrix gaussian_matrix(Index m, Index n, std::uint64_t seed);

PerturbationSigns rademacher_signs(Index m, std::uint64_t seed);

struct SparseApproximation {
  Vector x;              ///< best s-term approximation
  double defect = 0.0;   ///< norm of the discarded tail, sigma_s(x)
};

/// Keeps the s largest-magnitude entries. Ties go to the lowest index.
SparseApproximation best_s_sparse(const Vector& x, Index s);

bool all_finite(const Vector& v);

}  // namespace sparsegrad

#endif  // SPARSEGRAD_CORE_HPP_
