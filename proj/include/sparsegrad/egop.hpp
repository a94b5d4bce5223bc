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

// Expected gradient outer product (EGOP) from estimated sparse gradients,
// the e.d.r. subspace it spans, and the Jacobi eigensolver behind both.

#ifndef SPARSEGRAD_EGOP_HPP_
#define SPARSEGRAD_EGOP_HPP_

#include <cstdint>
#include <vector>

#include "sparsegrad/core.hpp"
#include "sparsegrad/objective.hpp"
#include "sparsegrad/sparse_gradient.hpp"

namespace sparsegrad {

struct EigenDecomposition {
  Vector values;   ///< descending
  Matrix vectors;  ///< orthonormal columns matching `values`
  int sweeps = 0;
};

/// Cyclic Jacobi. Rows and columns that are exactly zero are split off
/// first (they contribute zero eigenvalues with unit eigenvectors), which
/// keeps large but sparse outer-product sums cheap. Each eigenvector is
/// signed so its largest-magnitude entry is positive. Throws NotSymmetric
/// when |S - S^T| exceeds 1e-8 relative to |S|.
EigenDecomposition symmetric_eigen(const Matrix& s);

/// Eigendecomposition of F F^T through the small Gram matrix F^T F (Jacobi),
/// completed with an orthonormal basis of the null space. This is how
/// egop_estimate decomposes G_hat, whose rank is at most r * outputs.
EigenDecomposition low_rank_eigen(const Matrix& factor);

enum class SamplerKind { kNormal, kUniformCube, kPoints };

/// Distribution of the sample points x_1..x_r.
struct PointSampler {
  SamplerKind kind = SamplerKind::kNormal;
  double scale = 1.0;           ///< std (normal) or half-width (cube)
  std::vector<Vector> points;   ///< used by kPoints, cycled if r exceeds it
};

struct EgopOptions {
  int r = 1;
  std::uint64_t seed = 0;       ///< master seed for points, matrices and signs
  /// When positive the residual tolerance is recalibrated with this many
  /// probes for every sample and output; otherwise cfg's tolerance is used.
  int calibration_probes = 0;
  int jobs = 1;
};

struct EgopEstimate {
  Matrix g_hat;
  int r = 0;
  std::int64_t per_sample_evals = 0;  ///< evaluations of the first sample
  std::int64_t evals_used = 0;
  Vector eigenvalues;
  Matrix eigenvectors;
  std::vector<Vector> points;         ///< sample points, in draw order
};

/// Average of sum_j g_j g_j^T over samples, where g_j is the estimated
/// gradient of output j. Sample i draws its point, matrix and signs from
/// seeds derived from (seed, key_i); key_i is i for random samplers and a
/// hash of the point for kPoints. Outer products are accumulated in key
/// order, so permuting a point list does not change the result.
EgopEstimate egop_estimate(const std::vector<const Objective*>& outputs, const PointSampler& sampler,
                           const EstimatorConfig& cfg, const EgopOptions& options);

/// Mean of outer products of given gradients; per_sample[i][j] is output j
/// at sample i.
Matrix average_outer_products(const std::vector<std::vector<Vector>>& per_sample);

struct Subspace {
  Matrix basis;                 ///< n x d, orthonormal columns
  bool rank_deficient = false;  ///< eigenvalue d is <= 1e-10 * lambda_1
};

Subspace edr_subspace(const EgopEstimate& estimate, Index d);
Subspace edr_subspace(const EigenDecomposition& eig, Index d);

/// Sine of the largest principal angle between span(U) and span(V).
double subspace_distance(const Matrix& u, const Matrix& v);
inline double subspace_distance(const Subspace& u, const Subspace& v) {
  return subspace_distance(u.basis, v.basis);
}

}  // namespace sparsegrad

#endif  // SPARSEGRAD_EGOP_HPP_
