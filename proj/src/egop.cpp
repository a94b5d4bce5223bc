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

#include "sparsegrad/egop.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "sparsegrad/errors.hpp"
#include "sparsegrad/parallel.hpp"

namespace sparsegrad {
namespace {

double off_diagonal_norm(const Matrix& a) {
  double sum = 0.0;
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      if (i != j) sum += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(sum);
}

// Cyclic Jacobi on a dense symmetric block. Returns the sweep count. Only
// columns are rotated; rows are mirrored from them, which keeps every update
// a contiguous column operation.
int jacobi(Matrix& a, Matrix& v) {
  const Index n = a.rows();
  v = Matrix::Identity(n, n);
  const double target = 1e-12 * a.norm();
  int sweep = 0;
  for (; sweep < 100; ++sweep) {
    if (off_diagonal_norm(a) <= target) break;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double app = a(p, p) - t * apq;
        const double aqq = a(q, q) + t * apq;
        Vector col_p = a.col(p);
        a.col(p) = c * col_p - s * a.col(q);
        a.col(q) = s * col_p + c * a.col(q);
        a.row(p) = a.col(p).transpose();
        a.row(q) = a.col(q).transpose();
        a(p, p) = app;
        a(q, q) = aqq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        Vector vp = v.col(p);
        v.col(p) = c * vp - s * v.col(q);
        v.col(q) = s * vp + c * v.col(q);
      }
    }
  }
  if (sweep == 100 && off_diagonal_norm(a) > target) {
    throw Error("symmetric_eigen: Jacobi sweeps did not converge");
  }
  return sweep;
}

void fix_signs(Matrix& vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    Index peak = 0;
    for (Index i = 1; i < vectors.rows(); ++i) {
      if (std::abs(vectors(i, j)) > std::abs(vectors(peak, j))) peak = i;
    }
    if (vectors(peak, j) < 0.0) vectors.col(j) *= -1.0;
  }
}

std::uint64_t point_key(const Vector& p, std::uint64_t cycle) {
  std::uint64_t h = 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(p.size());
  for (Index i = 0; i < p.size(); ++i) {
    std::uint64_t bits;
    const double value = p(i);
    std::memcpy(&bits, &value, sizeof bits);
    h = derive_seed(h, bits);
  }
  return derive_seed(h, cycle);
}

}  // namespace

EigenDecomposition symmetric_eigen(const Matrix& s) {
  if (s.rows() != s.cols() || s.rows() == 0) {
    throw InvalidArgument("symmetric_eigen: matrix must be square and nonempty");
  }
  const Index n = s.rows();
  const double scale = s.norm();
  if ((s - s.transpose()).norm() > 1e-8 * scale) {
    throw NotSymmetric("symmetric_eigen: asymmetry exceeds 1e-8 relative");
  }
  const Matrix sym = 0.5 * (s + s.transpose());

  std::vector<Index> live;
  for (Index i = 0; i < n; ++i) {
    if (sym.row(i).cwiseAbs().maxCoeff() > 0.0) live.push_back(i);
  }
  const auto k = static_cast<Index>(live.size());
  Matrix block(k, k);
  for (Index a = 0; a < k; ++a) {
    for (Index b = 0; b < k; ++b) block(a, b) = sym(live[a], live[b]);
  }
  Matrix block_vectors;
  EigenDecomposition out;
  out.sweeps = k > 0 ? jacobi(block, block_vectors) : 0;

  // Unsorted assembly: live block first, then unit vectors of dead indices.
  Vector values(n);
  Matrix vectors = Matrix::Zero(n, n);
  for (Index a = 0; a < k; ++a) {
    values(a) = block(a, a);
    for (Index b = 0; b < k; ++b) vectors(live[b], a) = block_vectors(b, a);
  }
  Index column = k;
  std::size_t next_live = 0;
  for (Index i = 0; i < n; ++i) {
    if (next_live < live.size() && live[next_live] == i) {
      ++next_live;
      continue;
    }
    values(column) = 0.0;
    vectors(i, column) = 1.0;
    ++column;
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values(a) > values(b); });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index j = 0; j < n; ++j) {
    out.values(j) = values(order[j]);
    out.vectors.col(j) = vectors.col(order[j]);
  }
  fix_signs(out.vectors);
  return out;
}

EigenDecomposition low_rank_eigen(const Matrix& factor) {
  const Index n = factor.rows();
  if (n == 0) throw InvalidArgument("low_rank_eigen: empty factor");
  EigenDecomposition out;
  out.values = Vector::Zero(n);
  Matrix basis(n, 0);
  if (factor.cols() > 0) {
    // F F^T and F^T F share their nonzero spectrum: F^T F w = l w gives the
    // unit eigenvector F w / sqrt(l) of F F^T.
    const Matrix gram = factor.transpose() * factor;
    const auto small = symmetric_eigen(gram);
    const double top = small.values.size() > 0 ? small.values(0) : 0.0;
    Index rank = 0;
    while (rank < small.values.size() && small.values(rank) > 1e-13 * top && top > 0.0) ++rank;
    basis.resize(n, rank);
    for (Index j = 0; j < rank; ++j) {
      out.values(j) = small.values(j);
      basis.col(j) = factor * small.vectors.col(j) / std::sqrt(small.values(j));
    }
    out.sweeps = small.sweeps;
  }
  // Complete to an orthonormal basis of R^n; the first columns of Q span the
  // computed eigenvectors, which are kept as they are.
  const Index rank = basis.cols();
  out.vectors.resize(n, n);
  if (rank > 0) out.vectors.leftCols(rank) = basis;
  if (rank < n) {
    Matrix q = Matrix::Identity(n, n);
    if (rank > 0) {
      Eigen::HouseholderQR<Matrix> qr(basis);
      q = qr.householderQ() * Matrix::Identity(n, n);
    }
    out.vectors.rightCols(n - rank) = q.rightCols(n - rank);
  }
  fix_signs(out.vectors);
  return out;
}

Matrix average_outer_products(const std::vector<std::vector<Vector>>& per_sample) {
  if (per_sample.empty()) throw InvalidArgument("average_outer_products: no samples");
  Index n = -1;
  for (const auto& sample : per_sample) {
    for (const auto& g : sample) {
      if (n < 0) n = g.size();
      if (g.size() != n) throw DimensionMismatch("average_outer_products: ragged gradients");
    }
  }
  if (n <= 0) throw InvalidArgument("average_outer_products: no gradients");
  Matrix sum = Matrix::Zero(n, n);
  std::vector<Index> nz;
  for (const auto& sample : per_sample) {
    for (const auto& g : sample) {
      nz.clear();
      for (Index i = 0; i < n; ++i) {
        if (g(i) != 0.0) nz.push_back(i);
      }
      for (Index a : nz) {
        for (Index b : nz) sum(a, b) += g(a) * g(b);
      }
    }
  }
  return sum / static_cast<double>(per_sample.size());
}

EgopEstimate egop_estimate(const std::vector<const Objective*>& outputs, const PointSampler& sampler,
                           const EstimatorConfig& cfg, const EgopOptions& options) {
  if (outputs.empty()) throw InvalidArgument("egop_estimate: no outputs");
  if (options.r < 1) throw InvalidArgument("egop_estimate: r must be >= 1");
  const Index n = outputs.front()->dimension();
  for (const auto* f : outputs) {
    if (f == nullptr || f->dimension() != n) {
      throw DimensionMismatch("egop_estimate: outputs disagree on dimension");
    }
  }
  if (options.calibration_probes <= 0) cfg.validate();
  if (sampler.kind == SamplerKind::kPoints && sampler.points.empty()) {
    throw InvalidArgument("egop_estimate: point sampler has no points");
  }
  const int r = options.r;

  EgopEstimate est;
  est.r = r;
  est.points.resize(static_cast<std::size_t>(r));
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const auto slot = static_cast<std::size_t>(i);
    if (sampler.kind == SamplerKind::kPoints) {
      const auto& p = sampler.points[slot % sampler.points.size()];
      if (p.size() != n) throw DimensionMismatch("egop_estimate: sample point has wrong length");
      est.points[slot] = p;
      keys[slot] = point_key(p, slot / sampler.points.size());
    } else {
      keys[slot] = static_cast<std::uint64_t>(i);
      Rng rng(derive_seed(derive_seed(options.seed, keys[slot]), 0));
      Vector p(n);
      for (Index j = 0; j < n; ++j) {
        p(j) = sampler.kind == SamplerKind::kNormal ? sampler.scale * rng.normal()
                                                    : sampler.scale * (2.0 * rng.uniform() - 1.0);
      }
      est.points[slot] = std::move(p);
    }
  }

  std::vector<std::vector<Vector>> grads(static_cast<std::size_t>(r));
  std::vector<std::int64_t> evals(static_cast<std::size_t>(r), 0);
  parallel_for(r, options.jobs, [&](int i) {
    const auto slot = static_cast<std::size_t>(i);
    const std::uint64_t base = derive_seed(options.seed, keys[slot]);
    const std::uint64_t matrix_seed = derive_seed(base, 1);
    const std::uint64_t sign_base = derive_seed(base, 2);
    const auto a = gaussian_matrix(cfg.m, n, matrix_seed);
    const Vector& x = est.points[slot];
    try {
      for (std::size_t j = 0; j < outputs.size(); ++j) {
        EstimatorConfig c = cfg;
        c.matrix_seed = matrix_seed;
        c.sign_seed = derive_seed(sign_base, j);
        if (options.calibration_probes > 0) {
          c.relative_tol = 0.0;
          c.residual_tol = calibrate_tolerance(*outputs[j], x, c, a, options.calibration_probes);
          evals[slot] += outputs[j]->deterministic() ? 1 + 2 * options.calibration_probes
                                                     : 3 * options.calibration_probes;
        }
        auto g = estimate_gradient(*outputs[j], x, c, a);
        evals[slot] += g.evals_used;
        grads[slot].push_back(std::move(g.g));
      }
    } catch (const RecoveryFailed& e) {
      throw RecoveryFailed("egop_estimate: sample " + std::to_string(i) + ": " + e.what());
    } catch (const EvaluationFailed& e) {
      throw EvaluationFailed("egop_estimate: sample " + std::to_string(i) + ": " + e.what());
    }
  });

  std::vector<std::size_t> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<std::vector<Vector>> ordered;
  ordered.reserve(order.size());
  for (std::size_t i : order) ordered.push_back(std::move(grads[i]));
  est.g_hat = average_outer_products(ordered);
  est.per_sample_evals = evals.front();
  est.evals_used = std::accumulate(evals.begin(), evals.end(), std::int64_t{0});
  // G_hat = F F^T with F the scaled nonzero gradients, rank <= r * outputs.
  std::vector<const Vector*> nonzero;
  for (const auto& sample : ordered) {
    for (const auto& g : sample) {
      if (g.squaredNorm() > 0.0) nonzero.push_back(&g);
    }
  }
  Matrix factor(n, static_cast<Index>(nonzero.size()));
  for (std::size_t j = 0; j < nonzero.size(); ++j) {
    factor.col(static_cast<Index>(j)) = *nonzero[j] / std::sqrt(static_cast<double>(r));
  }
  auto eig = low_rank_eigen(factor);
  est.eigenvalues = std::move(eig.values);
  est.eigenvectors = std::move(eig.vectors);
  return est;
}

Subspace edr_subspace(const EigenDecomposition& eig, Index d) {
  const Index n = eig.values.size();
  if (d < 1 || d > n) throw InvalidArgument("edr_subspace: need 1 <= d <= n");
  Subspace sub;
  sub.basis = eig.vectors.leftCols(d);
  const double top = eig.values(0);
  sub.rank_deficient = !(top > 0.0) || eig.values(d - 1) <= 1e-10 * top;
  return sub;
}

Subspace edr_subspace(const EgopEstimate& estimate, Index d) {
  EigenDecomposition eig;
  eig.values = estimate.eigenvalues;
  eig.vectors = estimate.eigenvectors;
  return edr_subspace(eig, d);
}

double subspace_distance(const Matrix& u, const Matrix& v) {
  if (u.rows() != v.rows()) throw DimensionMismatch("subspace_distance: ambient dimensions differ");
  if (u.cols() != v.cols() || u.cols() < 1) {
    throw DimensionMismatch("subspace_distance: subspaces must have the same positive dimension");
  }
  const Matrix residual = v - u * (u.transpose() * v);
  Eigen::JacobiSVD<Matrix> svd(residual);
  return std::clamp(svd.singularValues()(0), 0.0, 1.0);
}

}  // namespace sparsegrad
