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

#include "sparsegrad/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "sparsegrad/errors.hpp"

namespace sparsegrad {
namespace {

// Column-sparse n x c matrix with +-1 entries.
struct SparseCols {
  std::vector<std::vector<std::pair<Index, double>>> cols;

  Vector apply_t(const Vector& x) const {  // M^T x
    Vector u(static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      double acc = 0.0;
      for (const auto& [i, v] : cols[j]) acc += v * x(i);
      u(static_cast<Index>(j)) = acc;
    }
    return u;
  }
  void add_apply(const Vector& u, double scale, Vector& out) const {  // out += scale M u
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double w = scale * u(static_cast<Index>(j));
      for (const auto& [i, v] : cols[j]) out(i) += w * v;
    }
  }
  Matrix dense(Index n) const {
    Matrix m = Matrix::Zero(n, static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      for (const auto& [i, v] : cols[j]) m(i, static_cast<Index>(j)) = v;
    }
    return m;
  }
};

// s distinct indices in [0, n), sorted. Partial Fisher-Yates.
std::vector<Index> pick_rows(Rng& rng, Index n, Index s) {
  std::vector<Index> pool(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < s; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  std::vector<Index> rows(pool.begin(), pool.begin() + s);
  std::sort(rows.begin(), rows.end());
  return rows;
}

// Every column gets s random rows with +-1 values.
SparseCols column_sparse(Rng& rng, Index n, Index columns, Index s) {
  SparseCols m;
  m.cols.resize(static_cast<std::size_t>(columns));
  for (auto& col : m.cols) {
    for (Index i : pick_rows(rng, n, s)) col.emplace_back(i, rng.sign());
  }
  return m;
}

// s nonzero rows shared by all columns.
SparseCols row_sparse(Rng& rng, Index n, Index columns, Index s) {
  SparseCols m;
  m.cols.resize(static_cast<std::size_t>(columns));
  for (Index i : pick_rows(rng, n, s)) {
    for (auto& col : m.cols) col.emplace_back(i, rng.sign());
  }
  return m;
}

Matrix orthonormal_columns(const Matrix& m) {
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  const Index rank = qr.rank();
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), rank);
  return q;
}

void self_check(const TestFunction& f, std::uint64_t seed) {
  const Vector x = normal_point(f.n, derive_seed(seed, 0x5e1f));
  const Vector g = f.gradient(x);
  if (g.size() != f.n) throw Error("make_function: gradient has wrong length");
  Rng rng(derive_seed(seed, 0xc4ec));
  std::vector<Index> coords;
  for (Index i = 0; i < f.n; ++i) {
    if (g(i) != 0.0) coords.push_back(i);
  }
  for (int t = 0; t < 8; ++t) coords.push_back(static_cast<Index>(rng.below(static_cast<std::uint64_t>(f.n))));
  const double h = 1e-5;
  for (Index i : coords) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const double fd = (f.value(xp) - f.value(xm)) / (2.0 * h);
    const double scale = 1.0 + std::abs(g(i)) + std::abs(f.value(x)) * 1e-3;
    if (std::abs(fd - g(i)) > 1e-4 * scale) {
      throw Error("make_function: analytic gradient of " + f.name + " disagrees with central differences at coordinate " +
                  std::to_string(i));
    }
  }
}

TestFunction sum_squares(const FunctionSpec& spec) {
  TestFunction f;
  const Index s = spec.s;
  f.name = "sum_squares";
  f.value = [s](const Vector& x) { return x.head(s).squaredNorm(); };
  f.gradient = [s](const Vector& x) {
    Vector g = Vector::Zero(x.size());
    g.head(s) = 2.0 * x.head(s);
    return g;
  };
  f.minimum = 0.0;
  f.relevant_span = Matrix::Identity(spec.n, s);
  return f;
}

TestFunction quad_mmt(const FunctionSpec& spec) {
  Rng rng(spec.seed);
  auto m = std::make_shared<const SparseCols>(row_sparse(rng, spec.n, 3, spec.s));
  TestFunction f;
  f.name = "quad_mmt";
  f.value = [m](const Vector& x) { return m->apply_t(x).squaredNorm(); };
  f.gradient = [m](const Vector& x) {
    Vector g = Vector::Zero(x.size());
    m->add_apply(m->apply_t(x), 2.0, g);
    return g;
  };
  f.minimum = 0.0;
  f.relevant_span = orthonormal_columns(m->dense(spec.n));
  return f;
}

TestFunction eq14(const FunctionSpec& spec) {
  Rng rng(spec.seed);
  auto m1 = std::make_shared<const SparseCols>(column_sparse(rng, spec.n, 3, spec.s));
  auto m2 = std::make_shared<const SparseCols>(column_sparse(rng, spec.n, 3, spec.s));
  TestFunction f;
  f.name = "eq14";
  f.value = [m1, m2](const Vector& x) {
    const Vector u = m1->apply_t(x);
    const Vector v = m2->apply_t(x);
    const double q1 = u.squaredNorm();
    const double q2 = v.squaredNorm();
    return q1 * q1 * q1 + q2 * q2 + u.dot(v);
  };
  f.gradient = [m1, m2](const Vector& x) {
    const Vector u = m1->apply_t(x);
    const Vector v = m2->apply_t(x);
    const double q1 = u.squaredNorm();
    const double q2 = v.squaredNorm();
    Vector g = Vector::Zero(x.size());
    m1->add_apply(u, 6.0 * q1 * q1, g);
    m2->add_apply(v, 4.0 * q2, g);
    m1->add_apply(v, 1.0, g);
    m2->add_apply(u, 1.0, g);
    return g;
  };
  Matrix both(spec.n, 6);
  both << m1->dense(spec.n), m2->dense(spec.n);
  f.relevant_span = orthonormal_columns(both);
  return f;
}

TestFunction edr(const FunctionSpec& spec) {
  if (spec.d < 1 || spec.d >= spec.n) throw InvalidArgument("make_function: edr needs 1 <= d < n");
  Rng rng(spec.seed);
  // Columns of this n x d matrix are the rows b_j of B.
  auto b = std::make_shared<const SparseCols>(column_sparse(rng, spec.n, spec.d, spec.s));
  const bool coupled = spec.d >= 2;
  TestFunction f;
  f.name = "edr";
  f.value = [b, coupled](const Vector& x) {
    const Vector u = b->apply_t(x);
    double value = u.squaredNorm();
    if (coupled) value += u(0) * u(1) * u(1);
    return value;
  };
  f.gradient = [b, coupled](const Vector& x) {
    Vector u = b->apply_t(x);
    Vector w = 2.0 * u;
    if (coupled) {
      w(0) += u(1) * u(1);
      w(1) += 2.0 * u(0) * u(1);
    }
    Vector g = Vector::Zero(x.size());
    b->add_apply(w, 1.0, g);
    return g;
  };
  f.relevant_span = orthonormal_columns(b->dense(spec.n));
  return f;
}

}  // namespace

Vector normal_point(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Vector x(n);
  for (Index i = 0; i < n; ++i) x(i) = rng.normal();
  return x;
}

Objective TestFunction::objective(NoiseModel noise) const {
  return Objective(n, value, noise, /*reentrant=*/true);
}

bool is_vector_family(const std::string& family) { return family == "quad_mmt_vec"; }

TestFunction make_function(const FunctionSpec& spec) {
  if (spec.n < 2) throw InvalidArgument("make_function: n must be >= 2");
  if (spec.s < 1 || spec.s > spec.n) throw InvalidArgument("make_function: need 1 <= s <= n");
  TestFunction f;
  if (spec.family == "sum_squares") {
    f = sum_squares(spec);
  } else if (spec.family == "quad_mmt") {
    f = quad_mmt(spec);
  } else if (spec.family == "eq14") {
    f = eq14(spec);
  } else if (spec.family == "edr") {
    f = edr(spec);
  } else {
    throw InvalidArgument("make_function: unknown family '" + spec.family + "'");
  }
  f.n = spec.n;
  f.s = spec.s;
  self_check(f, spec.seed);
  return f;
}

VectorFunction make_vector_function(const FunctionSpec& spec) {
  VectorFunction vf;
  vf.n = spec.n;
  if (!is_vector_family(spec.family)) {
    vf.outputs.push_back(make_function(spec));
    vf.name = vf.outputs.front().name;
    vf.relevant_span = vf.outputs.front().relevant_span;
    return vf;
  }
  if (spec.n < 2) throw InvalidArgument("make_function: n must be >= 2");
  if (spec.s < 1 || spec.s > spec.n) throw InvalidArgument("make_function: need 1 <= s <= n");
  vf.name = spec.family;
  Rng rng(spec.seed);
  const SparseCols all = column_sparse(rng, spec.n, 3, spec.s);
  for (std::size_t i = 0; i < all.cols.size(); ++i) {
    SparseCols single;
    single.cols.push_back(all.cols[i]);
    auto mi = std::make_shared<const SparseCols>(std::move(single));
    TestFunction f;
    f.name = spec.family + "[" + std::to_string(i) + "]";
    f.n = spec.n;
    f.s = spec.s;
    f.value = [mi](const Vector& x) { return mi->apply_t(x).squaredNorm(); };
    f.gradient = [mi](const Vector& x) {
      Vector g = Vector::Zero(x.size());
      mi->add_apply(mi->apply_t(x), 2.0, g);
      return g;
    };
    f.minimum = 0.0;
    f.relevant_span = orthonormal_columns(mi->dense(spec.n));
    self_check(f, derive_seed(spec.seed, i));
    vf.outputs.push_back(std::move(f));
  }
  vf.relevant_span = orthonormal_columns(all.dense(spec.n));
  return vf;
}

}  // namespace sparsegrad
