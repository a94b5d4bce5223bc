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

#include "sparsegrad/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sparsegrad/errors.hpp"

namespace sparsegrad {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

double Rng::sign() { return (engine_() >> 63) != 0 ? 1.0 : -1.0; }

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("Rng::below: bound must be positive");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return r % bound;
}

MeasurementMatrix gaussian_matrix(Index m, Index n, std::uint64_t seed) {
  if (m <= 0 || n <= 0) {
    throw InvalidArgument("gaussian_matrix: dimensions must be positive");
  }
  if (m >= n) {
    throw InvalidArgument("gaussian_matrix: need m < n (got m=" + std::to_string(m) +
                          ", n=" + std::to_string(n) + ")");
  }
  Rng rng(seed);
  MeasurementMatrix a;
  a.seed = seed;
  a.entries.resize(m, n);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) a.entries(i, j) = rng.normal();
  }
  return a;
}

PerturbationSigns rademacher_signs(Index m, std::uint64_t seed) {
  if (m <= 0) throw InvalidArgument("rademacher_signs: m must be positive");
  Rng rng(seed);
  PerturbationSigns out;
  out.signs.resize(m);
  for (Index i = 0; i < m; ++i) out.signs(i) = rng.sign();
  return out;
}

SparseApproximation best_s_sparse(const Vector& x, Index s) {
  const Index n = x.size();
  if (s < 0 || s > n) throw InvalidArgument("best_s_sparse: need 0 <= s <= n");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(x(a)) > std::abs(x(b));
  });
  SparseApproximation out;
  out.x = Vector::Zero(n);
  double tail = 0.0;
  for (Index r = 0; r < n; ++r) {
    const Index i = order[static_cast<std::size_t>(r)];
    if (r < s) {
      out.x(i) = x(i);
    } else {
      tail += x(i) * x(i);
    }
  }
  out.defect = std::sqrt(tail);
  return out;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace sparsegrad
