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

// Test functions with sparse gradients and their analytic gradients.
//
//   sum_squares  f(x) = x_1^2 + ... + x_s^2
//   quad_mmt     f(x) = x^T M M^T x, M is n x 3 with s nonzero rows of +-1
//   eq14         f(x) = |M1^T x|^6 + |M2^T x|^4 + (M1^T x).(M2^T x), where
//                every column of M1, M2 (n x 3) holds s entries of +-1
//   edr          f(x) = |B x|^2 + (b_1.x)(b_2.x)^2 with B a d x n matrix
//                whose rows have s nonzero +-1 entries
//   quad_mmt_vec three outputs f_i(x) = (m_i.x)^2, each m_i with s entries
//                of +-1 (vector valued; used for the EGOP)

#ifndef SPARSEGRAD_ZOO_HPP_
#define SPARSEGRAD_ZOO_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sparsegrad/core.hpp"
#include "sparsegrad/objective.hpp"

namespace sparsegrad {

struct FunctionSpec {
  std::string family = "sum_squares";
  Index n = 0;
  Index s = 3;
  Index d = 2;              ///< edr only
  std::uint64_t seed = 0;   ///< draws the sparse matrices
};

struct TestFunction {
  std::string name;
  Index n = 0;
  Index s = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::optional<double> minimum;
  /// Orthonormal basis of the span every gradient lives in, when known
  /// (the e.d.r. space). Columns are basis vectors.
  Matrix relevant_span;

  /// Reentrant objective over `value`.
  Objective objective(NoiseModel noise = {}) const;
};

/// Vector-valued function as a list of scalar outputs.
struct VectorFunction {
  std::string name;
  Index n = 0;
  std::vector<TestFunction> outputs;
  Matrix relevant_span;
};

/// Builds a scalar family. Throws InvalidArgument on an unknown family or bad
/// sizes. The analytic gradient is checked against central differences on a
/// few coordinates before returning.
TestFunction make_function(const FunctionSpec& spec);

/// Builds a vector-valued family ("quad_mmt_vec"), or wraps a scalar family
/// as a single output.
VectorFunction make_vector_function(const FunctionSpec& spec);

bool is_vector_family(const std::string& family);

/// Standard normal point of length n.
Vector normal_point(Index n, std::uint64_t seed);

}  // namespace sparsegrad

#endif  // SPARSEGRAD_ZOO_HPP_
