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

#include <gtest/gtest.h>

#include "sparsegrad/errors.hpp"
#include "sparsegrad/measurement.hpp"
#include "sparsegrad/zoo.hpp"

namespace sparsegrad {
namespace {

TEST(Zoo, SumSquaresValues) {
  const auto f = make_function({"sum_squares", 10, 3, 2, 0});
  const Vector x = Vector::Ones(10);
  EXPECT_DOUBLE_EQ(f.value(x), 3.0);
  Vector expected = Vector::Zero(10);
  expected.head(3).setConstant(2.0);
  EXPECT_EQ(f.gradient(x), expected);
  EXPECT_EQ(f.minimum, 0.0);
}

TEST(Zoo, QuadMmtGradientIsRowSupported) {
  const auto f = make_function({"quad_mmt", 200, 3, 2, 12});
  const Vector x = normal_point(200, 1);
  const Vector g = f.gradient(x);
  Index nonzero = 0;
  for (Index i = 0; i < g.size(); ++i) nonzero += g(i) != 0.0;
  EXPECT_LE(nonzero, 3);
  EXPECT_GE(nonzero, 1);
  EXPECT_NEAR(f.value(x), 0.5 * x.dot(g), 1e-9 * (1.0 + f.value(x)));
  EXPECT_EQ(f.relevant_span.rows(), 200);
}

TEST(Zoo, Eq14VanishesAtOrigin) {
  const auto f = make_function({"eq14", 100, 3, 2, 4});
  EXPECT_EQ(f.value(Vector::Zero(100)), 0.0);
  EXPECT_EQ(f.gradient(Vector::Zero(100)), Vector::Zero(100));
  const Vector g = f.gradient(normal_point(100, 2));
  Index nonzero = 0;
  for (Index i = 0; i < g.size(); ++i) nonzero += g(i) != 0.0;
  EXPECT_LE(nonzero, 18);
}

TEST(Zoo, GradientsAgreeWithCentralDifferences) {
  for (const char* family : {"sum_squares", "quad_mmt", "eq14", "edr"}) {
    const auto tf = make_function({family, 40, 3, 2, 8});
    auto f = tf.objective();
    const Vector x = 0.5 * normal_point(40, 3);
    const Vector fd = central_fd(f, x, 1e-5);
    const Vector g = tf.gradient(x);
    EXPECT_LE((fd - g).norm(), 1e-5 * (1.0 + g.norm())) << family;
  }
}

TEST(Zoo, EdrGradientLivesInSpan) {
  const auto f = make_function({"edr", 60, 3, 2, 5});
  ASSERT_EQ(f.relevant_span.cols(), 2);
  const Matrix& q = f.relevant_span;
  EXPECT_LE((q.transpose() * q - Matrix::Identity(2, 2)).norm(), 1e-12);
  const Vector g = f.gradient(normal_point(60, 6));
  EXPECT_LE((g - q * (q.transpose() * g)).norm(), 1e-10 * g.norm());
}

TEST(Zoo, VectorFamilyHasThreeOutputs) {
  const auto vf = make_vector_function({"quad_mmt_vec", 50, 3, 2, 1});
  ASSERT_EQ(vf.outputs.size(), 3u);
  EXPECT_EQ(vf.relevant_span.cols(), 3);
  const auto scalar = make_vector_function({"quad_mmt", 50, 3, 2, 1});
  EXPECT_EQ(scalar.outputs.size(), 1u);
}

TEST(Zoo, Deterministic) {
  const auto a = make_function({"eq14", 80, 3, 2, 7});
  const auto b = make_function({"eq14", 80, 3, 2, 7});
  const Vector x = normal_point(80, 1);
  EXPECT_EQ(a.value(x), b.value(x));
}

TEST(Zoo, RejectsUnknownFamily) {
  EXPECT_THROW(make_function({"rosenbrock", 10, 3, 2, 0}), InvalidArgument);
  EXPECT_THROW(make_function({"sum_squares", 10, 11, 2, 0}), InvalidArgument);
}

}  // namespace
}  // namespace sparsegrad
