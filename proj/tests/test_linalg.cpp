// Copyright 2026 The SFR Authors
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

#include <gtest/gtest.h>

#include <cmath>

#include "sfr/linalg.hpp"
#include "test_support.hpp"

namespace sfr {
namespace {

TEST(Cholesky, IdentityNeedsNoJitter) {
  const auto f = cholesky_jittered(Matrix::Identity(2, 2), 1e-8);
  EXPECT_EQ(f.jitter_used, 0.0);
  EXPECT_TRUE(f.lower.isApprox(Matrix::Identity(2, 2)));
}

TEST(Cholesky, HandFactorOfTwoByTwo) {
  Matrix a(2, 2);
  a << 4, 2, 2, 3;
  const auto f = cholesky_jittered(a);
  Matrix expected(2, 2);
  expected << 2, 0, 1, std::sqrt(2.0);
  EXPECT_EQ(f.jitter_used, 0.0);
  EXPECT_LE((f.lower - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Cholesky, SingularMatrixGetsJitter) {
  Matrix a(2, 2);
  a << 1, 1, 1, 1;
  const auto f = cholesky_jittered(a);
  EXPECT_GT(f.jitter_used, 0.0);
  EXPECT_LE(f.jitter_used, 1e-2);
  Matrix shifted = a;
  shifted.diagonal().array() += f.jitter_used;
  EXPECT_LE((reconstruct(f) - shifted).norm(), 1e-8 * shifted.norm());
}

TEST(Cholesky, Errors) {
  EXPECT_THROW(
      {
        try {
          cholesky_jittered(Matrix::Ones(2, 3));
        } catch (const Error& e) {
          EXPECT_EQ(e.kind(), ErrorKind::NotSquare);
          throw;
        }
      },
      Error);
  Matrix asym(2, 2);
  asym << 1, 0.5, 0.4, 1;
  try {
    cholesky_jittered(asym);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Asymmetric);
  }
  Matrix neg(2, 2);
  neg << 1, 0, 0, -1;
  try {
    cholesky_jittered(neg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::JitterExhausted);
  }
}

TEST(Cholesky, ReconstructionBoundOnRandomPsd) {
  Rng gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 7;
    const Eigen::Index rank = 1 + trial % static_cast<int>(n);
    const Matrix G = testing::random_matrix(n, rank, gen);
    const Matrix a = G * G.transpose();
    const auto f = cholesky_jittered(a);
    const double bound = f.jitter_used * std::sqrt(static_cast<double>(n)) + 1e-8 * a.norm();
    EXPECT_LE((reconstruct(f) - a).norm(), bound) << "trial " << trial;
  }
}

TEST(SolvePosdef, Examples) {
  const auto f3 = cholesky_jittered(Matrix::Identity(3, 3));
  EXPECT_TRUE(solve_posdef(f3, Matrix(Matrix::Identity(3, 3))).isApprox(Matrix::Identity(3, 3)));

  Matrix a(2, 2);
  a << 4, 2, 2, 3;
  EXPECT_LE((solve_posdef(cholesky_jittered(a), a) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-14);

  Matrix d(2, 2);
  d << 2, 0, 0, 2;
  Matrix b(2, 1);
  b << 2, 4;
  const Matrix x = solve_posdef(cholesky_jittered(d), b);
  EXPECT_DOUBLE_EQ(x(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(x(1, 0), 2.0);

  try {
    solve_posdef(f3, Matrix(Matrix::Ones(2, 1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(SolvePosdef, LeftInverseOnWellConditioned) {
  Rng gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 3 + trial;
    const Matrix G = testing::random_matrix(n, n, gen);
    const Matrix a = G * G.transpose() + static_cast<double>(n) * Matrix::Identity(n, n);
    const Matrix x = testing::random_matrix(n, 2, gen);
    const Matrix back = solve_posdef(cholesky_jittered(a), Matrix(a * x));
    EXPECT_LE((back - x).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Psd, MinEigenvalueAndHelpers) {
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  EXPECT_NEAR(min_eigenvalue(a), 1.0, 1e-14);
  EXPECT_TRUE(is_psd(a));
  Matrix b(2, 2);
  b << 1, 2, 2, 1;
  EXPECT_FALSE(is_psd(b));
  EXPECT_EQ(relative_asymmetry(a), 0.0);
  const std::vector<double> u{1, 2, 3};
  const std::vector<double> v{4, 5, 6};
  EXPECT_EQ(dot_ordered(u, v), 32.0);
}

}  // namespace
}  // namespace sfr
