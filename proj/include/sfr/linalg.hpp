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

/// \file
/// Dense linear algebra used by every other module: jittered Cholesky,
/// positive-definite solves and a few PSD helpers. Everything is double
/// precision and dense.

#ifndef SFR_LINALG_HPP
#define SFR_LINALG_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "sfr/error.hpp"

namespace sfr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Row-major storage, used where rows are read as contiguous vectors (Jacobians).
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Lower-triangular factor L with L Lᵀ = A + jitter_used I.
struct CholeskyFactor {
  Matrix lower;
  double jitter_used = 0.0;

  Eigen::Index rows() const { return lower.rows(); }
};

/// Sum of a[k] * b[k] in index order. Used wherever results must not depend on
/// how a computation was batched.
inline double dot_ordered(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// max |A - Aᵀ| relative to max |A| (0 for the zero matrix).
inline double relative_asymmetry(const Matrix& a) {
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Factor A + jI for the smallest j in {0, base, 10 base, 100 base, ...} that
/// succeeds. base_jitter defaults to 1e-8 * mean(diag(A)); the schedule stops
/// once j would exceed 1e-2 * mean(diag(A)).
inline CholeskyFactor cholesky_jittered(const Matrix& a,
                                        std::optional<double> base_jitter = std::nullopt) {
  require(a.rows() == a.cols(), ErrorKind::NotSquare,
          "cholesky of " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " matrix");
  require(a.allFinite(), ErrorKind::InvalidArgument, "cholesky input has non-finite entries");
  require(relative_asymmetry(a) <= 1e-10, ErrorKind::Asymmetric,
          "relative asymmetry " + std::to_string(relative_asymmetry(a)));

  const Eigen::Index n = a.rows();
  if (n == 0) return {Matrix(0, 0), 0.0};

  const double mean_diag = a.diagonal().mean();
  const double max_jitter = 1e-2 * mean_diag;
  double base = base_jitter.value_or(1e-8 * mean_diag);
  if (!(base > 0.0)) base = 1e-8 * mean_diag;

  double jitter = 0.0;
  while (true) {
    Matrix shifted = a;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success) {
      Matrix lower = llt.matrixL();
      if (lower.allFinite()) return {std::move(lower), jitter};
    }
    const double next = jitter == 0.0 ? base : jitter * 10.0;
    if (!(next <= max_jitter) || !(next > 0.0)) {
      throw Error(ErrorKind::JitterExhausted,
                  "no jitter up to " + std::to_string(max_jitter) + " makes the matrix positive definite");
    }
    jitter = next;
  }
}

/// X with (L Lᵀ) X = B.
inline Matrix solve_posdef(const CholeskyFactor& f, const Matrix& b) {
  require(f.rows() == b.rows(), ErrorKind::DimensionMismatch,
          "factor has " + std::to_string(f.rows()) + " rows, rhs has " + std::to_string(b.rows()));
  const auto l = f.lower.triangularView<Eigen::Lower>();
  Matrix y = l.solve(b);
  return l.transpose().solve(y);
}

inline Vector solve_posdef(const CholeskyFactor& f, const Vector& b) {
  return solve_posdef(f, Matrix(b)).col(0);
}

/// L⁻¹ B, the half solve used for quadratic forms bᵀ A⁻¹ b = ‖L⁻¹ b‖².
inline Matrix solve_lower(const CholeskyFactor& f, const Matrix& b) {
  require(f.rows() == b.rows(), ErrorKind::DimensionMismatch, "solve_lower rhs rows");
  return f.lower.triangularView<Eigen::Lower>().solve(b);
}

inline Matrix reconstruct(const CholeskyFactor& f) { return f.lower * f.lower.transpose(); }

/// Inverse of the factored matrix, symmetrized.
inline Matrix inverse(const CholeskyFactor& f) {
  return symmetrize(solve_posdef(f, Matrix(Matrix::Identity(f.rows(), f.rows()))));
}

inline double min_eigenvalue(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(a), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

/// PSD up to a tolerance relative to the mean eigenvalue: λ_min ≥ -rel_tol · trace / n.
inline bool is_psd(const Matrix& a, double rel_tol = 1e-8) {
  if (a.size() == 0) return true;
  const double scale = std::abs(a.trace()) / static_cast<double>(a.rows());
  return min_eigenvalue(a) >= -rel_tol * scale;
}

}  // namespace sfr

#endif  // SFR_LINALG_HPP
