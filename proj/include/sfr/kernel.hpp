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
/// Empirical neural tangent kernel of a trained network,
/// kappa_c(x, x') = J_c(x) J_c(x')ᵀ / delta, one kernel per output.

#ifndef SFR_KERNEL_HPP
#define SFR_KERNEL_HPP

#include <span>
#include <vector>

#include "sfr/linalg.hpp"
#include "sfr/nn.hpp"

namespace sfr {

struct NtkKernel {
  Weights weights_star;
  double prior_precision = 1.0;

  int num_outputs() const { return weights_star.spec.output_dim; }
};

/// Kernel blocks between two point sets, one A x B matrix per output.
struct GramBlock {
  std::vector<Matrix> per_class;
};

/// Per-output Jacobian rows of a point set: per_class[c] is N x P.
struct JacobianSet {
  std::vector<RowMatrix> per_class;

  Eigen::Index size() const { return per_class.empty() ? 0 : per_class.front().rows(); }
};

inline JacobianSet jacobians(const Weights& w, const Matrix& X) {
  require(X.cols() == w.spec.input_dim, ErrorKind::DimensionMismatch, "jacobian input width");
  JacobianSet out;
  out.per_class.assign(static_cast<std::size_t>(w.spec.output_dim), RowMatrix(X.rows(), w.num_params()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const RowMatrix J = jacobian(w, X.row(i).transpose());
    for (int c = 0; c < w.spec.output_dim; ++c) out.per_class[static_cast<std::size_t>(c)].row(i) = J.row(c);
  }
  return out;
}

namespace detail {

template <typename RowA, typename RowB>
double ntk_entry(const RowA& a, const RowB& b, double prior_precision) {
  return dot_ordered(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                     std::span<const double>(b.data(), static_cast<std::size_t>(b.size()))) /
         prior_precision;
}

}  // namespace detail

/// Kernel between every cached row of `z` (class c) and a single point whose
/// C x P Jacobian is `jx`. Each entry is a fixed-order dot product, so the
/// value does not depend on how points were batched.
inline Vector kernel_column(const JacobianSet& z, const RowMatrix& jx, int c, double prior_precision) {
  const RowMatrix& Jz = z.per_class[static_cast<std::size_t>(c)];
  Vector k(Jz.rows());
  for (Eigen::Index m = 0; m < Jz.rows(); ++m) k(m) = detail::ntk_entry(Jz.row(m), jx.row(c), prior_precision);
  return k;
}

/// Gram matrix of a cached Jacobian set with itself, for class c.
inline Matrix self_gram(const JacobianSet& z, int c, double prior_precision) {
  const RowMatrix& J = z.per_class[static_cast<std::size_t>(c)];
  Matrix K(J.rows(), J.rows());
  for (Eigen::Index i = 0; i < J.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      K(i, j) = detail::ntk_entry(J.row(i), J.row(j), prior_precision);
      K(j, i) = K(i, j);
    }
  }
  return K;
}

/// kappa_c(a_i, b_j) for every class, computed in row batches of `batch`
/// points so at most 2 * batch Jacobians are held at once.
inline GramBlock gram(const NtkKernel& k, const Matrix& A, const Matrix& B, Eigen::Index batch = 64) {
  const auto& w = k.weights_star;
  require(A.cols() == w.spec.input_dim && B.cols() == w.spec.input_dim, ErrorKind::DimensionMismatch,
          "gram inputs must have " + std::to_string(w.spec.input_dim) + " columns");
  require(batch >= 1, ErrorKind::InvalidArgument, "batch must be >= 1");
  const int C = k.num_outputs();
  GramBlock out;
  out.per_class.assign(static_cast<std::size_t>(C), Matrix(A.rows(), B.rows()));
  for (Eigen::Index i0 = 0; i0 < A.rows(); i0 += batch) {
    const Eigen::Index ni = std::min(batch, A.rows() - i0);
    const JacobianSet ja = jacobians(w, A.middleRows(i0, ni));
    for (Eigen::Index j0 = 0; j0 < B.rows(); j0 += batch) {
      const Eigen::Index nj = std::min(batch, B.rows() - j0);
      const JacobianSet jb = jacobians(w, B.middleRows(j0, nj));
      for (int c = 0; c < C; ++c) {
        const auto& Ja = ja.per_class[static_cast<std::size_t>(c)];
        const auto& Jb = jb.per_class[static_cast<std::size_t>(c)];
        auto& K = out.per_class[static_cast<std::size_t>(c)];
        for (Eigen::Index i = 0; i < ni; ++i) {
          for (Eigen::Index j = 0; j < nj; ++j) {
            K(i0 + i, j0 + j) = detail::ntk_entry(Ja.row(i), Jb.row(j), k.prior_precision);
          }
        }
      }
    }
  }
  return out;
}

/// kappa_c(x_i, x_i) for every point and class, without forming the Gram matrix.
/// Returns one vector of length N per class.
inline std::vector<Vector> diag(const NtkKernel& k, const Matrix& X) {
  const auto& w = k.weights_star;
  require(X.cols() == w.spec.input_dim, ErrorKind::DimensionMismatch, "diag input width");
  const int C = k.num_outputs();
  std::vector<Vector> out(static_cast<std::size_t>(C), Vector(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const RowMatrix J = jacobian(w, X.row(i).transpose());
    for (int c = 0; c < C; ++c) out[static_cast<std::size_t>(c)](i) = detail::ntk_entry(J.row(c), J.row(c), k.prior_precision);
  }
  return out;
}

}  // namespace sfr

#endif  // SFR_KERNEL_HPP
