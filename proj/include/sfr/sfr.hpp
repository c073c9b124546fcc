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
/// Sparse function-space representation of a trained network.
///
/// The network is linearized at its MAP weights w*, which gives a zero-mean
/// GP with the NTK as covariance. A Laplace approximation in function space
/// makes the per-point dual parameters the likelihood derivatives at the
/// network outputs,
///
///     alpha_i = d/df log p(y_i | f),   beta_i = -d²/df² log p(y_i | f),   f = f_{w*}(x_i),
///
/// and projecting them onto M inducing inputs Z gives the sparse duals
///
///     alpha_u = sum_i k_zi alpha_i,    B_u = sum_i k_zi beta_i k_ziᵀ,
///
/// a sum over all N points. Prediction then costs O(M²) per point:
///
///     E[f]   = k_zᵀ K_zz⁻¹ alpha_u
///     Var[f] = k_** - k_zᵀ [K_zz⁻¹ - (K_zz + B_u)⁻¹] k_z.
///
/// New data is absorbed by adding its terms to alpha_u and B_u, without
/// touching the weights. Multi-output networks get one independent kernel and
/// one set of duals per output.

#ifndef SFR_SFR_HPP
#define SFR_SFR_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "sfr/data.hpp"
#include "sfr/kernel.hpp"
#include "sfr/likelihood.hpp"
#include "sfr/linalg.hpp"
#include "sfr/nn.hpp"

namespace sfr {

enum class MeanMode { ZeroMean, NnMean };

inline std::string to_string(MeanMode mode) { return mode == MeanMode::ZeroMean ? "zero_mean" : "nn_mean"; }

inline MeanMode mean_mode_from_string(const std::string& s) {
  if (s == "zero_mean") return MeanMode::ZeroMean;
  if (s == "nn_mean") return MeanMode::NnMean;
  throw Error(ErrorKind::InvalidConfig, "unknown mean mode '" + s + "'");
}

struct InducingSet {
  Matrix Z;
  std::vector<std::size_t> source_indices;  // rows of the training inputs, when sampled
  std::uint64_t seed = 0;

  Eigen::Index size() const { return Z.rows(); }
};

/// Sparse duals, one entry per output: alpha_u[c] has length M, B_u[c] is M x M.
struct DualParams {
  std::vector<Vector> alpha_u;
  std::vector<Matrix> B_u;

  static DualParams zeros(int num_outputs, Eigen::Index m) {
    DualParams d;
    d.alpha_u.assign(static_cast<std::size_t>(num_outputs), Vector::Zero(m));
    d.B_u.assign(static_cast<std::size_t>(num_outputs), Matrix::Zero(m, m));
    return d;
  }
};

/// Fitted sparse posterior. Treat as immutable: dual_update returns a new one.
struct SfrPosterior {
  InducingSet inducing;
  DualParams duals;
  NtkKernel kernel;
  Likelihood likelihood;
  MeanMode mean_mode = MeanMode::ZeroMean;

  // Caches derived from the members above.
  JacobianSet z_jacobians;
  std::vector<Matrix> kzz;
  std::vector<CholeskyFactor> kzz_chol;
  std::vector<CholeskyFactor> kzz_plus_B_chol;
  std::vector<Vector> mean_weights;  // K_zz⁻¹ alpha_u

  int num_outputs() const { return kernel.num_outputs(); }
};

/// Latent predictive moments, N x C each. Variances are clamped at zero;
/// min_raw_variance is the smallest value seen before clamping.
struct LatentPredictive {
  Matrix mean;
  Matrix var;
  double min_raw_variance = std::numeric_limits<double>::infinity();
};

/// Observation-space predictive: Gaussian mean/variance (N x 1) for
/// regression, or N x K probability rows for classification.
struct Predictive {
  bool gaussian = false;
  Matrix mean;
  Matrix var;
  Matrix probs;
};

/// M rows of X drawn uniformly without replacement, deterministic in seed.
inline InducingSet sample_inducing(const Matrix& X, Eigen::Index m, std::uint64_t seed) {
  require(m >= 1 && m <= X.rows(), ErrorKind::MTooLarge,
          "cannot draw " + std::to_string(m) + " inducing points from " + std::to_string(X.rows()) + " rows");
  Rng gen(seed);
  InducingSet out;
  out.seed = seed;
  out.source_indices = partial_shuffle(static_cast<std::size_t>(X.rows()), static_cast<std::size_t>(m), gen);
  out.Z.resize(m, X.cols());
  for (Eigen::Index i = 0; i < m; ++i) out.Z.row(i) = X.row(static_cast<Eigen::Index>(out.source_indices[static_cast<std::size_t>(i)]));
  return out;
}

namespace detail {

/// Adds the contributions of `data` to `duals` point by point, in row order.
/// Only the lower triangle of B_u is accumulated; call mirror_lower afterwards.
inline void accumulate_duals(DualParams& duals, const JacobianSet& z_jac, const Weights& w_star, double delta,
                             const Likelihood& lik, const Dataset& data, Eigen::Index batch) {
  require(batch >= 1, ErrorKind::InvalidArgument, "batch must be >= 1");
  const int C = w_star.spec.output_dim;
  const Eigen::Index M = z_jac.size();
  Vector scaled(M);
  for (Eigen::Index b0 = 0; b0 < data.size(); b0 += batch) {
    const Eigen::Index nb = std::min(batch, data.size() - b0);
    std::vector<PointJacobian> points;
    points.reserve(static_cast<std::size_t>(nb));
    for (Eigen::Index i = 0; i < nb; ++i) points.push_back(jacobian_and_output(w_star, data.X.row(b0 + i).transpose()));

    for (Eigen::Index i = 0; i < nb; ++i) {
      const auto& pj = points[static_cast<std::size_t>(i)];
      const DualPair dp = dual_alpha_beta(lik, data.y(b0 + i), pj.f);
      for (int c = 0; c < C; ++c) {
        const auto uc = static_cast<std::size_t>(c);
        const Vector k = kernel_column(z_jac, pj.J, c, delta);
        duals.alpha_u[uc] += dp.alpha(c) * k;
        const double beta = dp.beta(c);
        if (beta == 0.0) continue;
        scaled = beta * k;
        Matrix& B = duals.B_u[uc];
        for (Eigen::Index col = 0; col < M; ++col) {
          for (Eigen::Index row = col; row < M; ++row) B(row, col) += scaled(row) * k(col);
        }
      }
    }
  }
}

inline void mirror_lower(Matrix& B) { B.triangularView<Eigen::StrictlyUpper>() = B.transpose(); }

/// Factor of K_zz + B as L chol(I + L⁻¹ B L⁻ᵀ), with L the K_zz factor. Sharing
/// L keeps the jitter of both factors identical, so the prior and data terms of
/// the variance cancel consistently when K_zz is badly conditioned. When the
/// whitened matrix is lost to cancellation or is not positive definite as
/// computed, L Lᵀ + B is factored directly.
inline CholeskyFactor factor_with_prior(const CholeskyFactor& kzz, const Matrix& B) {
  const Matrix half = solve_lower(kzz, B);
  Matrix whitened = symmetrize(solve_lower(kzz, Matrix(half.transpose())));
  whitened.diagonal().array() += 1.0;
  if (whitened.allFinite() && whitened.diagonal().minCoeff() >= 0.5) {
    try {
      const CholeskyFactor inner = cholesky_jittered(whitened);
      if (inner.jitter_used > 0.0) throw Error(ErrorKind::JitterExhausted, "whitened factor needs jitter");
      CholeskyFactor out;
      out.lower = kzz.lower.triangularView<Eigen::Lower>() * inner.lower;
      out.lower.triangularView<Eigen::StrictlyUpper>().setZero();
      out.jitter_used = kzz.jitter_used;
      return out;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::JitterExhausted) throw;
    }
  }
  const Matrix L = kzz.lower.triangularView<Eigen::Lower>();
  CholeskyFactor out = cholesky_jittered(symmetrize(Matrix(L * L.transpose() + B)));
  out.jitter_used += kzz.jitter_used;
  return out;
}

inline void refactor_duals(SfrPosterior& post) {
  const int C = post.num_outputs();
  post.kzz_plus_B_chol.clear();
  post.mean_weights.clear();
  for (int c = 0; c < C; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    post.kzz_plus_B_chol.push_back(factor_with_prior(post.kzz_chol[uc], post.duals.B_u[uc]));
    post.mean_weights.push_back(solve_posdef(post.kzz_chol[uc], post.duals.alpha_u[uc]));
  }
}

}  // namespace detail

/// Builds a posterior from given duals: caches J(Z), factors K_zz and K_zz + B_u.
inline SfrPosterior make_posterior(NtkKernel kernel, Likelihood lik, InducingSet inducing, DualParams duals,
                                   MeanMode mode = MeanMode::ZeroMean) {
  const int C = kernel.num_outputs();
  require(C == lik.num_outputs(), ErrorKind::DimensionMismatch, "network outputs do not match the likelihood");
  require(duals.alpha_u.size() == static_cast<std::size_t>(C) && duals.B_u.size() == static_cast<std::size_t>(C),
          ErrorKind::DimensionMismatch, "dual parameters need one block per output");
  for (int c = 0; c < C; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    require(duals.alpha_u[uc].size() == inducing.size() && duals.B_u[uc].rows() == inducing.size() &&
                duals.B_u[uc].cols() == inducing.size(),
            ErrorKind::DimensionMismatch, "dual parameter size does not match the inducing set");
  }
  SfrPosterior post;
  post.inducing = std::move(inducing);
  post.duals = std::move(duals);
  post.kernel = std::move(kernel);
  post.likelihood = std::move(lik);
  post.mean_mode = mode;
  post.z_jacobians = jacobians(post.kernel.weights_star, post.inducing.Z);
  for (int c = 0; c < C; ++c) {
    post.kzz.push_back(self_gram(post.z_jacobians, c, post.kernel.prior_precision));
    post.kzz_chol.push_back(cholesky_jittered(post.kzz.back()));
  }
  detail::refactor_duals(post);
  return post;
}

/// Sparse duals of `data` at inducing inputs Z, accumulated in `batch`-sized
/// chunks. The sum runs over points in row order whatever the batch size.
inline SfrPosterior fit(const Dataset& data, const Weights& w_star, const Likelihood& lik, double prior_precision,
                        const InducingSet& Z, Eigen::Index batch = 256, MeanMode mode = MeanMode::ZeroMean) {
  require(prior_precision > 0.0, ErrorKind::InvalidArgument, "prior precision must be positive");
  require(Z.size() >= 1, ErrorKind::InvalidArgument, "empty inducing set");
  require(data.dims() == w_star.spec.input_dim && Z.Z.cols() == w_star.spec.input_dim, ErrorKind::DimensionMismatch,
          "data and inducing inputs must match the network input width");
  NtkKernel kernel{w_star, prior_precision};
  const JacobianSet z_jac = jacobians(w_star, Z.Z);
  DualParams duals = DualParams::zeros(kernel.num_outputs(), Z.size());
  detail::accumulate_duals(duals, z_jac, w_star, prior_precision, lik, data, batch);
  for (auto& B : duals.B_u) detail::mirror_lower(B);
  return make_posterior(std::move(kernel), lik, Z, std::move(duals), mode);
}

/// Adds new data to the duals with the same fixed w*. K_zz is reused; only
/// K_zz + B_u is refactored. Empty data returns an identical posterior.
inline SfrPosterior dual_update(const SfrPosterior& post, const Dataset& new_data, Eigen::Index batch = 256) {
  if (new_data.empty()) return post;
  require(new_data.dims() == post.kernel.weights_star.spec.input_dim, ErrorKind::DimensionMismatch,
          "new data width does not match the network");
  SfrPosterior out = post;
  // accumulate_duals adds into the lower triangle only; the upper one is restored below.
  detail::accumulate_duals(out.duals, out.z_jacobians, out.kernel.weights_star, out.kernel.prior_precision,
                           out.likelihood, new_data, batch);
  for (auto& B : out.duals.B_u) detail::mirror_lower(B);
  detail::refactor_duals(out);
  return out;
}

/// GP-subset baseline: duals from the inducing rows only (ascending training
/// index order), with the same prediction machinery as fit.
inline SfrPosterior gp_subset_fit(const Dataset& data, const Weights& w_star, const Likelihood& lik,
                                  double prior_precision, const InducingSet& Z, MeanMode mode = MeanMode::ZeroMean) {
  require(Z.source_indices.size() == static_cast<std::size_t>(Z.size()), ErrorKind::InvalidArgument,
          "GP subset needs inducing points sampled from the training data");
  std::vector<std::size_t> idx = Z.source_indices;
  std::sort(idx.begin(), idx.end());
  return fit(subset(data, idx), w_star, lik, prior_precision, Z, 256, mode);
}

/// Latent mean and variance at X_test, per output.
inline LatentPredictive predict_f(const SfrPosterior& post, const Matrix& X_test) {
  const Weights& w = post.kernel.weights_star;
  require(X_test.cols() == w.spec.input_dim, ErrorKind::DimensionMismatch, "test input width");
  const int C = post.num_outputs();
  const Eigen::Index n = X_test.rows();
  const Eigen::Index M = post.inducing.size();
  const double delta = post.kernel.prior_precision;

  LatentPredictive out;
  out.mean.resize(n, C);
  out.var.resize(n, C);
  std::vector<Matrix> kzx(static_cast<std::size_t>(C), Matrix(M, n));
  std::vector<Vector> kxx(static_cast<std::size_t>(C), Vector(n));
  Matrix nn_out(n, C);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PointJacobian pj = jacobian_and_output(w, X_test.row(i).transpose());
    nn_out.row(i) = pj.f.transpose();
    for (int c = 0; c < C; ++c) {
      const auto uc = static_cast<std::size_t>(c);
      kzx[uc].col(i) = kernel_column(post.z_jacobians, pj.J, c, delta);
      kxx[uc](i) = detail::ntk_entry(pj.J.row(c), pj.J.row(c), delta);
    }
  }
  for (int c = 0; c < C; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    const Matrix prior_part = solve_lower(post.kzz_chol[uc], kzx[uc]);
    const Matrix data_part = solve_lower(post.kzz_plus_B_chol[uc], kzx[uc]);
    const Vector raw = kxx[uc] - prior_part.colwise().squaredNorm().transpose() +
                       data_part.colwise().squaredNorm().transpose();
    out.min_raw_variance = std::min(out.min_raw_variance, raw.size() ? raw.minCoeff() : out.min_raw_variance);
    out.var.col(c) = raw.cwiseMax(0.0);
    if (post.mean_mode == MeanMode::NnMean) {
      out.mean.col(c) = nn_out.col(c);
    } else {
      out.mean.col(c) = kzx[uc].transpose() * post.mean_weights[uc];
    }
  }
  return out;
}

/// Turns latent moments into predictive densities (Gaussian) or Monte Carlo
/// class probabilities using `samples` draws per row from a generator seeded once.
inline Predictive predictive_from_latent(const Likelihood& lik, const LatentPredictive& latent, int samples,
                                         std::uint64_t seed) {
  Predictive out;
  const Eigen::Index n = latent.mean.rows();
  if (lik.is_gaussian()) {
    out.gaussian = true;
    out.mean = latent.mean;
    out.var = (latent.var.array() + lik.noise_variance()).matrix();
    return out;
  }
  out.probs.resize(n, lik.num_classes());
  Rng gen(seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto e = expected_prob(lik, latent.mean.row(i).transpose(), latent.var.row(i).transpose(), samples, gen);
    out.probs.row(i) = std::get<Vector>(e).transpose();
  }
  return out;
}

inline Predictive predict_y(const SfrPosterior& post, const Matrix& X_test, int samples = 64, std::uint64_t seed = 0) {
  return predictive_from_latent(post.likelihood, predict_f(post, X_test), samples, seed);
}

/// Dense dual-form GP over all N training points (the M = N oracle):
/// mean k_xᵀ alpha, variance k_** - k_xᵀ (K_xx + diag(beta)⁻¹)⁻¹ k_x, with
/// alpha, beta the Laplace duals at f_{w*}(X) and beta clamped at 1e-12.
inline LatentPredictive full_gp_predict(const Dataset& data, const Weights& w_star, const Likelihood& lik,
                                        double prior_precision, const Matrix& X_test,
                                        MeanMode mode = MeanMode::ZeroMean) {
  constexpr Eigen::Index max_points = 5000;
  require(data.size() <= max_points, ErrorKind::NTooLarge,
          "full GP limited to " + std::to_string(max_points) + " points, got " + std::to_string(data.size()));
  require(X_test.cols() == w_star.spec.input_dim && data.dims() == w_star.spec.input_dim,
          ErrorKind::DimensionMismatch, "input width does not match the network");
  const int C = w_star.spec.output_dim;
  const Eigen::Index N = data.size();
  const Eigen::Index n = X_test.rows();

  JacobianSet train_jac;
  train_jac.per_class.assign(static_cast<std::size_t>(C), RowMatrix(N, w_star.num_params()));
  Matrix alpha(N, C);
  Matrix beta(N, C);
  for (Eigen::Index i = 0; i < N; ++i) {
    const PointJacobian pj = jacobian_and_output(w_star, data.X.row(i).transpose());
    for (int c = 0; c < C; ++c) train_jac.per_class[static_cast<std::size_t>(c)].row(i) = pj.J.row(c);
    const DualPair dp = dual_alpha_beta(lik, data.y(i), pj.f);
    alpha.row(i) = dp.alpha.transpose();
    beta.row(i) = dp.beta.transpose();
  }

  LatentPredictive out;
  out.mean.resize(n, C);
  out.var.resize(n, C);
  std::vector<Matrix> kxs(static_cast<std::size_t>(C), Matrix(N, n));
  std::vector<Vector> kss(static_cast<std::size_t>(C), Vector(n));
  Matrix nn_out(n, C);
  for (Eigen::Index j = 0; j < n; ++j) {
    const PointJacobian pj = jacobian_and_output(w_star, X_test.row(j).transpose());
    nn_out.row(j) = pj.f.transpose();
    for (int c = 0; c < C; ++c) {
      const auto uc = static_cast<std::size_t>(c);
      kxs[uc].col(j) = kernel_column(train_jac, pj.J, c, prior_precision);
      kss[uc](j) = detail::ntk_entry(pj.J.row(c), pj.J.row(c), prior_precision);
    }
  }
  for (int c = 0; c < C; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    Matrix A = self_gram(train_jac, c, prior_precision);
    A.diagonal() += beta.col(c).cwiseMax(1e-12).cwiseInverse();
    const CholeskyFactor F = cholesky_jittered(A);
    const Matrix half = solve_lower(F, kxs[uc]);
    const Vector raw = kss[uc] - half.colwise().squaredNorm().transpose();
    out.min_raw_variance = std::min(out.min_raw_variance, raw.size() ? raw.minCoeff() : out.min_raw_variance);
    out.var.col(c) = raw.cwiseMax(0.0);
    out.mean.col(c) = mode == MeanMode::NnMean ? Vector(nn_out.col(c)) : Vector(kxs[uc].transpose() * alpha.col(c));
  }
  return out;
}

}  // namespace sfr

#endif  // SFR_SFR_HPP
