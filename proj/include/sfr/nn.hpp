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
/// Multilayer perceptron: flat weight layout, batched forward/backward pass,
/// exact per-sample Jacobians and MAP training with Adam.

#ifndef SFR_NN_HPP
#define SFR_NN_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sfr/data.hpp"
#include "sfr/error.hpp"
#include "sfr/likelihood.hpp"
#include "sfr/linalg.hpp"
#include "sfr/random.hpp"

namespace sfr {

enum class Activation { Tanh, Relu, Sigmoid };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "tanh";
}

inline Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw Error(ErrorKind::InvalidConfig, "unknown activation '" + name + "'");
}

struct NetworkSpec {
  int input_dim = 1;
  int output_dim = 1;
  std::vector<int> hidden_widths;
  Activation activation = Activation::Tanh;

  void validate() const {
    require(input_dim >= 1 && output_dim >= 1, ErrorKind::InvalidArgument, "network dims must be >= 1");
    for (int h : hidden_widths) require(h >= 1, ErrorKind::InvalidArgument, "hidden widths must be >= 1");
  }

  /// Layer widths from input to output.
  std::vector<int> widths() const {
    std::vector<int> w{input_dim};
    w.insert(w.end(), hidden_widths.begin(), hidden_widths.end());
    w.push_back(output_dim);
    return w;
  }

  bool operator==(const NetworkSpec&) const = default;
};

/// One affine layer: a rows x cols weight block (row-major, rows = fan-out)
/// at `offset`, followed by `rows` biases.
struct LayerLayout {
  int rows = 0;
  int cols = 0;
  Eigen::Index offset = 0;

  Eigen::Index weight_count() const { return static_cast<Eigen::Index>(rows) * cols; }
  Eigen::Index bias_offset() const { return offset + weight_count(); }
  Eigen::Index end() const { return bias_offset() + rows; }

  bool operator==(const LayerLayout&) const = default;
};

inline std::vector<LayerLayout> make_layout(const NetworkSpec& spec) {
  spec.validate();
  const auto widths = spec.widths();
  std::vector<LayerLayout> layout;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    LayerLayout layer{widths[l + 1], widths[l], offset};
    offset = layer.end();
    layout.push_back(layer);
  }
  return layout;
}

struct Weights {
  Vector values;
  NetworkSpec spec;
  std::vector<LayerLayout> layout;

  Weights() = default;
  Weights(NetworkSpec s, Vector v) : values(std::move(v)), spec(std::move(s)), layout(make_layout(spec)) {
    require(values.size() == num_params(), ErrorKind::DimensionMismatch,
            "weight vector of length " + std::to_string(values.size()) + " for a network with " +
                std::to_string(num_params()) + " parameters");
  }

  Eigen::Index num_params() const { return layout.empty() ? 0 : layout.back().end(); }

  Eigen::Map<const RowMatrix> weight(std::size_t l) const {
    const auto& L = layout[l];
    return {values.data() + L.offset, L.rows, L.cols};
  }
  Eigen::Map<const Vector> bias(std::size_t l) const {
    const auto& L = layout[l];
    return {values.data() + L.bias_offset(), L.rows};
  }
};

/// Deterministic given (spec, seed): weights U[-1/sqrt(fan_in), 1/sqrt(fan_in)], biases 0.
inline Weights init_weights(const NetworkSpec& spec, std::uint64_t seed) {
  auto layout = make_layout(spec);
  Vector values = Vector::Zero(layout.back().end());
  Rng gen(seed);
  for (const auto& layer : layout) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.cols));
    for (Eigen::Index k = 0; k < layer.weight_count(); ++k) values(layer.offset + k) = uniform(gen, -bound, bound);
  }
  return Weights(spec, std::move(values));
}

namespace detail {

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: return std::tanh(z);
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid: return sigmoid(z);
  }
  return z;
}

/// d activation / dz, written in terms of the pre-activation z and output a.
inline double activate_grad(Activation act, double z, double a) {
  switch (act) {
    case Activation::Tanh: return 1.0 - a * a;
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return a * (1.0 - a);
  }
  return 1.0;
}

}  // namespace detail

/// Intermediate values of a batched forward pass. inputs[l] is the input of
/// layer l (N x cols); pre[l] its affine output (N x rows).
struct ForwardCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;

  const Matrix& output() const { return pre.back(); }
};

inline ForwardCache forward_cached(const Weights& w, const Matrix& X) {
  require(X.cols() == w.spec.input_dim, ErrorKind::DimensionMismatch,
          "input has " + std::to_string(X.cols()) + " columns, network expects " + std::to_string(w.spec.input_dim));
  ForwardCache cache;
  cache.inputs.reserve(w.layout.size());
  cache.pre.reserve(w.layout.size());
  Matrix a = X;
  for (std::size_t l = 0; l < w.layout.size(); ++l) {
    Matrix z = a * w.weight(l).transpose();
    z.rowwise() += w.bias(l).transpose();
    cache.inputs.push_back(std::move(a));
    if (l + 1 < w.layout.size()) {
      a = z.unaryExpr([act = w.spec.activation](double v) { return detail::activate(act, v); });
    }
    cache.pre.push_back(std::move(z));
  }
  return cache;
}

/// Network outputs (N x C). The last layer is linear: these are latent values,
/// not probabilities.
inline Matrix forward(const Weights& w, const Matrix& X) { return forward_cached(w, X).output(); }

/// Gradient with respect to all parameters of sum_i sum_c G(i,c) f_c(x_i),
/// given the cache of the forward pass that produced f.
inline Vector backward(const Weights& w, const ForwardCache& cache, const Matrix& G) {
  require(G.rows() == cache.output().rows() && G.cols() == cache.output().cols(), ErrorKind::DimensionMismatch,
          "output gradient shape");
  Vector grad = Vector::Zero(w.num_params());
  Matrix delta = G;
  for (std::size_t l = w.layout.size(); l-- > 0;) {
    const auto& layer = w.layout[l];
    Eigen::Map<RowMatrix> gw(grad.data() + layer.offset, layer.rows, layer.cols);
    gw.noalias() = delta.transpose() * cache.inputs[l];
    grad.segment(layer.bias_offset(), layer.rows) = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix upstream = delta * w.weight(l);
    const Matrix& z = cache.pre[l - 1];
    const Matrix& a = cache.inputs[l];
    for (Eigen::Index i = 0; i < upstream.rows(); ++i) {
      for (Eigen::Index j = 0; j < upstream.cols(); ++j) {
        upstream(i, j) *= detail::activate_grad(w.spec.activation, z(i, j), a(i, j));
      }
    }
    delta = std::move(upstream);
  }
  return grad;
}

struct PointJacobian {
  RowMatrix J;  // C x P
  Vector f;     // network output at the point
};

/// Output and Jacobian of all C outputs at x with respect to all P parameters,
/// by reverse mode with one backward sweep per output. Runs the same
/// operations whatever the caller does with other points.
inline PointJacobian jacobian_and_output(const Weights& w, const Vector& x) {
  require(x.size() == w.spec.input_dim, ErrorKind::DimensionMismatch, "jacobian input width");
  const int C = w.spec.output_dim;
  const std::size_t L = w.layout.size();

  std::vector<Vector> inputs(L);
  std::vector<Vector> pre(L);
  Vector a = x;
  for (std::size_t l = 0; l < L; ++l) {
    Vector z = w.weight(l) * a + w.bias(l);
    inputs[l] = a;
    if (l + 1 < L) a = z.unaryExpr([act = w.spec.activation](double v) { return detail::activate(act, v); });
    pre[l] = std::move(z);
  }

  RowMatrix J = RowMatrix::Zero(C, w.num_params());
  // delta(c, r): d f_c / d pre[l](r)
  Matrix delta = Matrix::Identity(C, C);
  for (std::size_t l = L; l-- > 0;) {
    const auto& layer = w.layout[l];
    for (int c = 0; c < C; ++c) {
      for (int r = 0; r < layer.rows; ++r) {
        const double d = delta(c, r);
        double* row = J.row(c).data() + layer.offset + static_cast<Eigen::Index>(r) * layer.cols;
        for (int k = 0; k < layer.cols; ++k) row[k] = d * inputs[l](k);
        J(c, layer.bias_offset() + r) = d;
      }
    }
    if (l == 0) break;
    Matrix upstream = delta * w.weight(l);
    for (Eigen::Index j = 0; j < upstream.cols(); ++j) {
      const double g = detail::activate_grad(w.spec.activation, pre[l - 1](j), inputs[l](j));
      upstream.col(j) *= g;
    }
    delta = std::move(upstream);
  }
  return {std::move(J), std::move(pre.back())};
}

/// Jacobian of all C outputs at x with respect to all P parameters (C x P).
inline RowMatrix jacobian(const Weights& w, const Vector& x) { return jacobian_and_output(w, x).J; }

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 10;  // epochs without validation improvement before stopping
  double prior_precision = 1.0;
  std::uint64_t seed = 0;
};

/// Extra differentiable objective term. Returns its value and, when `grad` is
/// non-null, adds its gradient with respect to the weights into *grad.
using Penalty = std::function<double(const Weights&, Vector* grad)>;

/// Mean negative log-likelihood of `data` under the network.
inline double mean_nll(const Weights& w, const Dataset& data, const Likelihood& lik) {
  if (data.empty()) return 0.0;
  const Matrix F = forward(w, data.X);
  double total = 0.0;
  for (Eigen::Index i = 0; i < F.rows(); ++i) total -= log_density(lik, data.y(i), F.row(i).transpose());
  return total / static_cast<double>(F.rows());
}

/// Objective and gradient on a batch: mean NLL + delta/(2 n_total) ||w||^2 (+ penalty).
inline double batch_objective(const Weights& w, const Dataset& batch, const Likelihood& lik, double prior_precision,
                              Eigen::Index n_total, const Penalty& penalty, Vector* grad) {
  const ForwardCache cache = forward_cached(w, batch.X);
  const Matrix& F = cache.output();
  const double inv_b = 1.0 / static_cast<double>(F.rows());
  Matrix G(F.rows(), F.cols());
  double nll = 0.0;
  for (Eigen::Index i = 0; i < F.rows(); ++i) {
    const Vector f = F.row(i).transpose();
    nll -= log_density(lik, batch.y(i), f);
    G.row(i) = -inv_b * dual_alpha_beta(lik, batch.y(i), f).alpha.transpose();
  }
  const double decay = prior_precision / static_cast<double>(n_total);
  double value = nll * inv_b + 0.5 * decay * w.values.squaredNorm();
  if (grad) *grad = backward(w, cache, G) + decay * w.values;
  if (penalty) value += penalty(w, grad);
  return value;
}

/// Adam (beta1 0.9, beta2 0.999, eps 1e-8) on mean NLL + delta/(2N)||w||^2,
/// which has the same minimizer as sum NLL + (delta/2)||w||^2. Validation runs
/// once per epoch; the checkpoint with the lowest validation loss is returned.
/// `penalty`, when set, is added to both the training and validation objective.
inline Weights train(const Dataset& data, const Dataset& val, const Likelihood& lik, const TrainConfig& cfg,
                     Weights w, const Penalty& penalty = {}) {
  require(!data.empty() && !val.empty(), ErrorKind::InvalidArgument, "training and validation data must be nonempty");
  require(cfg.learning_rate > 0.0 && cfg.batch_size >= 1 && cfg.max_epochs >= 0 && cfg.patience >= 0 &&
              cfg.prior_precision > 0.0,
          ErrorKind::InvalidConfig, "invalid training configuration");
  require(data.dims() == w.spec.input_dim && val.dims() == w.spec.input_dim, ErrorKind::DimensionMismatch,
          "data width does not match the network");
  require(w.spec.output_dim == lik.num_outputs(), ErrorKind::DimensionMismatch,
          "network outputs do not match the likelihood");

  const auto n = static_cast<std::size_t>(data.size());
  const auto batch = std::min(n, static_cast<std::size_t>(cfg.batch_size));
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;
  require(static_cast<std::size_t>(cfg.patience) <= static_cast<std::size_t>(cfg.max_epochs) * steps_per_epoch ||
              cfg.max_epochs == 0,
          ErrorKind::InvalidConfig, "patience exceeds max_epochs * steps_per_epoch");

  const auto val_loss = [&](const Weights& weights) {
    double v = mean_nll(weights, val, lik);
    if (penalty) v += penalty(weights, nullptr);
    require(std::isfinite(v), ErrorKind::NonFiniteLoss, "validation loss is not finite");
    return v;
  };

  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  Vector m = Vector::Zero(w.num_params());
  Vector v = Vector::Zero(w.num_params());
  long step = 0;

  Weights best = w;
  double best_val = val_loss(w);
  int stale = 0;
  Rng gen(cfg.seed);
  Vector grad;

  for (int epoch = 0; epoch < cfg.max_epochs && stale < cfg.patience; ++epoch) {
    const auto order = permutation(n, gen);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const Dataset mb = subset(data, {order.begin() + static_cast<std::ptrdiff_t>(start),
                                       order.begin() + static_cast<std::ptrdiff_t>(stop)});
      const double loss = batch_objective(w, mb, lik, cfg.prior_precision, data.size(), penalty, &grad);
      require(std::isfinite(loss) && grad.allFinite(), ErrorKind::NonFiniteLoss,
              "training loss became non-finite at epoch " + std::to_string(epoch));
      ++step;
      m = beta1 * m + (1.0 - beta1) * grad;
      v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      w.values.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
    const double current = val_loss(w);
    if (current < best_val) {
      best_val = current;
      best = w;
      stale = 0;
    } else {
      ++stale;
    }
  }
  return best;
}

/// MAP weights from a seeded initialization.
inline Weights train_map(const Dataset& data, const NetworkSpec& spec, const Likelihood& lik, const TrainConfig& cfg,
                         const Dataset& val) {
  return train(data, val, lik, cfg, init_weights(spec, cfg.seed));
}

}  // namespace sfr

#endif  // SFR_NN_HPP
