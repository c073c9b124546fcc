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
/// Likelihoods with their inverse links and the Laplace dual derivatives
/// alpha = d/df log p(y|f) and beta = -d²/df² log p(y|f).

#ifndef SFR_LIKELIHOOD_HPP
#define SFR_LIKELIHOOD_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <variant>

#include "sfr/error.hpp"
#include "sfr/linalg.hpp"
#include "sfr/random.hpp"

namespace sfr {

struct Gaussian {
  double noise_variance = 1.0;
};
struct Bernoulli {};
struct Categorical {
  int num_classes = 2;
};

class Likelihood {
 public:
  using Variant = std::variant<Gaussian, Bernoulli, Categorical>;

  Likelihood() : variant_(Gaussian{}) {}
  Likelihood(Gaussian g) : variant_(g) {  // NOLINT(google-explicit-constructor)
    require(std::isfinite(g.noise_variance) && g.noise_variance > 0.0, ErrorKind::InvalidArgument,
            "Gaussian noise variance must be finite and positive");
  }
  Likelihood(Bernoulli b) : variant_(b) {}  // NOLINT(google-explicit-constructor)
  Likelihood(Categorical c) : variant_(c) {  // NOLINT(google-explicit-constructor)
    require(c.num_classes >= 2, ErrorKind::InvalidArgument, "categorical needs at least 2 classes");
  }

  const Variant& variant() const { return variant_; }

  bool is_gaussian() const { return std::holds_alternative<Gaussian>(variant_); }
  bool is_classification() const { return !is_gaussian(); }

  /// Number of latent outputs the network must produce.
  int num_outputs() const {
    if (auto c = std::get_if<Categorical>(&variant_)) return c->num_classes;
    return 1;
  }

  /// Width of a probability row (2 for Bernoulli, C for categorical, 0 for regression).
  int num_classes() const {
    if (auto c = std::get_if<Categorical>(&variant_)) return c->num_classes;
    if (is_gaussian()) return 0;
    return 2;
  }

  double noise_variance() const {
    if (auto g = std::get_if<Gaussian>(&variant_)) return g->noise_variance;
    return 0.0;
  }

  std::string name() const {
    if (is_gaussian()) return "gaussian";
    if (std::holds_alternative<Bernoulli>(variant_)) return "bernoulli";
    return "categorical";
  }

 private:
  Variant variant_;
};

/// Per-output dual derivatives at one data point.
struct DualPair {
  Vector alpha;
  Vector beta;
};

/// Mean and variance of a Gaussian predictive density.
struct GaussianDensity {
  double mean = 0.0;
  double variance = 0.0;
};

namespace detail {

inline double sigmoid(double f) {
  if (f >= 0.0) return 1.0 / (1.0 + std::exp(-f));
  const double e = std::exp(f);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline Vector softmax(const Vector& f) {
  const double m = f.maxCoeff();
  const Vector e = f.unaryExpr([m](double v) { return std::exp(v - m); });
  return e / e.sum();
}

inline double log_sum_exp(const Vector& f) {
  const double m = f.maxCoeff();
  return m + std::log(f.unaryExpr([m](double v) { return std::exp(v - m); }).sum());
}

inline void check_width(const Likelihood& lik, const Vector& f) {
  require(f.size() == lik.num_outputs(), ErrorKind::DimensionMismatch,
          "latent vector of size " + std::to_string(f.size()) + " for " + lik.name() + " likelihood with " +
              std::to_string(lik.num_outputs()) + " outputs");
}

inline int class_index(const Likelihood& lik, double y) {
  const int c = static_cast<int>(y);
  require(std::isfinite(y) && static_cast<double>(c) == y && c >= 0 && c < lik.num_outputs(),
          ErrorKind::InvalidTarget, "class target " + std::to_string(y));
  return c;
}

inline double binary_target(double y) {
  require(y == 0.0 || y == 1.0, ErrorKind::InvalidTarget, "Bernoulli target " + std::to_string(y));
  return y;
}

}  // namespace detail

/// Checks y lies in the likelihood's target domain.
inline void validate_target(const Likelihood& lik, double y) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          require(std::isfinite(y), ErrorKind::InvalidTarget, "non-finite regression target");
        } else if constexpr (std::is_same_v<T, Bernoulli>) {
          detail::binary_target(y);
        } else {
          detail::class_index(lik, y);
        }
      },
      lik.variant());
}

/// log p(y | f) including normalizing constants.
inline double log_density(const Likelihood& lik, double y, const Vector& f) {
  detail::check_width(lik, f);
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          require(std::isfinite(y), ErrorKind::InvalidTarget, "non-finite regression target");
          const double r = y - f(0);
          return -0.5 * std::log(2.0 * std::numbers::pi * v.noise_variance) - 0.5 * r * r / v.noise_variance;
        } else if constexpr (std::is_same_v<T, Bernoulli>) {
          const double t = detail::binary_target(y);
          // log sigmoid(f) = -softplus(-f), log(1 - sigmoid(f)) = -softplus(f)
          return t == 1.0 ? -detail::softplus(-f(0)) : -detail::softplus(f(0));
        } else {
          const int c = detail::class_index(lik, y);
          return f(c) - detail::log_sum_exp(f);
        }
      },
      lik.variant());
}

/// Laplace dual derivatives at f. beta is clamped below at 0.
inline DualPair dual_alpha_beta(const Likelihood& lik, double y, const Vector& f) {
  detail::check_width(lik, f);
  DualPair out{Vector(f.size()), Vector(f.size())};
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          require(std::isfinite(y), ErrorKind::InvalidTarget, "non-finite regression target");
          out.alpha(0) = (y - f(0)) / v.noise_variance;
          out.beta(0) = 1.0 / v.noise_variance;
        } else if constexpr (std::is_same_v<T, Bernoulli>) {
          const double t = detail::binary_target(y);
          const double p = detail::sigmoid(f(0));
          out.alpha(0) = t - p;
          out.beta(0) = p * (1.0 - p);
        } else {
          const int c = detail::class_index(lik, y);
          const Vector p = detail::softmax(f);
          out.alpha = -p;
          out.alpha(c) += 1.0;
          out.beta = (p.array() * (1.0 - p.array())).matrix();
        }
      },
      lik.variant());
  out.beta = out.beta.cwiseMax(0.0);
  return out;
}

/// Inverse link: the Gaussian mean f, [1 - sigmoid(f), sigmoid(f)] for Bernoulli,
/// softmax(f) for categorical.
inline Vector inverse_link(const Likelihood& lik, const Vector& f) {
  detail::check_width(lik, f);
  if (lik.is_gaussian()) return f;
  if (std::holds_alternative<Bernoulli>(lik.variant())) {
    const double p = detail::sigmoid(f(0));
    Vector out(2);
    out << 1.0 - p, p;
    return out;
  }
  return detail::softmax(f);
}

using ExpectedOutput = std::variant<GaussianDensity, Vector>;

/// E over f ~ N(mean, diag(var)) of the inverse link. Gaussian returns the
/// predictive density N(mean, var + noise) in closed form; classification uses
/// `samples` Monte Carlo draws from `gen`, or the inverse link directly when all
/// variances are zero.
inline ExpectedOutput expected_prob(const Likelihood& lik, const Vector& f_mean, const Vector& f_var,
                                    int samples, Rng& gen) {
  detail::check_width(lik, f_mean);
  require(f_var.size() == f_mean.size(), ErrorKind::DimensionMismatch, "variance width");
  require((f_var.array() >= 0.0).all(), ErrorKind::InvalidArgument, "negative latent variance");
  if (auto g = std::get_if<Gaussian>(&lik.variant())) {
    return GaussianDensity{f_mean(0), f_var(0) + g->noise_variance};
  }
  if ((f_var.array() == 0.0).all() || samples <= 0) return inverse_link(lik, f_mean);

  const Vector sd = f_var.cwiseSqrt();
  Vector acc = Vector::Zero(lik.num_classes());
  Vector f(f_mean.size());
  for (int s = 0; s < samples; ++s) {
    for (Eigen::Index c = 0; c < f.size(); ++c) f(c) = f_mean(c) + sd(c) * standard_normal(gen);
    acc += inverse_link(lik, f);
  }
  return Vector(acc / static_cast<double>(samples));
}

}  // namespace sfr

#endif  // SFR_LIKELIHOOD_HPP
