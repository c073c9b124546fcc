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

#ifndef SFR_METRICS_HPP
#define SFR_METRICS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "sfr/error.hpp"
#include "sfr/linalg.hpp"

namespace sfr {

inline constexpr int kDefaultEceBins = 15;

struct EvalReport {
  double nlpd = 0.0;
  std::optional<double> accuracy;
  std::optional<double> ece;
  int ece_bins = kDefaultEceBins;
  std::optional<double> auroc;
  std::size_t floored_probabilities = 0;
  double wall_seconds = 0.0;  // not reproducible
};

/// Mean Gaussian negative log predictive density.
inline double nlpd_gaussian(const Vector& mean, const Vector& var, const Vector& y) {
  require(mean.size() == y.size() && var.size() == y.size() && y.size() > 0, ErrorKind::DimensionMismatch,
          "nlpd input sizes");
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    require(var(i) > 0.0, ErrorKind::InvalidArgument, "predictive variance must be positive");
    const double r = y(i) - mean(i);
    total += 0.5 * std::log(2.0 * std::numbers::pi * var(i)) + 0.5 * r * r / var(i);
  }
  return total / static_cast<double>(y.size());
}

/// Mean -log p(true class). Probabilities below 1e-300 are floored; the number
/// of floored rows is added to *floored when given.
inline double nlpd_classification(const Matrix& probs, const Vector& labels, std::size_t* floored = nullptr) {
  require(probs.rows() == labels.size() && labels.size() > 0, ErrorKind::DimensionMismatch, "nlpd input sizes");
  constexpr double floor = 1e-300;
  double total = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(labels(i));
    require(c >= 0 && c < probs.cols(), ErrorKind::InvalidTarget, "label outside probability row");
    double p = probs(i, c);
    if (p < floor) {
      p = floor;
      if (floored) ++*floored;
    }
    total -= std::log(p);
  }
  return total / static_cast<double>(labels.size());
}

inline Eigen::Index argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  row.maxCoeff(&best);
  return best;
}

inline double accuracy(const Matrix& probs, const Vector& labels) {
  require(probs.rows() == labels.size() && labels.size() > 0, ErrorKind::DimensionMismatch, "accuracy input sizes");
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (argmax(probs.row(i)) == static_cast<Eigen::Index>(labels(i))) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

/// Top-label expected calibration error with equal-width bins on [0, 1]:
/// sum over bins of (|bin| / N) |accuracy(bin) - mean confidence(bin)|.
inline double ece(const Matrix& probs, const Vector& labels, int bins = kDefaultEceBins) {
  require(probs.rows() == labels.size() && labels.size() > 0 && bins >= 1, ErrorKind::DimensionMismatch,
          "ece input sizes");
  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> hits(static_cast<std::size_t>(bins), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    Eigen::Index pred = 0;
    const double conf = probs.row(i).maxCoeff(&pred);
    auto b = static_cast<std::size_t>(std::clamp(static_cast<int>(std::ceil(conf * bins)) - 1, 0, bins - 1));
    conf_sum[b] += conf;
    hits[b] += pred == static_cast<Eigen::Index>(labels(i)) ? 1.0 : 0.0;
    ++count[b];
  }
  double total = 0.0;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] == 0) continue;
    const double n_b = static_cast<double>(count[b]);
    total += n_b * std::abs(hits[b] / n_b - conf_sum[b] / n_b);
  }
  return total / static_cast<double>(labels.size());
}

/// Shannon entropy (natural log) of each probability row; probabilities are
/// floored at 1e-12 inside the log.
inline Vector entropy(const Matrix& probs) {
  Vector h(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const double p = probs(i, c);
      s -= p * std::log(std::max(p, 1e-12));
    }
    h(i) = s;
  }
  return h;
}

/// Probability that a random positive scores above a random negative, ties
/// counted as one half (Mann-Whitney U with mid-ranks).
inline double auroc(const Vector& negatives, const Vector& positives) {
  require(negatives.size() > 0 && positives.size() > 0, ErrorKind::InvalidArgument, "auroc needs both classes");
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> all;
  all.reserve(static_cast<std::size_t>(negatives.size() + positives.size()));
  for (double s : negatives) all.push_back({s, false});
  for (double s : positives) all.push_back({s, true});
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score < b.score; });

  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].positive) positive_rank_sum += mid_rank;
    }
    i = j;
  }
  const double n_pos = static_cast<double>(positives.size());
  const double n_neg = static_cast<double>(negatives.size());
  return (positive_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

/// AUROC of separating OOD from ID rows by predictive entropy.
inline double auroc_entropy(const Matrix& probs_id, const Matrix& probs_ood) {
  return auroc(entropy(probs_id), entropy(probs_ood));
}

/// Monotonic wall-clock stopwatch.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace sfr

#endif  // SFR_METRICS_HPP
