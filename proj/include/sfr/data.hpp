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
/// Datasets: CSV ingestion, seeded splits, standardization and the synthetic
/// generators used by tests and the CLI.

#ifndef SFR_DATA_HPP
#define SFR_DATA_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sfr/error.hpp"
#include "sfr/linalg.hpp"
#include "sfr/random.hpp"

namespace sfr {

enum class TaskKind { Regression, Classification };

/// Standardization statistics taken from a training split.
struct Normalization {
  Vector x_mean;
  Vector x_std;
  bool has_target = false;  // regression targets standardized too
  double y_mean = 0.0;
  double y_std = 1.0;
};

struct Dataset {
  Matrix X;
  Vector y;  // real targets, or class indices stored as doubles
  TaskKind task = TaskKind::Regression;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::optional<Normalization> normalization;  // stats already applied to X (and y)

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dims() const { return X.cols(); }
  bool empty() const { return X.rows() == 0; }

  int num_classes() const {
    if (task != TaskKind::Classification || y.size() == 0) return static_cast<int>(class_names.size());
    return std::max(static_cast<int>(class_names.size()), static_cast<int>(y.maxCoeff()) + 1);
  }
};

/// Rows `indices` of `data`, in that order. Metadata is carried over.
inline Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.task = data.task;
  out.feature_names = data.feature_names;
  out.class_names = data.class_names;
  out.normalization = data.normalization;
  out.X.resize(static_cast<Eigen::Index>(indices.size()), data.dims());
  out.y.resize(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(indices[i]);
    require(src < data.size(), ErrorKind::InvalidArgument, "subset index out of range");
    out.X.row(static_cast<Eigen::Index>(i)) = data.X.row(src);
    out.y(static_cast<Eigen::Index>(i)) = data.y(src);
  }
  return out;
}

/// Rows of `a` followed by rows of `b`.
inline Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  require(a.dims() == b.dims(), ErrorKind::DimensionMismatch, "concat of datasets with different widths");
  Dataset out = a;
  out.X.resize(a.size() + b.size(), a.dims());
  out.X << a.X, b.X;
  out.y.resize(a.size() + b.size());
  out.y << a.y, b.y;
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

inline Normalization fit_normalization(const Dataset& train) {
  require(train.size() >= 1, ErrorKind::InvalidArgument, "normalization needs at least one row");
  Normalization stats;
  const double n = static_cast<double>(train.size());
  stats.x_mean = train.X.colwise().mean().transpose();
  stats.x_std.resize(train.dims());
  for (Eigen::Index j = 0; j < train.dims(); ++j) {
    const double var = (train.X.col(j).array() - stats.x_mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    stats.x_std(j) = sd > 0.0 ? sd : 1.0;
  }
  if (train.task == TaskKind::Regression) {
    stats.has_target = true;
    stats.y_mean = train.y.mean();
    const double sd = std::sqrt((train.y.array() - stats.y_mean).square().sum() / n);
    stats.y_std = sd > 0.0 ? sd : 1.0;
  }
  return stats;
}

inline Matrix normalize_inputs(const Matrix& X, const Normalization& stats) {
  require(X.cols() == stats.x_mean.size(), ErrorKind::DimensionMismatch, "normalization width");
  return ((X.rowwise() - stats.x_mean.transpose()).array().rowwise() / stats.x_std.transpose().array()).matrix();
}

inline Matrix denormalize_inputs(const Matrix& X, const Normalization& stats) {
  require(X.cols() == stats.x_mean.size(), ErrorKind::DimensionMismatch, "normalization width");
  return ((X.array().rowwise() * stats.x_std.transpose().array()).matrix().rowwise() + stats.x_mean.transpose());
}

/// Applies `stats` to raw data. Data that is already normalized is rejected.
inline Dataset normalize(const Dataset& raw, const Normalization& stats) {
  require(!raw.normalization, ErrorKind::InvalidArgument, "dataset is already normalized");
  Dataset out = raw;
  out.X = normalize_inputs(raw.X, stats);
  if (stats.has_target && raw.task == TaskKind::Regression) {
    out.y = ((raw.y.array() - stats.y_mean) / stats.y_std).matrix();
  }
  out.normalization = stats;
  return out;
}

inline Dataset denormalize(const Dataset& data) {
  if (!data.normalization) return data;
  const Normalization& stats = *data.normalization;
  Dataset out = data;
  out.X = denormalize_inputs(data.X, stats);
  if (stats.has_target && data.task == TaskKind::Regression) {
    out.y = (data.y.array() * stats.y_std + stats.y_mean).matrix();
  }
  out.normalization.reset();
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace detail

/// Reads a comma-separated file with a header row. Every column other than
/// `target_column` is a numeric feature. Classification labels are mapped to
/// contiguous indices in order of first appearance. A header-only file gives
/// an empty dataset. An empty `target_column` reads features only, with zero targets.
inline Dataset load_csv(const std::string& path, const std::string& target_column, TaskKind task) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::MissingFile, "cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || detail::trim(line).empty()) {
    throw Error(ErrorKind::EmptyFile, "'" + path + "' has no header row");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = detail::split_fields(line);
  std::optional<std::size_t> target_idx;
  Dataset data;
  data.task = task;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name(detail::trim(header[j]));
    if (name == target_column) {
      target_idx = j;
    } else {
      data.feature_names.push_back(name);
    }
  }
  require(target_idx.has_value() || target_column.empty(), ErrorKind::MissingColumn,
          "column '" + target_column + "' not in " + path);

  std::vector<double> features;
  std::vector<double> targets;
  std::unordered_map<std::string, int> label_index;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError(row, std::min(fields.size(), header.size()),
                       "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    if (!target_idx) targets.push_back(0.0);
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (j == target_idx && task == TaskKind::Classification) {
        const std::string label(detail::trim(fields[j]));
        if (label.empty()) throw ParseError(row, j, "empty label");
        auto [it, inserted] = label_index.try_emplace(label, static_cast<int>(data.class_names.size()));
        if (inserted) data.class_names.push_back(label);
        targets.push_back(static_cast<double>(it->second));
        continue;
      }
      const auto value = detail::parse_double(fields[j]);
      if (!value) throw ParseError(row, j, "not a number: '" + std::string(fields[j]) + "'");
      if (j == target_idx) {
        targets.push_back(*value);
      } else {
        features.push_back(*value);
      }
    }
  }

  const auto n = static_cast<Eigen::Index>(targets.size());
  const auto d = static_cast<Eigen::Index>(data.feature_names.size());
  data.X = Eigen::Map<const RowMatrix>(features.data(), n, d);
  data.y = Eigen::Map<const Vector>(targets.data(), n);
  return data;
}

/// Writes features then the target column, values with 17 significant digits.
/// Classification targets are written as their class names when known.
inline void write_csv(const std::string& path, const Dataset& data, const std::string& target_column) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::MissingFile, "cannot write '" + path + "'");
  for (Eigen::Index j = 0; j < data.dims(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    out << (uj < data.feature_names.size() ? data.feature_names[uj] : "x" + std::to_string(j)) << ',';
  }
  out << target_column << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dims(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.X(i, j));
      out << buf << ',';
    }
    const auto label = static_cast<std::size_t>(data.y(i));
    if (data.task == TaskKind::Classification && label < data.class_names.size()) {
      out << data.class_names[label];
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", data.y(i));
      out << buf;
    }
    out << '\n';
  }
  require(out.good(), ErrorKind::MissingFile, "failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Splits

struct Split {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Seeded shuffle, then contiguous train/val/test partition of sizes
/// floor(N f_train), floor(N f_val) and the remainder. The parts are raw.
inline Split split_raw(const Dataset& data, double f_train, double f_val, double f_test, std::uint64_t seed) {
  require(f_train >= 0.0 && f_val >= 0.0 && f_test >= 0.0 && std::abs(f_train + f_val + f_test - 1.0) <= 1e-9,
          ErrorKind::BadFractions, "split fractions must be non-negative and sum to 1");
  const auto n = static_cast<std::size_t>(data.size());
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f_train + 1e-9));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::floor(static_cast<double>(n) * f_val + 1e-9)));

  Rng gen(seed);
  const auto order = permutation(n, gen);
  const auto at = [&order](std::size_t k) { return order.begin() + static_cast<std::ptrdiff_t>(k); };
  return Split{subset(data, {at(0), at(n_train)}), subset(data, {at(n_train), at(n_train + n_val)}),
               subset(data, {at(n_train + n_val), order.end()})};
}

/// split_raw, then inputs (and regression targets) of all three parts
/// standardized with the train statistics.
inline Split split(const Dataset& data, double f_train, double f_val, double f_test, std::uint64_t seed) {
  require(!data.normalization, ErrorKind::InvalidArgument, "split expects raw data");
  Split out = split_raw(data, f_train, f_val, f_test, seed);
  if (out.train.size() > 0) {
    const Normalization stats = fit_normalization(out.train);
    out.train = normalize(out.train, stats);
    out.val = normalize(out.val, stats);
    out.test = normalize(out.test, stats);
  }
  return out;
}

/// Index of the feature with the most distinct values (ties: lowest index).
inline Eigen::Index most_unique_feature(const Matrix& X) {
  Eigen::Index best = 0;
  std::size_t best_count = 0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const std::set<double> values(X.col(j).data(), X.col(j).data() + X.rows());
    if (values.size() > best_count) {
      best_count = values.size();
      best = j;
    }
  }
  return best;
}

struct UpdateSplit {
  Dataset d1;      // lower half along the ordering feature
  Dataset d2;      // upper half, the out-of-distribution region
  Dataset train;   // 70% of d1
  Dataset val;     // 30% of d1
  Dataset update;  // 70% of d2
  Dataset test;    // 30% of d2
};

/// Orders rows along the feature with the most distinct values and cuts the
/// sorted data in half; each half is then split 70/30 by a seeded shuffle.
/// Outputs are raw (not normalized).
inline UpdateSplit ordered_split_for_update(const Dataset& data, std::uint64_t seed) {
  require(data.dims() >= 1, ErrorKind::InvalidArgument, "ordered split needs at least one feature");
  const Eigen::Index feature = most_unique_feature(data.X);
  std::vector<std::size_t> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.X(static_cast<Eigen::Index>(a), feature) < data.X(static_cast<Eigen::Index>(b), feature);
  });
  const std::size_t half = order.size() / 2;
  UpdateSplit out;
  out.d1 = subset(data, {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half)});
  out.d2 = subset(data, {order.begin() + static_cast<std::ptrdiff_t>(half), order.end()});

  Rng gen(seed);
  const auto cut = [&gen](const Dataset& part, Dataset& first, Dataset& second) {
    const auto n = static_cast<std::size_t>(part.size());
    const auto n_first = static_cast<std::size_t>(std::floor(0.7 * static_cast<double>(n) + 1e-9));
    const auto perm = permutation(n, gen);
    first = subset(part, {perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_first)});
    second = subset(part, {perm.begin() + static_cast<std::ptrdiff_t>(n_first), perm.end()});
  };
  cut(out.d1, out.train, out.val);
  cut(out.d2, out.update, out.test);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// y = sin(3x) + noise on x ~ U[-3, 1.5); the interval [1.5, 3] is left for make_sine_gap.
inline Dataset make_sine(std::size_t n, double noise_std, std::uint64_t seed) {
  require(n >= 2, ErrorKind::InvalidArgument, "make_sine needs N >= 2");
  Rng gen(seed);
  Dataset data;
  data.task = TaskKind::Regression;
  data.feature_names = {"x"};
  data.X.resize(static_cast<Eigen::Index>(n), 1);
  data.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double x = uniform(gen, -3.0, 1.5);
    data.X(i, 0) = x;
    data.y(i) = std::sin(3.0 * x) + noise_std * standard_normal(gen);
  }
  return data;
}

/// Same function sampled on the held-out region x ~ U[1.5, 3].
inline Dataset make_sine_gap(std::size_t n, double noise_std, std::uint64_t seed) {
  Rng gen(seed ^ 0x9E3779B97F4A7C15ULL);
  Dataset data;
  data.task = TaskKind::Regression;
  data.feature_names = {"x"};
  data.X.resize(static_cast<Eigen::Index>(n), 1);
  data.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double x = uniform(gen, 1.5, 3.0);
    data.X(i, 0) = x;
    data.y(i) = std::sin(3.0 * x) + noise_std * standard_normal(gen);
  }
  return data;
}

/// Two interleaved crescents in 2D ("two moons"), classes balanced within one,
/// rows in shuffled order.
inline Dataset make_banana(std::size_t n, std::uint64_t seed, double noise_std = 0.1) {
  require(n >= 2, ErrorKind::InvalidArgument, "make_banana needs N >= 2");
  Rng gen(seed);
  Dataset data;
  data.task = TaskKind::Classification;
  data.feature_names = {"x1", "x2"};
  data.class_names = {"0", "1"};
  data.X.resize(static_cast<Eigen::Index>(n), 2);
  data.y.resize(static_cast<Eigen::Index>(n));
  const auto order = permutation(n, gen);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(order[k]);
    const int label = static_cast<int>(k % 2);
    const double t = uniform(gen, 0.0, std::numbers::pi);
    double x1 = 0.0;
    double x2 = 0.0;
    if (label == 0) {
      x1 = std::cos(t);
      x2 = std::sin(t);
    } else {
      x1 = 1.0 - std::cos(t);
      x2 = 0.5 - std::sin(t);
    }
    data.X(i, 0) = x1 + noise_std * standard_normal(gen);
    data.X(i, 1) = x2 + noise_std * standard_normal(gen);
    data.y(i) = label;
  }
  return data;
}

/// Isotropic Gaussian blobs in 2D with centers evenly spaced on a circle of
/// `radius`; class c has center angle 2 pi c / num_classes.
inline Dataset make_blobs(std::size_t n, int num_classes, double radius, double spread, std::uint64_t seed) {
  require(n >= 2 && num_classes >= 2, ErrorKind::InvalidArgument, "make_blobs needs N >= 2 and 2+ classes");
  Rng gen(seed);
  Dataset data;
  data.task = TaskKind::Classification;
  data.feature_names = {"x1", "x2"};
  for (int c = 0; c < num_classes; ++c) data.class_names.push_back(std::to_string(c));
  data.X.resize(static_cast<Eigen::Index>(n), 2);
  data.y.resize(static_cast<Eigen::Index>(n));
  const auto order = permutation(n, gen);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(order[k]);
    const int label = static_cast<int>(k % static_cast<std::size_t>(num_classes));
    const double angle = 2.0 * std::numbers::pi * label / num_classes;
    data.X(i, 0) = radius * std::cos(angle) + spread * standard_normal(gen);
    data.X(i, 1) = radius * std::sin(angle) + spread * standard_normal(gen);
    data.y(i) = label;
  }
  return data;
}

/// Partitions a labeled dataset into tasks of consecutive class groups:
/// {0..k-1}, {k..2k-1}, ... Labels keep their global indices (single head).
inline std::vector<Dataset> make_split_tasks(const Dataset& base, int classes_per_task) {
  require(base.task == TaskKind::Classification, ErrorKind::InvalidArgument, "split tasks need class labels");
  require(classes_per_task >= 1, ErrorKind::InvalidArgument, "classes_per_task must be >= 1");
  const int num_classes = base.num_classes();
  const int num_tasks = (num_classes + classes_per_task - 1) / classes_per_task;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_tasks));
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    const int task = static_cast<int>(base.y(i)) / classes_per_task;
    members[static_cast<std::size_t>(task)].push_back(static_cast<std::size_t>(i));
  }
  std::vector<Dataset> tasks;
  tasks.reserve(members.size());
  for (const auto& idx : members) tasks.push_back(subset(base, idx));
  return tasks;
}

}  // namespace sfr

#endif  // SFR_DATA_HPP
