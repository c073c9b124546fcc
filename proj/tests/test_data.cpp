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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <unistd.h>

#include "sfr/data.hpp"
#include "test_support.hpp"

namespace sfr {
namespace {

class CsvFile {
 public:
  explicit CsvFile(const std::string& text) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sfr_data_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".csv");
    std::ofstream(path_) << text;
  }
  ~CsvFile() { std::filesystem::remove(path_); }
  std::string path() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

TEST(LoadCsv, Regression) {
  const CsvFile f("x,y\n1,2\n3,4\n");
  const Dataset d = load_csv(f.path(), "y", TaskKind::Regression);
  EXPECT_EQ(d.X, (Matrix(2, 1) << 1, 3).finished());
  EXPECT_EQ(d.y, (Vector(2) << 2, 4).finished());
  EXPECT_EQ(d.feature_names, std::vector<std::string>{"x"});
}

TEST(LoadCsv, TargetColumnAnywhere) {
  const CsvFile f("label,a,b\n1.5,-2,3e1\n0,0.25,7\n");
  const Dataset d = load_csv(f.path(), "label", TaskKind::Regression);
  EXPECT_EQ(d.X, (Matrix(2, 2) << -2, 30, 0.25, 7).finished());
  EXPECT_EQ(d.y, (Vector(2) << 1.5, 0).finished());
}

TEST(LoadCsv, LabelsInFirstAppearanceOrder) {
  const CsvFile f("x,c\n1,b\n2,a\n3,b\n");
  const Dataset d = load_csv(f.path(), "c", TaskKind::Classification);
  EXPECT_EQ(d.y, (Vector(3) << 0, 1, 0).finished());
  EXPECT_EQ(d.class_names, (std::vector<std::string>{"b", "a"}));
  EXPECT_EQ(d.num_classes(), 2);
}

TEST(LoadCsv, MalformedCellReportsLocation) {
  const CsvFile f("x,y\n1,foo\n");
  try {
    load_csv(f.path(), "y", TaskKind::Regression);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 1u);
    EXPECT_EQ(e.col(), 1u);
  }
}

TEST(LoadCsv, WrongFieldCount) {
  const CsvFile f("x,y\n1,2\n3\n");
  EXPECT_EQ(kind_of([&] { load_csv(f.path(), "y", TaskKind::Regression); }), ErrorKind::ParseError);
}

TEST(LoadCsv, Errors) {
  const CsvFile empty("");
  EXPECT_EQ(kind_of([&] { load_csv(empty.path(), "y", TaskKind::Regression); }), ErrorKind::EmptyFile);
  const CsvFile no_target("a,b\n1,2\n");
  EXPECT_EQ(kind_of([&] { load_csv(no_target.path(), "y", TaskKind::Regression); }), ErrorKind::MissingColumn);
  EXPECT_EQ(kind_of([] { load_csv("/nonexistent/sfr/file.csv", "y", TaskKind::Regression); }),
            ErrorKind::MissingFile);
}

TEST(LoadCsv, HeaderOnlyGivesNoRows) {
  const CsvFile f("x,y\n");
  EXPECT_EQ(load_csv(f.path(), "y", TaskKind::Regression).size(), 0);
}

Dataset indexed(std::size_t n) {
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(n), 2);
  d.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    d.X(i, 0) = static_cast<double>(i);
    d.X(i, 1) = 2.0 * static_cast<double>(i) + 1.0;
    d.y(i) = static_cast<double>(i);
  }
  d.task = TaskKind::Classification;
  return d;
}

std::vector<double> sorted_targets(std::initializer_list<const Dataset*> parts) {
  std::vector<double> all;
  for (const Dataset* p : parts) all.insert(all.end(), p->y.data(), p->y.data() + p->size());
  std::sort(all.begin(), all.end());
  return all;
}

TEST(LoadCsv, EmptyTargetReadsEveryColumnAsFeature) {
  const CsvFile f("a,b\n1,2\n3,4\n");
  const Dataset d = load_csv(f.path(), "", TaskKind::Regression);
  EXPECT_EQ(d.X, (Matrix(2, 2) << 1, 2, 3, 4).finished());
  EXPECT_EQ(d.y, Vector::Zero(2));
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b"}));
}

TEST(WriteCsv, RoundTripsRegressionExactly) {
  const Dataset d = make_sine(17, 0.3, 5);
  const CsvFile f("");
  write_csv(f.path(), d, "target");
  const Dataset back = load_csv(f.path(), "target", TaskKind::Regression);
  EXPECT_EQ(back.X, d.X);
  EXPECT_EQ(back.y, d.y);
}

TEST(WriteCsv, RoundTripsClassNames) {
  const CsvFile src("x,label\n0.5,dog\n1.5,cat\n2.5,dog\n");
  const Dataset d = load_csv(src.path(), "label", TaskKind::Classification);
  const CsvFile f("");
  write_csv(f.path(), d, "label");
  const Dataset back = load_csv(f.path(), "label", TaskKind::Classification);
  EXPECT_EQ(back.class_names, d.class_names);
  EXPECT_EQ(back.y, d.y);
  EXPECT_EQ(back.X, d.X);
}

TEST(Split, PaperFractions) {
  const auto s = split(indexed(100), 0.7, 0.15, 0.15, 1);
  EXPECT_EQ(s.train.size(), 70);
  EXPECT_EQ(s.val.size(), 15);
  EXPECT_EQ(s.test.size(), 15);
}

TEST(Split, SmallRounding) {
  const auto s = split(indexed(10), 0.7, 0.15, 0.15, 1);
  EXPECT_EQ(s.train.size(), 7);
  EXPECT_EQ(s.val.size(), 1);
  EXPECT_EQ(s.test.size(), 2);
}

TEST(Split, PartitionsExactlyAndDeterministically) {
  const auto a = split(indexed(37), 0.6, 0.2, 0.2, 5);
  const auto b = split(indexed(37), 0.6, 0.2, 0.2, 5);
  EXPECT_EQ(a.train.X, b.train.X);
  EXPECT_EQ(a.test.y, b.test.y);
  std::vector<double> expected(37);
  std::iota(expected.begin(), expected.end(), 0.0);
  EXPECT_EQ(sorted_targets({&a.train, &a.val, &a.test}), expected);
}

TEST(Split, StandardizesWithTrainStatistics) {
  const auto s = split(indexed(50), 0.7, 0.15, 0.15, 2);
  ASSERT_TRUE(s.train.normalization.has_value());
  EXPECT_LE(s.train.X.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  const Matrix centered = s.train.X.rowwise() - s.train.X.colwise().mean();
  const Vector var = centered.colwise().squaredNorm().transpose() / static_cast<double>(s.train.size());
  EXPECT_LE((var.array() - 1.0).abs().maxCoeff(), 1e-12);
  const Dataset raw_test = denormalize(s.test);
  for (Eigen::Index i = 0; i < raw_test.size(); ++i)
    EXPECT_NEAR(raw_test.X(i, 0), raw_test.y(i), 1e-9);
}

TEST(Split, BadFractions) {
  EXPECT_EQ(kind_of([] { split(indexed(10), 0.7, 0.2, 0.2, 0); }), ErrorKind::BadFractions);
  EXPECT_EQ(kind_of([] { split(indexed(10), 1.2, -0.1, -0.1, 0); }), ErrorKind::BadFractions);
}

TEST(Normalization, RoundTrip) {
  Rng gen(3);
  Dataset raw;
  raw.X = 5.0 * testing::random_matrix(40, 3, gen);
  raw.X.col(1).array() += 100.0;
  raw.y = testing::random_matrix(40, 1, gen).col(0);
  const Dataset back = denormalize(normalize(raw, fit_normalization(raw)));
  EXPECT_LE((back.X - raw.X).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((back.y - raw.y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalization, ConstantFeatureKeepsUnitScale) {
  Dataset raw;
  raw.X = Matrix::Constant(4, 1, 7.0);
  raw.y = Vector::Zero(4);
  const auto stats = fit_normalization(raw);
  EXPECT_EQ(stats.x_std(0), 1.0);
  EXPECT_TRUE(normalize(raw, stats).X.isZero(0.0));
}

TEST(OrderedSplit, SortedOneDimensional) {
  Dataset d;
  d.X = Matrix(10, 1);
  d.y = Vector(10);
  for (int i = 0; i < 10; ++i) {
    d.X(9 - i, 0) = i + 1;
    d.y(9 - i) = i + 1;
  }
  const auto s = ordered_split_for_update(d, 0);
  EXPECT_EQ(s.d1.X.col(0), (Vector(5) << 1, 2, 3, 4, 5).finished());
  EXPECT_EQ(s.d2.X.col(0), (Vector(5) << 6, 7, 8, 9, 10).finished());
  EXPECT_EQ(s.train.size(), 3);
  EXPECT_EQ(s.val.size(), 2);
  EXPECT_EQ(s.update.size(), 3);
  EXPECT_EQ(s.test.size(), 2);
  EXPECT_LE(s.train.X.maxCoeff(), 5.0);
  EXPECT_GE(s.test.X.minCoeff(), 6.0);
}

TEST(OrderedSplit, PicksFeatureWithMostDistinctValues) {
  Matrix X(6, 2);
  X << 1, 3, 1, 1, 1, 2, 1, 6, 1, 5, 1, 4;
  EXPECT_EQ(most_unique_feature(X), 1);
  Matrix tie(3, 2);
  tie << 3, 30, 1, 10, 2, 20;
  EXPECT_EQ(most_unique_feature(tie), 0);
}

TEST(Generators, NoiselessSine) {
  const Dataset d = make_sine(200, 0.0, 4);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d.y(i), std::sin(3.0 * d.X(i, 0)));
    EXPECT_GE(d.X(i, 0), -3.0);
    EXPECT_LT(d.X(i, 0), 1.5);
  }
  const Dataset gap = make_sine_gap(50, 0.0, 4);
  EXPECT_GE(gap.X.minCoeff(), 1.5);
  EXPECT_LE(gap.X.maxCoeff(), 3.0);
}

TEST(Generators, BananaBalancedAndDeterministic) {
  for (std::size_t n : {100u, 101u}) {
    const Dataset d = make_banana(n, 6);
    const double ones = d.y.sum();
    EXPECT_LE(std::abs(ones - (static_cast<double>(n) - ones)), 1.0);
    EXPECT_EQ(d.X, make_banana(n, 6).X);
  }
}

TEST(Generators, SplitTasksByClassPairs) {
  const Dataset base = make_blobs(40, 4, 3.0, 0.5, 7);
  const auto tasks = make_split_tasks(base, 2);
  ASSERT_EQ(tasks.size(), 2u);
  for (Eigen::Index i = 0; i < tasks[0].size(); ++i) EXPECT_LT(tasks[0].y(i), 2.0);
  for (Eigen::Index i = 0; i < tasks[1].size(); ++i) EXPECT_GE(tasks[1].y(i), 2.0);
  EXPECT_EQ(tasks[0].size() + tasks[1].size(), base.size());
}

}  // namespace
}  // namespace sfr
