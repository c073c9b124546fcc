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

// End-to-end runs of the command-line tool in a scratch directory.

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfr/data.hpp"
#include "sfr/io.hpp"

#ifndef SFR_CLI_PATH
#error "SFR_CLI_PATH must name the command-line binary"
#endif

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("sfr_cli_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

  Outcome run(const std::string& args) const {
    const std::string cmd = "cd '" + dir_.string() + "' && '" SFR_CLI_PATH "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir_ / "stdout.txt");
    r.err = slurp(dir_ / "stderr.txt");
    return r;
  }

  /// Runs a command that must succeed and returns its report.
  Json ok(const std::string& args) const {
    const Outcome r = run(args);
    EXPECT_EQ(r.code, 0) << args << "\n" << r.err;
    return r.code == 0 ? Json::parse(r.out) : Json{};
  }

  void write_regression_config(const std::string& name, const std::string& inducing) const {
    write(name, R"({"network": {"hidden_widths": [16], "activation": "tanh"},
  "likelihood": {"type": "gaussian", "noise_variance": 0.1},
  "train": {"learning_rate": 0.01, "batch_size": 32, "max_epochs": 60, "patience": 10,
            "prior_precision": 1.0, "seed": 3},
  "sfr": {"num_inducing": )" + inducing + "}}");
  }

  fs::path dir_;
};

std::vector<std::vector<double>> read_table(const std::string& file) {
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

Json without_timing(Json j) {
  j.erase("nondeterministic");
  return j;
}

TEST_F(Cli, TrainWritesCheckpointAndFiniteReport) {
  ok("gen --dataset sine --n 80 --seed 1 --out sine.csv");
  write_regression_config("cfg.json", "20");
  const Json report = ok("train --config cfg.json --data sine.csv --out ckpt.json");
  EXPECT_TRUE(fs::exists(path("ckpt.json")));
  EXPECT_TRUE(std::isfinite(report.at("nlpd").get<double>()));
  EXPECT_EQ(report.at("command"), "train");
}

TEST_F(Cli, PipelineIsByteReproducible) {
  ok("gen --dataset sine --n 80 --seed 1 --out sine.csv");
  write_regression_config("cfg.json", "20");
  std::vector<Json> reports;
  for (const std::string tag : {"a", "b"}) {
    Json all;
    all["train"] = without_timing(ok("train --config cfg.json --data sine.csv --out ckpt_" + tag + ".json"));
    all["fit"] = without_timing(ok("fit --config cfg.json --checkpoint ckpt_" + tag +
                                   ".json --data sine.csv --out post_" + tag + ".json"));
    all["predict"] = without_timing(
        ok("predict --config cfg.json --posterior post_" + tag + ".json --data sine.csv --out pred_" + tag + ".csv"));
    all["eval"] = without_timing(ok("eval --config cfg.json --posterior post_" + tag + ".json --data sine.csv"));
    reports.push_back(all);
  }
  EXPECT_EQ(slurp(path("ckpt_a.json")), slurp(path("ckpt_b.json")));
  EXPECT_EQ(slurp(path("pred_a.csv")), slurp(path("pred_b.csv")));
  for (Json* r : {&reports[0], &reports[1]}) {
    (*r)["fit"].erase("posterior");
    (*r)["predict"].erase("predictions");
    (*r)["train"].erase("checkpoint");
  }
  EXPECT_EQ(reports[0].dump(), reports[1].dump());
  // The posteriors differ only in the checkpoint they reference.
  Json pa = Json::parse(slurp(path("post_a.json")));
  Json pb = Json::parse(slurp(path("post_b.json")));
  pa.erase("weights_ref");
  pb.erase("weights_ref");
  EXPECT_EQ(pa.dump(), pb.dump());
}

TEST_F(Cli, SeedFlagOverridesConfig) {
  ok("gen --dataset sine --n 60 --seed 1 --out sine.csv");
  write_regression_config("cfg.json", "20");
  ok("train --config cfg.json --data sine.csv --out a.json --seed 5");
  ok("train --config cfg.json --data sine.csv --out b.json --seed 5");
  ok("train --config cfg.json --data sine.csv --out c.json --seed 6");
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_NE(slurp(path("a.json")), slurp(path("c.json")));
}

TEST_F(Cli, FullInducingSetMatchesOracle) {
  ok("gen --dataset sine --n 60 --seed 2 --out sine.csv");
  write("cfg.json", R"({"network": {"hidden_widths": [16], "activation": "tanh"},
  "likelihood": {"type": "gaussian", "noise_variance": 0.3},
  "train": {"learning_rate": 0.01, "batch_size": 1000, "max_epochs": 400, "patience": 400,
            "prior_precision": 10.0, "seed": 3},
  "sfr": {"num_inducing": "all"}})");
  ok("train --config cfg.json --data sine.csv --out ckpt.json");
  ok("fit --config cfg.json --checkpoint ckpt.json --data sine.csv --out post.json");
  ok("gen --dataset sine_gap --n 25 --seed 9 --out test.csv");
  ok("predict --config cfg.json --posterior post.json --data test.csv --out sparse.csv");
  ok("oracle-gp --config cfg.json --checkpoint ckpt.json --data sine.csv --test test.csv --out dense.csv");
  const auto sparse = read_table(path("sparse.csv"));
  const auto dense = read_table(path("dense.csv"));
  ASSERT_EQ(sparse.size(), 25u);
  ASSERT_EQ(sparse.size(), dense.size());
  for (std::size_t i = 0; i < sparse.size(); ++i) {
    ASSERT_EQ(sparse[i].size(), dense[i].size());
    for (std::size_t j = 0; j < sparse[i].size(); ++j) EXPECT_NEAR(sparse[i][j], dense[i][j], 1e-6) << i << "," << j;
  }
}

TEST_F(Cli, PredictWithoutTargetColumn) {
  ok("gen --dataset sine --n 60 --seed 2 --out sine.csv");
  write_regression_config("cfg.json", "15");
  ok("train --config cfg.json --data sine.csv --out ckpt.json");
  ok("fit --config cfg.json --checkpoint ckpt.json --data sine.csv --out post.json");
  write("inputs.csv", "x\n-1.5\n0\n0.5\n");
  ok("predict --config cfg.json --posterior post.json --data inputs.csv --out pred.csv");
  const auto rows = read_table(path("pred.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].size(), 3u);
  EXPECT_DOUBLE_EQ(rows[1][0], 0.0);
  for (const auto& row : rows) EXPECT_GT(row[2], 0.0);
}

TEST_F(Cli, EmptyUpdateCopiesPosterior) {
  ok("gen --dataset sine --n 60 --seed 2 --out sine.csv");
  write_regression_config("cfg.json", "15");
  ok("train --config cfg.json --data sine.csv --out ckpt.json");
  ok("fit --config cfg.json --checkpoint ckpt.json --data sine.csv --out post.json");
  write("empty.csv", "x,y\n");
  ok("update --config cfg.json --posterior post.json --data empty.csv --out same.json");
  EXPECT_EQ(slurp(path("post.json")), slurp(path("same.json")));
}

TEST_F(Cli, UpdateChangesDualsAndReportsTiming) {
  ok("gen --dataset sine --n 60 --seed 2 --out sine.csv");
  ok("gen --dataset sine_gap --n 20 --seed 4 --out new.csv");
  write_regression_config("cfg.json", "15");
  ok("train --config cfg.json --data sine.csv --out ckpt.json");
  ok("fit --config cfg.json --checkpoint ckpt.json --data sine.csv --out post.json");
  const Json report = ok("update --config cfg.json --posterior post.json --data new.csv --out new_post.json "
                         "--retrain --base-data sine.csv");
  EXPECT_NE(slurp(path("post.json")), slurp(path("new_post.json")));
  EXPECT_GE(report.at("nondeterministic").at("retrain_seconds").get<double>(), 0.0);
  EXPECT_EQ(report.at("num_new"), 20);
}

TEST_F(Cli, SingleTaskContinualRunMatchesTrain) {
  ok("gen --dataset blobs --n 200 --classes 4 --noise 0.8 --seed 3 --out blobs.csv");
  write("cfg.json", R"({"network": {"hidden_widths": [16]},
  "likelihood": {"type": "categorical", "num_classes": 4},
  "train": {"learning_rate": 0.01, "batch_size": 32, "max_epochs": 30, "patience": 5,
            "prior_precision": 1.0, "seed": 2},
  "cl": {"tau": 1.0, "points_per_task": 10, "classes_per_task": 4}})");
  const Json train = ok("train --config cfg.json --data blobs.csv --out ckpt.json");
  const Json cl = ok("cl --config cfg.json --data blobs.csv");
  EXPECT_EQ(cl.at("num_tasks"), 1);
  EXPECT_DOUBLE_EQ(cl.at("accuracy").at("task_1_eval_on_task_1").get<double>(), train.at("accuracy").get<double>());
}

TEST_F(Cli, ContinualReportHasEveryTaskPair) {
  ok("gen --dataset blobs --n 200 --classes 4 --noise 0.6 --seed 3 --out blobs.csv");
  write("cfg.json", R"({"network": {"hidden_widths": [16]},
  "likelihood": {"type": "categorical", "num_classes": 4},
  "train": {"learning_rate": 0.01, "batch_size": 32, "max_epochs": 20, "patience": 5, "seed": 2},
  "cl": {"tau": 1.0, "points_per_task": 10, "classes_per_task": 2}})");
  const Json cl = ok("cl --config cfg.json --data blobs.csv --out cl.json --buffer buffer.json");
  EXPECT_TRUE(fs::exists(path("cl.json")));
  const auto buffer = sfr::io::memory_buffer_from_json(Json::parse(slurp(path("buffer.json"))));
  EXPECT_EQ(buffer.tasks.size(), 2u);
  EXPECT_EQ(buffer.observed_classes, (std::set<int>{0, 1, 2, 3}));
  for (const char* key : {"task_1_eval_on_task_1", "task_1_eval_on_task_2", "task_2_eval_on_task_1",
                          "task_2_eval_on_task_2"}) {
    EXPECT_TRUE(cl.at("accuracy").contains(key)) << key;
  }
  EXPECT_EQ(cl.at("accuracy_matrix").size(), 2u);
}

TEST_F(Cli, ClassificationEvalWithOutOfDistributionSet) {
  ok("gen --dataset banana --n 120 --seed 5 --out banana.csv");
  write("far.csv", "x1,x2\n30,30\n-30,25\n25,-30\n");
  write("cfg.json", R"({"network": {"hidden_widths": [16]}, "likelihood": {"type": "bernoulli"},
  "train": {"learning_rate": 0.01, "max_epochs": 40, "patience": 10, "seed": 1},
  "sfr": {"num_inducing": 30}})");
  ok("train --config cfg.json --data banana.csv --out ckpt.json");
  ok("fit --config cfg.json --checkpoint ckpt.json --data banana.csv --out post.json");
  const Json r = ok("eval --config cfg.json --posterior post.json --data banana.csv --ood far.csv");
  for (const char* key : {"nlpd", "accuracy", "ece", "auroc"}) EXPECT_TRUE(r.contains(key)) << key;
  const Json nn = ok("eval --config cfg.json --checkpoint ckpt.json --data banana.csv");
  EXPECT_EQ(nn.at("model"), "nn_map");
  const Json subset = ok("fit --config cfg.json --checkpoint ckpt.json --data banana.csv --out sub.json "
                         "--baseline subset --mode nn_mean");
  EXPECT_EQ(subset.at("baseline"), "gp_subset");
  EXPECT_EQ(subset.at("mean_mode"), "nn_mean");
}

TEST_F(Cli, MissingFileExitsWithTwo) {
  const Outcome r = run("train --data nowhere.csv --out ckpt.json");
  EXPECT_EQ(r.code, 2);
  const Json err = Json::parse(r.err);
  EXPECT_EQ(err.at("error").at("kind"), "MissingFile");
}

TEST_F(Cli, UnknownConfigKeyExitsWithTwo) {
  ok("gen --dataset sine --n 30 --seed 1 --out sine.csv");
  write("cfg.json", R"({"train": {"learning_rate": 0.01, "momentum": 0.9}})");
  const Outcome r = run("train --config cfg.json --data sine.csv --out ckpt.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(Json::parse(r.err).at("error").at("kind"), "InvalidConfig");
}

TEST_F(Cli, MalformedJsonExitsWithTwo) {
  ok("gen --dataset sine --n 30 --seed 1 --out sine.csv");
  write("cfg.json", "{\"train\": ");
  const Outcome r = run("train --config cfg.json --data sine.csv --out ckpt.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(Json::parse(r.err).at("error").contains("message"));
}

TEST_F(Cli, DivergentTrainingExitsWithThree) {
  ok("gen --dataset sine --n 30 --seed 1 --out sine.csv");
  write("cfg.json", R"({"network": {"hidden_widths": [4]},
  "train": {"learning_rate": 1e200, "max_epochs": 5, "patience": 5}})");
  const Outcome r = run("train --config cfg.json --data sine.csv --out ckpt.json");
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_EQ(Json::parse(r.err).at("error").at("kind"), "NonFiniteLoss");
}

TEST_F(Cli, UnseenLabelIsRejected) {
  write("train.csv", "x,y\n0,a\n1,b\n2,a\n3,b\n4,a\n5,b\n6,a\n7,b\n8,a\n9,b\n");
  write("other.csv", "x,y\n0,a\n1,c\n");
  write("cfg.json", R"({"network": {"hidden_widths": [4]}, "likelihood": {"type": "bernoulli"},
  "train": {"max_epochs": 3, "patience": 3}, "split": {"train": 1.0, "val": 0.0, "test": 0.0}})");
  ok("train --config cfg.json --data train.csv --out ckpt.json");
  const Outcome r = run("eval --config cfg.json --checkpoint ckpt.json --data other.csv");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(Json::parse(r.err).at("error").at("kind"), "InvalidTarget");
}

TEST_F(Cli, BadModeAndBaselineAreRejected) {
  ok("gen --dataset sine --n 30 --seed 1 --out sine.csv");
  write_regression_config("cfg.json", "5");
  ok("train --config cfg.json --data sine.csv --out ckpt.json");
  EXPECT_EQ(run("fit --config cfg.json --checkpoint ckpt.json --data sine.csv --out p.json --mode mean").code, 2);
  EXPECT_EQ(run("fit --config cfg.json --checkpoint ckpt.json --data sine.csv --out p.json --baseline all").code, 2);
}

TEST_F(Cli, HelpExitsWithZero) {
  const Outcome r = run("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("oracle-gp"), std::string::npos);
  EXPECT_EQ(run("").code, 2);
}

}  // namespace
