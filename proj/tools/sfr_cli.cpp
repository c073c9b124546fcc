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

// Command-line front end: train, fit, predict, update, cl, eval, oracle-gp.
// Reports go to stdout as JSON; failures print {"error": {...}} on stderr and
// exit with 2 (configuration or I/O) or 3 (numerical).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfr.hpp"

namespace {

using sfr::io::Json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run configuration

struct SplitConfig {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
  std::uint64_t seed = 0;
};

struct SfrConfig {
  std::optional<Eigen::Index> num_inducing;  // all training points when unset
  Eigen::Index batch = 256;
  sfr::MeanMode mean_mode = sfr::MeanMode::ZeroMean;
  int mc_samples = 64;
  std::uint64_t seed = 0;
};

struct ContinualConfig {
  double tau = 1.0;
  Eigen::Index points_per_task = 20;
  int classes_per_task = 2;
  sfr::ClMode mode = sfr::ClMode::Sfr;
};

struct RunConfig {
  std::vector<int> hidden_widths{50};
  sfr::Activation activation = sfr::Activation::Tanh;
  sfr::Likelihood likelihood = sfr::Gaussian{1.0};
  std::string target_column = "y";
  sfr::TrainConfig train;
  SplitConfig split;
  SfrConfig sfr;
  ContinualConfig cl;

  sfr::TaskKind task() const {
    return likelihood.is_classification() ? sfr::TaskKind::Classification : sfr::TaskKind::Regression;
  }
};

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  sfr::require(j.is_object(), sfr::ErrorKind::InvalidConfig, where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    sfr::require(known, sfr::ErrorKind::InvalidConfig, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig parse_config(const Json& j) {
  using sfr::ErrorKind;
  RunConfig cfg;
  check_keys(j, {"network", "likelihood", "target_column", "train", "split", "sfr", "cl"}, "config");
  if (j.contains("network")) {
    const Json& n = j["network"];
    check_keys(n, {"hidden_widths", "activation"}, "network");
    read_if(n, "hidden_widths", cfg.hidden_widths);
    if (n.contains("activation")) cfg.activation = sfr::activation_from_string(n["activation"].get<std::string>());
  }
  if (j.contains("likelihood")) cfg.likelihood = sfr::io::likelihood_from_json(j["likelihood"]);
  read_if(j, "target_column", cfg.target_column);
  if (j.contains("train")) {
    const Json& t = j["train"];
    check_keys(t, {"learning_rate", "batch_size", "max_epochs", "patience", "prior_precision", "seed"}, "train");
    read_if(t, "learning_rate", cfg.train.learning_rate);
    read_if(t, "batch_size", cfg.train.batch_size);
    read_if(t, "max_epochs", cfg.train.max_epochs);
    read_if(t, "patience", cfg.train.patience);
    read_if(t, "prior_precision", cfg.train.prior_precision);
    read_if(t, "seed", cfg.train.seed);
  }
  if (j.contains("split")) {
    const Json& s = j["split"];
    check_keys(s, {"train", "val", "test", "seed"}, "split");
    read_if(s, "train", cfg.split.train);
    read_if(s, "val", cfg.split.val);
    read_if(s, "test", cfg.split.test);
    read_if(s, "seed", cfg.split.seed);
  }
  if (j.contains("sfr")) {
    const Json& s = j["sfr"];
    check_keys(s, {"num_inducing", "batch", "mean_mode", "mc_samples", "seed"}, "sfr");
    if (s.contains("num_inducing") && !(s["num_inducing"].is_string() && s["num_inducing"] == "all")) {
      cfg.sfr.num_inducing = s["num_inducing"].get<Eigen::Index>();
    }
    read_if(s, "batch", cfg.sfr.batch);
    if (s.contains("mean_mode")) cfg.sfr.mean_mode = sfr::mean_mode_from_string(s["mean_mode"].get<std::string>());
    read_if(s, "mc_samples", cfg.sfr.mc_samples);
    read_if(s, "seed", cfg.sfr.seed);
  }
  if (j.contains("cl")) {
    const Json& c = j["cl"];
    check_keys(c, {"tau", "points_per_task", "classes_per_task", "mode"}, "cl");
    read_if(c, "tau", cfg.cl.tau);
    read_if(c, "points_per_task", cfg.cl.points_per_task);
    read_if(c, "classes_per_task", cfg.cl.classes_per_task);
    if (c.contains("mode")) {
      const auto mode = c["mode"].get<std::string>();
      sfr::require(mode == "sfr" || mode == "l2", ErrorKind::InvalidConfig, "cl.mode must be 'sfr' or 'l2'");
      cfg.cl.mode = mode == "sfr" ? sfr::ClMode::Sfr : sfr::ClMode::L2;
    }
  }

  const auto& t = cfg.train;
  sfr::require(t.learning_rate > 0.0 && t.batch_size >= 1 && t.max_epochs >= 0 && t.patience >= 0,
               ErrorKind::InvalidConfig, "train settings out of range");
  sfr::require(t.prior_precision > 0.0, ErrorKind::InvalidConfig, "train.prior_precision must be positive");
  sfr::require(!cfg.sfr.num_inducing || *cfg.sfr.num_inducing >= 1, ErrorKind::InvalidConfig,
               "sfr.num_inducing must be >= 1");
  sfr::require(cfg.sfr.batch >= 1 && cfg.sfr.mc_samples >= 1, ErrorKind::InvalidConfig,
               "sfr.batch and sfr.mc_samples must be >= 1");
  sfr::require(cfg.cl.tau >= 0.0 && cfg.cl.points_per_task >= 1 && cfg.cl.classes_per_task >= 1,
               ErrorKind::InvalidConfig, "cl settings out of range");
  for (int width : cfg.hidden_widths) {
    sfr::require(width >= 1, ErrorKind::InvalidConfig, "hidden widths must be >= 1");
  }
  return cfg;
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  RunConfig cfg = path.empty() ? RunConfig{} : parse_config(sfr::io::read_json_file(path));
  if (seed) {
    cfg.train.seed = *seed;
    cfg.split.seed = *seed;
    cfg.sfr.seed = *seed;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Data and models

struct Model {
  sfr::io::Checkpoint checkpoint;
  sfr::Likelihood likelihood;
  double prior_precision = 1.0;
};

Model load_model(const std::string& path, const RunConfig& cfg) {
  Model m{sfr::io::load_checkpoint(path), cfg.likelihood, cfg.train.prior_precision};
  if (m.checkpoint.likelihood) m.likelihood = *m.checkpoint.likelihood;
  if (m.checkpoint.prior_precision) m.prior_precision = *m.checkpoint.prior_precision;
  return m;
}

sfr::TaskKind task_of(const sfr::Likelihood& lik) {
  return lik.is_classification() ? sfr::TaskKind::Classification : sfr::TaskKind::Regression;
}

/// Reindexes labels of `data` to the model's class names.
void align_labels(sfr::Dataset& data, const std::vector<std::string>& model_classes) {
  if (data.task != sfr::TaskKind::Classification || model_classes.empty()) return;
  std::vector<double> to_model(data.class_names.size());
  for (std::size_t k = 0; k < data.class_names.size(); ++k) {
    const auto it = std::find(model_classes.begin(), model_classes.end(), data.class_names[k]);
    sfr::require(it != model_classes.end(), sfr::ErrorKind::InvalidTarget,
                 "label '" + data.class_names[k] + "' was not seen in training");
    to_model[k] = static_cast<double>(it - model_classes.begin());
  }
  for (Eigen::Index i = 0; i < data.size(); ++i) data.y(i) = to_model[static_cast<std::size_t>(data.y(i))];
  data.class_names = model_classes;
}

/// CSV rows prepared for a trained model: labels aligned, checkpoint statistics applied.
/// Targets are optional when `targets_optional`.
sfr::Dataset load_for_model(const std::string& path, const RunConfig& cfg, const Model& model,
                            bool targets_optional = false) {
  const sfr::TaskKind task = task_of(model.likelihood);
  sfr::Dataset data;
  bool has_targets = true;
  try {
    data = sfr::load_csv(path, cfg.target_column, task);
  } catch (const sfr::Error& e) {
    if (!targets_optional || e.kind() != sfr::ErrorKind::MissingColumn) throw;
    data = sfr::load_csv(path, "", task);
    has_targets = false;
  }
  sfr::require(data.dims() == model.checkpoint.weights.spec.input_dim, sfr::ErrorKind::DimensionMismatch,
               "'" + path + "' has " + std::to_string(data.dims()) + " features, the model expects " +
                   std::to_string(model.checkpoint.weights.spec.input_dim));
  if (has_targets) {
    align_labels(data, model.checkpoint.class_names);
  } else {
    data.class_names = model.checkpoint.class_names;
  }
  if (model.checkpoint.normalization) data = sfr::normalize(data, *model.checkpoint.normalization);
  return data;
}

/// Training part of the seeded split, prepared for `model`.
sfr::Dataset training_part(const std::string& path, const RunConfig& cfg, const Model& model) {
  sfr::Dataset raw = sfr::load_csv(path, cfg.target_column, task_of(model.likelihood));
  align_labels(raw, model.checkpoint.class_names);
  sfr::Dataset train = sfr::split_raw(raw, cfg.split.train, cfg.split.val, cfg.split.test, cfg.split.seed).train;
  if (model.checkpoint.normalization) train = sfr::normalize(train, *model.checkpoint.normalization);
  return train;
}

fs::path resolve_weights(const std::string& ref, const std::string& posterior_path) {
  const fs::path p(ref);
  if (p.is_absolute() || fs::exists(p)) return p;
  const fs::path beside = fs::path(posterior_path).parent_path() / p;
  return fs::exists(beside) ? beside : p;
}

struct LoadedPosterior {
  Model model;
  sfr::SfrPosterior posterior;
  std::string weights_ref;
};

LoadedPosterior load_posterior(const std::string& path, const std::string& checkpoint_override,
                               const RunConfig& cfg) {
  const auto doc = sfr::io::posterior_document_from_json(sfr::io::read_json_file(path));
  const std::string ref =
      checkpoint_override.empty() ? resolve_weights(doc.weights_ref, path).string() : checkpoint_override;
  Model model = load_model(ref, cfg);
  model.likelihood = doc.likelihood;
  model.prior_precision = doc.delta;
  auto post = sfr::io::posterior_from_document(doc, model.checkpoint.weights);
  return {std::move(model), std::move(post), doc.weights_ref};
}

// ---------------------------------------------------------------------------
// Outputs

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Predictions in original units. Regression rows carry the predictive mean
/// and variance; classification rows the latent moments and class probabilities.
void write_predictions(const std::string& path, const sfr::Dataset& data, const sfr::LatentPredictive& latent,
                       const sfr::Predictive& pred) {
  const sfr::Dataset raw = sfr::denormalize(data);
  const auto* stats = data.normalization ? &*data.normalization : nullptr;
  const double y_scale = stats && stats->has_target ? stats->y_std : 1.0;
  const double y_shift = stats && stats->has_target ? stats->y_mean : 0.0;

  std::ostringstream out;
  for (Eigen::Index j = 0; j < raw.dims(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    out << (uj < raw.feature_names.size() ? raw.feature_names[uj] : "x" + std::to_string(j)) << ',';
  }
  const Eigen::Index C = latent.mean.cols();
  for (Eigen::Index c = 0; c < C; ++c) out << "mean_" << c << ',';
  for (Eigen::Index c = 0; c < C; ++c) out << "var_" << c << (c + 1 < C || !pred.gaussian ? "," : "");
  if (!pred.gaussian) {
    for (Eigen::Index k = 0; k < pred.probs.cols(); ++k) out << "prob_" << k << (k + 1 < pred.probs.cols() ? "," : "");
  }
  out << '\n';
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    for (Eigen::Index j = 0; j < raw.dims(); ++j) out << format_number(raw.X(i, j)) << ',';
    if (pred.gaussian) {
      out << format_number(pred.mean(i, 0) * y_scale + y_shift) << ','
          << format_number(pred.var(i, 0) * y_scale * y_scale);
    } else {
      for (Eigen::Index c = 0; c < C; ++c) out << format_number(latent.mean(i, c)) << ',';
      for (Eigen::Index c = 0; c < C; ++c) out << format_number(latent.var(i, c)) << ',';
      for (Eigen::Index k = 0; k < pred.probs.cols(); ++k) {
        out << format_number(pred.probs(i, k)) << (k + 1 < pred.probs.cols() ? "," : "");
      }
    }
    out << '\n';
  }
  sfr::io::write_text_file(path, out.str());
}

/// Predictive of the network alone: zero latent variance.
sfr::LatentPredictive network_latent(const sfr::Weights& w, const sfr::Matrix& X) {
  sfr::LatentPredictive latent;
  latent.mean = sfr::forward(w, X);
  latent.var = sfr::Matrix::Zero(latent.mean.rows(), latent.mean.cols());
  latent.min_raw_variance = 0.0;
  return latent;
}

sfr::EvalReport evaluate(const sfr::Predictive& pred, const sfr::Dataset& data) {
  sfr::require(data.size() > 0, sfr::ErrorKind::InvalidArgument, "evaluation needs at least one row");
  sfr::EvalReport r;
  if (pred.gaussian) {
    const auto* stats = data.normalization ? &*data.normalization : nullptr;
    const double scale = stats && stats->has_target ? stats->y_std : 1.0;
    const double shift = stats && stats->has_target ? stats->y_mean : 0.0;
    const sfr::Vector mean = (pred.mean.col(0).array() * scale + shift).matrix();
    const sfr::Vector var = (pred.var.col(0).array() * scale * scale).matrix();
    const sfr::Vector y = (data.y.array() * scale + shift).matrix();
    r.nlpd = sfr::nlpd_gaussian(mean, var, y);
  } else {
    r.nlpd = sfr::nlpd_classification(pred.probs, data.y, &r.floored_probabilities);
    r.accuracy = sfr::accuracy(pred.probs, data.y);
    r.ece = sfr::ece(pred.probs, data.y);
  }
  return r;
}

void emit(const Json& report, const std::string& path) {
  if (!path.empty()) sfr::io::write_json_file(path, report);
  std::cout << report.dump(1) << '\n';
}

Json report_header(const char* command) {
  Json j;
  j["command"] = command;
  j["version"] = sfr::io::kFormatVersion;
  return j;
}

void merge(Json& into, const Json& from) {
  for (const auto& [key, value] : from.items()) into[key] = value;
}

// ---------------------------------------------------------------------------
// Commands

struct Args {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool retrain = false;
  std::string mode;
  std::string baseline;
  std::string checkpoint;
  std::string posterior;
  std::string test;
  std::string base_data;
  std::string buffer;
  std::string ood;
  std::string report;
  std::string dataset = "sine";
  std::size_t n = 200;
  double noise = 0.1;
  int classes = 4;
};

sfr::MeanMode mean_mode(const Args& a, sfr::MeanMode fallback) {
  return a.mode.empty() ? fallback : sfr::mean_mode_from_string(a.mode);
}

void require_arg(const std::string& value, const char* flag) {
  sfr::require(!value.empty(), sfr::ErrorKind::InvalidArgument, std::string("missing required flag ") + flag);
}

sfr::Weights fit_network(const sfr::Dataset& train, const sfr::Dataset& val, const RunConfig& cfg) {
  const sfr::NetworkSpec spec{static_cast<int>(train.dims()), cfg.likelihood.num_outputs(), cfg.hidden_widths,
                              cfg.activation};
  spec.validate();
  return sfr::train_map(train, spec, cfg.likelihood, cfg.train, val.empty() ? train : val);
}

int cmd_train(const Args& a) {
  require_arg(a.data, "--data");
  require_arg(a.out, "--out");
  const RunConfig cfg = load_config(a.config, a.seed);
  const sfr::Dataset raw = sfr::load_csv(a.data, cfg.target_column, cfg.task());
  sfr::require(raw.size() >= 2, sfr::ErrorKind::InvalidArgument, "training needs at least two rows");
  const sfr::Split parts = sfr::split(raw, cfg.split.train, cfg.split.val, cfg.split.test, cfg.split.seed);
  sfr::require(parts.train.size() >= 1, sfr::ErrorKind::BadFractions, "the training split is empty");

  const sfr::Stopwatch clock;
  const sfr::Weights w = fit_network(parts.train, parts.val, cfg);
  const double seconds = clock.seconds();
  sfr::io::save_checkpoint(a.out, {w, cfg.likelihood, parts.train.normalization, raw.class_names,
                                   cfg.train.prior_precision});

  const sfr::Dataset& scored = parts.test.empty() ? parts.train : parts.test;
  const auto pred = sfr::predictive_from_latent(cfg.likelihood, network_latent(w, scored.X), 0, 0);
  sfr::EvalReport r = evaluate(pred, scored);
  r.wall_seconds = seconds;
  Json report = report_header("train");
  report["model"] = "nn_map";
  report["checkpoint"] = a.out;
  report["num_train"] = parts.train.size();
  report["num_val"] = parts.val.size();
  report["num_test"] = parts.test.size();
  report["evaluated_on"] = parts.test.empty() ? "train" : "test";
  merge(report, sfr::io::to_json(r));
  emit(report, a.report);
  return 0;
}

sfr::InducingSet choose_inducing(const sfr::Dataset& train, const RunConfig& cfg) {
  const Eigen::Index m = cfg.sfr.num_inducing.value_or(train.size());
  return sfr::sample_inducing(train.X, m, cfg.sfr.seed);
}

int cmd_fit(const Args& a) {
  require_arg(a.checkpoint, "--checkpoint");
  require_arg(a.data, "--data");
  require_arg(a.out, "--out");
  sfr::require(a.baseline.empty() || a.baseline == "subset", sfr::ErrorKind::InvalidArgument,
               "--baseline accepts only 'subset'");
  const RunConfig cfg = load_config(a.config, a.seed);
  const Model model = load_model(a.checkpoint, cfg);
  const sfr::Dataset train = training_part(a.data, cfg, model);
  const sfr::InducingSet Z = choose_inducing(train, cfg);
  const sfr::MeanMode mode = mean_mode(a, cfg.sfr.mean_mode);

  const sfr::Stopwatch clock;
  const auto& w = model.checkpoint.weights;
  const sfr::SfrPosterior post =
      a.baseline == "subset"
          ? sfr::gp_subset_fit(train, w, model.likelihood, model.prior_precision, Z, mode)
          : sfr::fit(train, w, model.likelihood, model.prior_precision, Z, cfg.sfr.batch, mode);
  const double seconds = clock.seconds();
  sfr::io::write_json_file(a.out, sfr::io::posterior_to_json(post, a.checkpoint));

  Json report = report_header("fit");
  report["posterior"] = a.out;
  report["baseline"] = a.baseline.empty() ? "sfr" : "gp_subset";
  report["mean_mode"] = sfr::to_string(mode);
  report["num_train"] = train.size();
  report["num_inducing"] = Z.size();
  report["nondeterministic"] = {{"wall_seconds", seconds}};
  emit(report, a.report);
  return 0;
}

int cmd_predict(const Args& a) {
  require_arg(a.posterior, "--posterior");
  require_arg(a.data, "--data");
  require_arg(a.out, "--out");
  const RunConfig cfg = load_config(a.config, a.seed);
  LoadedPosterior lp = load_posterior(a.posterior, a.checkpoint, cfg);
  lp.posterior.mean_mode = mean_mode(a, lp.posterior.mean_mode);
  const sfr::Dataset data = load_for_model(a.data, cfg, lp.model, true);
  const auto latent = sfr::predict_f(lp.posterior, data.X);
  const auto pred = sfr::predictive_from_latent(lp.model.likelihood, latent, cfg.sfr.mc_samples, cfg.sfr.seed);
  write_predictions(a.out, data, latent, pred);

  Json report = report_header("predict");
  report["predictions"] = a.out;
  report["num_points"] = data.size();
  report["mean_mode"] = sfr::to_string(lp.posterior.mean_mode);
  report["min_raw_variance"] = data.size() > 0 ? latent.min_raw_variance : 0.0;
  emit(report, a.report);
  return 0;
}

int cmd_update(const Args& a) {
  require_arg(a.posterior, "--posterior");
  require_arg(a.data, "--data");
  require_arg(a.out, "--out");
  const RunConfig cfg = load_config(a.config, a.seed);
  const LoadedPosterior lp = load_posterior(a.posterior, a.checkpoint, cfg);
  const sfr::Dataset fresh = load_for_model(a.data, cfg, lp.model);

  const sfr::Stopwatch clock;
  if (fresh.empty()) {
    std::ifstream in(a.posterior, std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    sfr::io::write_text_file(a.out, bytes.str());
  } else {
    const sfr::SfrPosterior updated = sfr::dual_update(lp.posterior, fresh, cfg.sfr.batch);
    sfr::io::write_json_file(a.out, sfr::io::posterior_to_json(updated, lp.weights_ref));
  }
  const double update_seconds = clock.seconds();

  Json timing = {{"update_seconds", update_seconds}};
  if (a.retrain) {
    require_arg(a.base_data, "--base-data");
    sfr::require(lp.model.checkpoint.normalization.has_value(), sfr::ErrorKind::InvalidArgument,
                 "--retrain needs a checkpoint with normalization statistics");
    RunConfig retrain_cfg = cfg;
    retrain_cfg.likelihood = lp.model.likelihood;
    retrain_cfg.train.prior_precision = lp.model.prior_precision;
    const sfr::Stopwatch retrain_clock;
    sfr::Dataset raw = sfr::load_csv(a.base_data, cfg.target_column, task_of(lp.model.likelihood));
    align_labels(raw, lp.model.checkpoint.class_names);
    const sfr::Split parts = sfr::split_raw(raw, cfg.split.train, cfg.split.val, cfg.split.test, cfg.split.seed);
    const auto& stats = *lp.model.checkpoint.normalization;
    const sfr::Dataset all = sfr::concat(sfr::normalize(parts.train, stats), fresh);
    const sfr::Dataset val = parts.val.empty() ? sfr::Dataset{} : sfr::normalize(parts.val, stats);
    const sfr::Weights w = fit_network(all, val, retrain_cfg);
    const sfr::InducingSet Z = sfr::sample_inducing(all.X, lp.posterior.inducing.size(), cfg.sfr.seed);
    const auto refit = sfr::fit(all, w, lp.model.likelihood, lp.model.prior_precision, Z, cfg.sfr.batch);
    (void)refit;
    const double retrain_seconds = retrain_clock.seconds();
    timing["retrain_seconds"] = retrain_seconds;
    timing["update_to_retrain_ratio"] = retrain_seconds > 0.0 ? update_seconds / retrain_seconds : 0.0;
  }

  Json report = report_header("update");
  report["posterior"] = a.out;
  report["num_new"] = fresh.size();
  report["nondeterministic"] = timing;
  emit(report, a.report);
  return 0;
}

int cmd_eval(const Args& a) {
  require_arg(a.data, "--data");
  sfr::require(!a.posterior.empty() || !a.checkpoint.empty(), sfr::ErrorKind::InvalidArgument,
               "eval needs --posterior or --checkpoint");
  const RunConfig cfg = load_config(a.config, a.seed);

  const sfr::Stopwatch clock;
  Json report = report_header("eval");
  sfr::Predictive pred;
  sfr::Dataset data;
  std::optional<sfr::Predictive> ood_pred;
  if (!a.posterior.empty()) {
    LoadedPosterior lp = load_posterior(a.posterior, a.checkpoint, cfg);
    lp.posterior.mean_mode = mean_mode(a, lp.posterior.mean_mode);
    data = load_for_model(a.data, cfg, lp.model);
    pred = sfr::predict_y(lp.posterior, data.X, cfg.sfr.mc_samples, cfg.sfr.seed);
    if (!a.ood.empty()) {
      const sfr::Dataset ood = load_for_model(a.ood, cfg, lp.model, true);
      ood_pred = sfr::predict_y(lp.posterior, ood.X, cfg.sfr.mc_samples, cfg.sfr.seed);
    }
    report["model"] = "sfr";
    report["mean_mode"] = sfr::to_string(lp.posterior.mean_mode);
  } else {
    const Model model = load_model(a.checkpoint, cfg);
    data = load_for_model(a.data, cfg, model);
    const auto& w = model.checkpoint.weights;
    pred = sfr::predictive_from_latent(model.likelihood, network_latent(w, data.X), 0, 0);
    if (!a.ood.empty()) {
      const sfr::Dataset ood = load_for_model(a.ood, cfg, model, true);
      ood_pred = sfr::predictive_from_latent(model.likelihood, network_latent(w, ood.X), 0, 0);
    }
    report["model"] = "nn_map";
  }
  sfr::EvalReport r = evaluate(pred, data);
  if (ood_pred) {
    sfr::require(!pred.gaussian, sfr::ErrorKind::InvalidArgument, "--ood needs a classification model");
    r.auroc = sfr::auroc_entropy(pred.probs, ood_pred->probs);
  }
  r.wall_seconds = clock.seconds();
  report["num_points"] = data.size();
  merge(report, sfr::io::to_json(r));
  emit(report, a.out.empty() ? a.report : a.out);
  return 0;
}

int cmd_oracle_gp(const Args& a) {
  require_arg(a.checkpoint, "--checkpoint");
  require_arg(a.data, "--data");
  require_arg(a.out, "--out");
  const RunConfig cfg = load_config(a.config, a.seed);
  const Model model = load_model(a.checkpoint, cfg);
  const sfr::MeanMode mode = mean_mode(a, cfg.sfr.mean_mode);
  sfr::Dataset train;
  sfr::Dataset targets;
  if (a.test.empty()) {
    sfr::Dataset raw = sfr::load_csv(a.data, cfg.target_column, task_of(model.likelihood));
    align_labels(raw, model.checkpoint.class_names);
    sfr::Split parts = sfr::split_raw(raw, cfg.split.train, cfg.split.val, cfg.split.test, cfg.split.seed);
    const auto& stats = model.checkpoint.normalization;
    train = stats ? sfr::normalize(parts.train, *stats) : parts.train;
    targets = stats ? sfr::normalize(parts.test, *stats) : parts.test;
  } else {
    train = training_part(a.data, cfg, model);
    targets = load_for_model(a.test, cfg, model, true);
  }
  const auto latent = sfr::full_gp_predict(train, model.checkpoint.weights, model.likelihood, model.prior_precision,
                                           targets.X, mode);
  const auto pred = sfr::predictive_from_latent(model.likelihood, latent, cfg.sfr.mc_samples, cfg.sfr.seed);
  write_predictions(a.out, targets, latent, pred);

  Json report = report_header("oracle-gp");
  report["predictions"] = a.out;
  report["num_train"] = train.size();
  report["num_points"] = targets.size();
  report["mean_mode"] = sfr::to_string(mode);
  emit(report, a.report);
  return 0;
}

int cmd_cl(const Args& a) {
  require_arg(a.data, "--data");
  const RunConfig cfg = load_config(a.config, a.seed);
  sfr::require(cfg.likelihood.is_classification(), sfr::ErrorKind::InvalidConfig,
               "continual learning needs a classification likelihood");
  const sfr::Dataset raw = sfr::load_csv(a.data, cfg.target_column, sfr::TaskKind::Classification);
  const sfr::Split parts = sfr::split(raw, cfg.split.train, cfg.split.val, cfg.split.test, cfg.split.seed);
  sfr::require(parts.test.size() > 0, sfr::ErrorKind::BadFractions, "continual learning needs a test split");

  const auto train_tasks = sfr::make_split_tasks(parts.train, cfg.cl.classes_per_task);
  const auto val_tasks = sfr::make_split_tasks(parts.val, cfg.cl.classes_per_task);
  const auto test_tasks = sfr::make_split_tasks(parts.test, cfg.cl.classes_per_task);
  std::vector<sfr::ContinuumTask> tasks;
  for (std::size_t t = 0; t < train_tasks.size(); ++t) {
    sfr::require(train_tasks[t].size() > 0 && test_tasks[t].size() > 0, sfr::ErrorKind::InvalidArgument,
                 "task " + std::to_string(t + 1) + " has no training or test rows");
    tasks.push_back({train_tasks[t], test_tasks[t], val_tasks[t]});
  }

  sfr::ClConfig cl;
  cl.tau = cfg.cl.tau;
  cl.points_per_task = cfg.cl.points_per_task;
  cl.network = {static_cast<int>(raw.dims()), cfg.likelihood.num_outputs(), cfg.hidden_widths, cfg.activation};
  cl.network.validate();
  cl.train = cfg.train;
  cl.mode = cfg.cl.mode;
  cl.batch = cfg.sfr.batch;

  const sfr::Stopwatch clock;
  const auto result = sfr::run_continuum(tasks, cl, cfg.likelihood);
  Json report = report_header("cl");
  report["tau"] = cl.tau;
  report["mode"] = cl.mode == sfr::ClMode::Sfr ? "sfr" : "l2";
  report["num_tasks"] = tasks.size();
  Json named;
  for (Eigen::Index i = 0; i < result.accuracy.rows(); ++i) {
    for (Eigen::Index j = 0; j < result.accuracy.cols(); ++j) {
      named["task_" + std::to_string(i + 1) + "_eval_on_task_" + std::to_string(j + 1)] = result.accuracy(i, j);
    }
  }
  report["accuracy"] = named;
  report["accuracy_matrix"] = sfr::io::to_json(result.accuracy);
  report["average_final"] = result.average_final;
  if (!a.buffer.empty()) {
    sfr::io::write_json_file(a.buffer, sfr::io::to_json(result.buffer));
    report["buffer"] = a.buffer;
  }
  report["nondeterministic"] = {{"wall_seconds", clock.seconds()}};
  emit(report, a.out.empty() ? a.report : a.out);
  return 0;
}

int cmd_gen(const Args& a) {
  require_arg(a.out, "--out");
  const std::uint64_t seed = a.seed.value_or(0);
  sfr::Dataset data;
  if (a.dataset == "sine") {
    data = sfr::make_sine(a.n, a.noise, seed);
  } else if (a.dataset == "sine_gap") {
    data = sfr::make_sine_gap(a.n, a.noise, seed);
  } else if (a.dataset == "banana") {
    data = sfr::make_banana(a.n, seed, a.noise);
  } else if (a.dataset == "blobs") {
    data = sfr::make_blobs(a.n, a.classes, 3.0, a.noise, seed);
  } else {
    throw sfr::Error(sfr::ErrorKind::InvalidArgument, "unknown dataset '" + a.dataset + "'");
  }
  sfr::write_csv(a.out, data, "y");
  Json report = report_header("gen");
  report["dataset"] = a.dataset;
  report["rows"] = data.size();
  report["path"] = a.out;
  emit(report, a.report);
  return 0;
}

void print_error(std::string_view kind, const std::string& message) {
  const Json err = {{"error", {{"kind", std::string(kind)}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse function-space uncertainty for trained MLPs"};
  app.require_subcommand(1);
  Args a;

  auto add_common = [&a](CLI::App* sub) {
    sub->add_option("--config", a.config, "run configuration (JSON)");
    sub->add_option("--seed", a.seed, "replaces every seed in the configuration");
    sub->add_option("--report", a.report, "also write the report JSON here");
  };

  auto* train = app.add_subcommand("train", "train the network; writes a checkpoint");
  add_common(train);
  train->add_option("--data", a.data, "training CSV");
  train->add_option("--out", a.out, "checkpoint path");

  auto* fit = app.add_subcommand("fit", "compute the sparse dual parameters; writes a posterior");
  add_common(fit);
  fit->add_option("--checkpoint", a.checkpoint, "trained network");
  fit->add_option("--data", a.data, "training CSV (the training part of the split is used)");
  fit->add_option("--out", a.out, "posterior path");
  fit->add_option("--mode", a.mode, "zero_mean or nn_mean");
  fit->add_option("--baseline", a.baseline, "'subset' fits only on the inducing rows");

  auto* predict = app.add_subcommand("predict", "predictions CSV from a posterior");
  add_common(predict);
  predict->add_option("--posterior", a.posterior, "posterior document");
  predict->add_option("--checkpoint", a.checkpoint, "overrides the posterior's weights reference");
  predict->add_option("--data", a.data, "inputs CSV (target column optional)");
  predict->add_option("--out", a.out, "predictions CSV");
  predict->add_option("--mode", a.mode, "zero_mean or nn_mean");

  auto* update = app.add_subcommand("update", "add new data to a posterior without retraining");
  add_common(update);
  update->add_option("--posterior", a.posterior, "posterior document");
  update->add_option("--checkpoint", a.checkpoint, "overrides the posterior's weights reference");
  update->add_option("--data", a.data, "new data CSV");
  update->add_option("--out", a.out, "updated posterior path");
  update->add_flag("--retrain", a.retrain, "also time retraining from scratch on base and new data");
  update->add_option("--base-data", a.base_data, "original training CSV for --retrain");

  auto* cl = app.add_subcommand("cl", "class-incremental continual learning run");
  add_common(cl);
  cl->add_option("--data", a.data, "labelled CSV split into tasks by class");
  cl->add_option("--out", a.out, "report path");
  cl->add_option("--buffer", a.buffer, "memory buffer path");

  auto* eval = app.add_subcommand("eval", "metrics of a posterior or a bare network");
  add_common(eval);
  eval->add_option("--posterior", a.posterior, "posterior document");
  eval->add_option("--checkpoint", a.checkpoint, "network checkpoint (alone: evaluates the network)");
  eval->add_option("--data", a.data, "labelled CSV");
  eval->add_option("--ood", a.ood, "out-of-distribution inputs for entropy AUROC");
  eval->add_option("--out", a.out, "report path");
  eval->add_option("--mode", a.mode, "zero_mean or nn_mean");

  auto* oracle = app.add_subcommand("oracle-gp", "dense GP over all training points");
  add_common(oracle);
  oracle->add_option("--checkpoint", a.checkpoint, "trained network");
  oracle->add_option("--data", a.data, "training CSV (the training part of the split is used)");
  oracle->add_option("--test", a.test, "inputs to predict at; the test split when omitted");
  oracle->add_option("--out", a.out, "predictions CSV");
  oracle->add_option("--mode", a.mode, "zero_mean or nn_mean");

  auto* gen = app.add_subcommand("gen", "write a synthetic dataset");
  gen->add_option("--dataset", a.dataset, "sine, sine_gap, banana or blobs");
  gen->add_option("--n", a.n, "rows");
  gen->add_option("--noise", a.noise, "noise standard deviation");
  gen->add_option("--classes", a.classes, "classes (blobs)");
  gen->add_option("--seed", a.seed, "seed");
  gen->add_option("--out", a.out, "CSV path");
  gen->add_option("--report", a.report, "also write the report JSON here");

  try {
    app.parse(argc, argv);
    if (*train) return cmd_train(a);
    if (*fit) return cmd_fit(a);
    if (*predict) return cmd_predict(a);
    if (*update) return cmd_update(a);
    if (*cl) return cmd_cl(a);
    if (*eval) return cmd_eval(a);
    if (*oracle) return cmd_oracle_gp(a);
    if (*gen) return cmd_gen(a);
    return 2;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("InvalidArgument", e.what());
    return 2;
  } catch (const sfr::Error& e) {
    print_error(sfr::to_string(e.kind()), e.what());
    return sfr::is_numeric(e.kind()) ? 3 : 2;
  } catch (const nlohmann::json::exception& e) {
    print_error("InvalidConfig", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("InvalidArgument", e.what());
    return 2;
  }
}
