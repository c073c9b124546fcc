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
/// Versioned JSON documents for network checkpoints, fitted posteriors, CL
/// memory buffers and evaluation reports. Doubles are written in shortest
/// round-trip form, so a save/load cycle is bit-exact.

#ifndef SFR_IO_HPP
#define SFR_IO_HPP

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "sfr/cl.hpp"
#include "sfr/data.hpp"
#include "sfr/likelihood.hpp"
#include "sfr/metrics.hpp"
#include "sfr/nn.hpp"
#include "sfr/sfr.hpp"

namespace sfr::io {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Primitives

inline Json to_json(const Vector& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

inline Json to_json(const Matrix& m) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) j.push_back(to_json(Vector(m.row(i).transpose())));
  return j;
}

inline Vector vector_from_json(const Json& j) {
  require(j.is_array(), ErrorKind::InvalidConfig, "expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), ErrorKind::InvalidConfig, "expected a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

/// Rows of equal length; `cols` is used when there are no rows.
inline Matrix matrix_from_json(const Json& j, Eigen::Index cols = 0) {
  require(j.is_array(), ErrorKind::InvalidConfig, "expected an array of rows");
  if (j.empty()) return Matrix(0, cols);
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = vector_from_json(j[i]);
    require(row.size() == m.cols(), ErrorKind::InvalidConfig, "ragged matrix");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::MissingFile, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, "'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::MissingFile, "cannot write '" + path + "'");
  out << text;
  require(out.good(), ErrorKind::MissingFile, "failed writing '" + path + "'");
}

inline void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(1) + "\n"); }

inline void check_version(const Json& j, const std::string& what) {
  require(j.is_object() && j.contains("version") && j["version"].is_number_integer(), ErrorKind::InvalidConfig,
          what + " document has no version");
  require(j["version"].get<int>() == kFormatVersion, ErrorKind::InvalidConfig,
          what + " version " + std::to_string(j["version"].get<int>()) + " is not supported");
}

/// Field accessor that reports a schema error instead of throwing json exceptions.
inline const Json& field(const Json& j, const char* key) {
  require(j.is_object() && j.contains(key), ErrorKind::InvalidConfig, std::string("missing field '") + key + "'");
  return j.at(key);
}

// ---------------------------------------------------------------------------
// Likelihood, network, normalization

inline Json to_json(const Likelihood& lik) {
  Json j;
  j["type"] = lik.name();
  if (lik.is_gaussian()) j["noise_variance"] = lik.noise_variance();
  if (std::holds_alternative<Categorical>(lik.variant())) j["num_classes"] = lik.num_classes();
  return j;
}

inline Likelihood likelihood_from_json(const Json& j) {
  const std::string type = field(j, "type").get<std::string>();
  for (const auto& [key, _] : j.items()) {
    require(key == "type" || key == "noise_variance" || key == "num_classes", ErrorKind::InvalidConfig,
            "unknown likelihood key '" + key + "'");
  }
  if (type == "gaussian") return Gaussian{j.value("noise_variance", 1.0)};
  if (type == "bernoulli") return Bernoulli{};
  if (type == "categorical") return Categorical{field(j, "num_classes").get<int>()};
  throw Error(ErrorKind::InvalidConfig, "unknown likelihood type '" + type + "'");
}

inline Json to_json(const NetworkSpec& spec) {
  Json j;
  j["input_dim"] = spec.input_dim;
  j["output_dim"] = spec.output_dim;
  j["hidden_widths"] = spec.hidden_widths;
  j["activation"] = to_string(spec.activation);
  return j;
}

inline NetworkSpec network_spec_from_json(const Json& j) {
  NetworkSpec spec;
  spec.input_dim = field(j, "input_dim").get<int>();
  spec.output_dim = field(j, "output_dim").get<int>();
  spec.hidden_widths = field(j, "hidden_widths").get<std::vector<int>>();
  spec.activation = activation_from_string(field(j, "activation").get<std::string>());
  spec.validate();
  return spec;
}

inline Json to_json(const Normalization& n) {
  Json j;
  j["x_mean"] = to_json(n.x_mean);
  j["x_std"] = to_json(n.x_std);
  j["has_target"] = n.has_target;
  j["y_mean"] = n.y_mean;
  j["y_std"] = n.y_std;
  return j;
}

inline Normalization normalization_from_json(const Json& j) {
  Normalization n;
  n.x_mean = vector_from_json(field(j, "x_mean"));
  n.x_std = vector_from_json(field(j, "x_std"));
  n.has_target = field(j, "has_target").get<bool>();
  n.y_mean = field(j, "y_mean").get<double>();
  n.y_std = field(j, "y_std").get<double>();
  return n;
}

// ---------------------------------------------------------------------------
// Checkpoint

struct Checkpoint {
  Weights weights;
  std::optional<Likelihood> likelihood;
  std::optional<Normalization> normalization;
  std::vector<std::string> class_names;  // label of each class index, when trained from labelled text
  std::optional<double> prior_precision;  // delta used in training
};

inline Json checkpoint_to_json(const Checkpoint& ckpt) {
  const Weights& w = ckpt.weights;
  Json j;
  j["version"] = kFormatVersion;
  j["spec"] = to_json(w.spec);
  Json layout = Json::array();
  for (const auto& layer : w.layout) {
    layout.push_back({{"rows", layer.rows}, {"cols", layer.cols}, {"offset", layer.offset}});
  }
  j["layout"] = layout;
  j["values"] = to_json(w.values);
  if (ckpt.likelihood) j["likelihood"] = to_json(*ckpt.likelihood);
  if (ckpt.normalization) j["normalization"] = to_json(*ckpt.normalization);
  if (!ckpt.class_names.empty()) j["class_names"] = ckpt.class_names;
  if (ckpt.prior_precision) j["prior_precision"] = *ckpt.prior_precision;
  return j;
}

inline Checkpoint checkpoint_from_json(const Json& j) {
  check_version(j, "checkpoint");
  const NetworkSpec spec = network_spec_from_json(field(j, "spec"));
  Checkpoint ckpt{Weights(spec, vector_from_json(field(j, "values"))), std::nullopt, std::nullopt, {}, std::nullopt};
  const Json& layout = field(j, "layout");
  require(layout.is_array() && layout.size() == ckpt.weights.layout.size(), ErrorKind::InvalidConfig,
          "checkpoint layout does not match its spec");
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const LayerLayout stored{field(layout[l], "rows").get<int>(), field(layout[l], "cols").get<int>(),
                             field(layout[l], "offset").get<Eigen::Index>()};
    require(stored == ckpt.weights.layout[l], ErrorKind::InvalidConfig, "checkpoint layout does not match its spec");
  }
  if (j.contains("likelihood")) ckpt.likelihood = likelihood_from_json(j["likelihood"]);
  if (j.contains("normalization")) ckpt.normalization = normalization_from_json(j["normalization"]);
  if (j.contains("class_names")) ckpt.class_names = j["class_names"].get<std::vector<std::string>>();
  if (j.contains("prior_precision")) ckpt.prior_precision = j["prior_precision"].get<double>();
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_json_file(path, checkpoint_to_json(ckpt));
}

inline Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Posterior

/// Posterior document. Factor caches are not stored; they are rebuilt from the
/// referenced checkpoint on load.
inline Json posterior_to_json(const SfrPosterior& post, const std::string& weights_ref) {
  Json j;
  j["version"] = kFormatVersion;
  j["Z"] = to_json(post.inducing.Z);
  Json idx = Json::array();
  for (auto i : post.inducing.source_indices) idx.push_back(i);
  j["inducing_indices"] = idx;
  j["inducing_seed"] = post.inducing.seed;
  Json alpha = Json::array();
  Json B = Json::array();
  for (std::size_t c = 0; c < post.duals.alpha_u.size(); ++c) {
    alpha.push_back(to_json(post.duals.alpha_u[c]));
    B.push_back(to_json(post.duals.B_u[c]));
  }
  j["alpha_u"] = alpha;
  j["B_u"] = B;
  j["delta"] = post.kernel.prior_precision;
  j["likelihood"] = to_json(post.likelihood);
  j["mean_mode"] = to_string(post.mean_mode);
  j["weights_ref"] = weights_ref;
  return j;
}

struct PosteriorDocument {
  InducingSet inducing;
  DualParams duals;
  double delta = 1.0;
  Likelihood likelihood;
  MeanMode mean_mode = MeanMode::ZeroMean;
  std::string weights_ref;
};

inline PosteriorDocument posterior_document_from_json(const Json& j) {
  check_version(j, "posterior");
  PosteriorDocument doc;
  doc.inducing.Z = matrix_from_json(field(j, "Z"));
  if (j.contains("inducing_indices")) doc.inducing.source_indices = j["inducing_indices"].get<std::vector<std::size_t>>();
  if (j.contains("inducing_seed")) doc.inducing.seed = j["inducing_seed"].get<std::uint64_t>();
  const Eigen::Index m = doc.inducing.Z.rows();
  for (const auto& a : field(j, "alpha_u")) doc.duals.alpha_u.push_back(vector_from_json(a));
  for (const auto& b : field(j, "B_u")) doc.duals.B_u.push_back(matrix_from_json(b, m));
  doc.delta = field(j, "delta").get<double>();
  doc.likelihood = likelihood_from_json(field(j, "likelihood"));
  doc.mean_mode = mean_mode_from_string(field(j, "mean_mode").get<std::string>());
  doc.weights_ref = field(j, "weights_ref").get<std::string>();
  return doc;
}

inline SfrPosterior posterior_from_document(const PosteriorDocument& doc, const Weights& w_star) {
  return make_posterior(NtkKernel{w_star, doc.delta}, doc.likelihood, doc.inducing, doc.duals, doc.mean_mode);
}

// ---------------------------------------------------------------------------
// Memory buffer

inline Json to_json(const MemoryBuffer& buffer) {
  Json j;
  j["version"] = kFormatVersion;
  j["observed_classes"] = std::vector<int>(buffer.observed_classes.begin(), buffer.observed_classes.end());
  Json tasks = Json::array();
  for (const auto& mem : buffer.tasks) {
    Json t;
    t["Z"] = to_json(mem.Z);
    t["u"] = to_json(mem.u);
    Json b = Json::array();
    for (const auto& m : mem.Bbar_inv) b.push_back(to_json(m));
    t["Bbar_inv"] = b;
    tasks.push_back(t);
  }
  j["tasks"] = tasks;
  return j;
}

inline MemoryBuffer memory_buffer_from_json(const Json& j) {
  check_version(j, "memory buffer");
  MemoryBuffer buffer;
  for (int c : field(j, "observed_classes").get<std::vector<int>>()) buffer.observed_classes.insert(c);
  for (const auto& t : field(j, "tasks")) {
    TaskMemory mem;
    mem.Z = matrix_from_json(field(t, "Z"));
    mem.u = matrix_from_json(field(t, "u"));
    for (const auto& b : field(t, "Bbar_inv")) mem.Bbar_inv.push_back(matrix_from_json(b, mem.Z.rows()));
    buffer.tasks.push_back(std::move(mem));
  }
  return buffer;
}

// ---------------------------------------------------------------------------
// Reports

/// Report document; wall-clock timing sits under "nondeterministic" so the
/// rest of the document is reproducible byte for byte.
inline Json to_json(const EvalReport& r) {
  Json j;
  j["nlpd"] = r.nlpd;
  if (r.accuracy) j["accuracy"] = *r.accuracy;
  if (r.ece) {
    j["ece"] = *r.ece;
    j["ece_bins"] = r.ece_bins;
  }
  if (r.auroc) j["auroc"] = *r.auroc;
  j["floored_probabilities"] = r.floored_probabilities;
  j["nondeterministic"] = {{"wall_seconds", r.wall_seconds}};
  return j;
}

}  // namespace sfr::io

#endif  // SFR_IO_HPP
