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
/// Function-space regularizer for continual learning.
///
/// After task t the buffer keeps M inducing inputs Z_t drawn from D_t, the
/// network outputs u_t = f_{w*_t}(Z_t), and per output c the metric
///
///     Bbar⁻¹_{t,c} = K_zz,c⁻¹ B_u,c K_zz,c⁻¹,   B_u,c = sum_{i in D_t} k_zi beta_ic k_ziᵀ,
///
/// (identity for classes not observed so far). Training on later tasks adds
///
///     R(w) = 1/2 sum_s sum_c (1/M) dᵀ Bbar⁻¹_{s,c} d,   d = u_{s,c} - f_w(Z_s)_c
///
/// scaled by tau to the task loss.

#ifndef SFR_CL_HPP
#define SFR_CL_HPP

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "sfr/data.hpp"
#include "sfr/kernel.hpp"
#include "sfr/metrics.hpp"
#include "sfr/nn.hpp"
#include "sfr/sfr.hpp"

namespace sfr {

struct TaskMemory {
  Matrix Z;                       // M x D
  Matrix u;                       // M x C, f_{w*}(Z)
  std::vector<Matrix> Bbar_inv;   // per output, M x M
};

struct MemoryBuffer {
  std::vector<TaskMemory> tasks;
  std::set<int> observed_classes;

  bool empty() const { return tasks.empty(); }
};

/// Metric used in place of Bbar⁻¹: the dual-parameter one, or the identity (L2 ablation).
enum class ClMode { Sfr, L2 };

struct ClConfig {
  double tau = 1.0;
  Eigen::Index points_per_task = 20;
  NetworkSpec network;
  TrainConfig train;  // train.prior_precision is the delta of both training and the kernel
  ClMode mode = ClMode::Sfr;
  Eigen::Index batch = 256;
};

/// Class indices present in a dataset's targets (just {0} for single-output likelihoods).
inline std::set<int> classes_in(const Dataset& data, const Likelihood& lik) {
  if (lik.num_outputs() == 1) return {0};
  std::set<int> out;
  for (Eigen::Index i = 0; i < data.size(); ++i) out.insert(static_cast<int>(data.y(i)));
  return out;
}

/// Memory entry for a finished task. `observed_classes` are all classes seen up
/// to and including this task; other outputs get an identity metric.
inline TaskMemory build_task_memory(const Dataset& data_t, const Weights& w_star, const Likelihood& lik,
                                    double prior_precision, Eigen::Index m, std::uint64_t seed,
                                    const std::set<int>& observed_classes, ClMode mode = ClMode::Sfr,
                                    Eigen::Index batch = 256) {
  const InducingSet Z = sample_inducing(data_t.X, m, seed);
  const int C = w_star.spec.output_dim;
  TaskMemory mem;
  mem.Z = Z.Z;
  mem.u = forward(w_star, Z.Z);
  mem.Bbar_inv.assign(static_cast<std::size_t>(C), Matrix::Identity(m, m));
  if (mode == ClMode::L2) return mem;

  const JacobianSet z_jac = jacobians(w_star, Z.Z);
  DualParams duals = DualParams::zeros(C, m);
  detail::accumulate_duals(duals, z_jac, w_star, prior_precision, lik, data_t, batch);
  for (int c = 0; c < C; ++c) {
    if (C > 1 && !observed_classes.contains(c)) continue;
    const auto uc = static_cast<std::size_t>(c);
    detail::mirror_lower(duals.B_u[uc]);
    const CholeskyFactor kzz = cholesky_jittered(self_gram(z_jac, c, prior_precision));
    const Matrix left = solve_posdef(kzz, duals.B_u[uc]);                  // K⁻¹ B
    const Matrix both = solve_posdef(kzz, Matrix(left.transpose()));       // K⁻¹ (K⁻¹ B)ᵀ = K⁻¹ B K⁻¹
    mem.Bbar_inv[uc] = symmetrize(both);
  }
  return mem;
}

/// R(w) for the buffer; adds dR/dw into *grad when given. Zero for an empty buffer.
inline double regularizer(const Weights& w, const MemoryBuffer& buffer, Vector* grad = nullptr) {
  double value = 0.0;
  for (const auto& mem : buffer.tasks) {
    const ForwardCache cache = forward_cached(w, mem.Z);
    const Matrix d = mem.u - cache.output();
    const double inv_m = 1.0 / static_cast<double>(mem.Z.rows());
    Matrix G(d.rows(), d.cols());
    for (Eigen::Index c = 0; c < d.cols(); ++c) {
      const Vector Bd = mem.Bbar_inv[static_cast<std::size_t>(c)] * d.col(c);
      value += 0.5 * inv_m * d.col(c).dot(Bd);
      G.col(c) = -inv_m * Bd;
    }
    if (grad) *grad += backward(w, cache, G);
  }
  return value;
}

/// Fraction of rows whose highest-scoring output matches the label.
inline double network_accuracy(const Weights& w, const Dataset& data, const Likelihood& lik) {
  const Matrix F = forward(w, data.X);
  Matrix probs(F.rows(), lik.num_classes());
  for (Eigen::Index i = 0; i < F.rows(); ++i) probs.row(i) = inverse_link(lik, F.row(i).transpose()).transpose();
  return accuracy(probs, data.y);
}

/// Trains on task data plus tau * R(w, buffer) from w_init, then builds the
/// task's memory entry from the new MAP. The buffer is not modified.
/// Validation uses `val` when given, the task data otherwise.
inline std::pair<Weights, TaskMemory> train_task(const Dataset& data_t, const Weights& w_init,
                                                 const MemoryBuffer& buffer, const ClConfig& cfg,
                                                 const Likelihood& lik, const Dataset* val = nullptr,
                                                 std::uint64_t memory_seed = 0) {
  require(std::isfinite(cfg.tau) && cfg.tau >= 0.0, ErrorKind::InvalidConfig, "tau must be finite and >= 0");
  Penalty penalty;
  if (cfg.tau > 0.0 && !buffer.empty()) {
    penalty = [&buffer, tau = cfg.tau](const Weights& w, Vector* grad) {
      if (!grad) return tau * regularizer(w, buffer);
      Vector g = Vector::Zero(w.num_params());
      const double r = regularizer(w, buffer, &g);
      *grad += tau * g;
      return tau * r;
    };
  }
  Weights w_star = train(data_t, val ? *val : data_t, lik, cfg.train, w_init, penalty);

  std::set<int> observed = buffer.observed_classes;
  const auto here = classes_in(data_t, lik);
  observed.insert(here.begin(), here.end());
  const Eigen::Index m = std::min(cfg.points_per_task, data_t.size());
  TaskMemory mem = build_task_memory(data_t, w_star, lik, cfg.train.prior_precision, m, memory_seed, observed,
                                     cfg.mode, cfg.batch);
  return {std::move(w_star), std::move(mem)};
}

struct ContinuumTask {
  Dataset train;
  Dataset test;
  Dataset val{};  // validation for early stopping; the training data when empty
};

struct ContinuumResult {
  Matrix accuracy;  // (i, j): accuracy on task j's test split after training task i
  double average_final = 0.0;
  Weights final_weights;
  MemoryBuffer buffer;  // after the last task
};

/// Trains tasks in order, carrying weights and the memory buffer forward.
/// Task t uses training seed cfg.train.seed + t.
inline ContinuumResult run_continuum(const std::vector<ContinuumTask>& tasks, const ClConfig& cfg,
                                     const Likelihood& lik) {
  require(!tasks.empty(), ErrorKind::InvalidArgument, "continuum needs at least one task");
  const auto T = static_cast<Eigen::Index>(tasks.size());
  ContinuumResult result;
  result.accuracy = Matrix::Zero(T, T);
  MemoryBuffer buffer;
  Weights w = init_weights(cfg.network, cfg.train.seed);
  for (Eigen::Index t = 0; t < T; ++t) {
    ClConfig task_cfg = cfg;
    task_cfg.train.seed = cfg.train.seed + static_cast<std::uint64_t>(t);
    const auto& task = tasks[static_cast<std::size_t>(t)];
    const Dataset* val = task.val.empty() ? nullptr : &task.val;
    auto [w_next, mem] = train_task(task.train, w, buffer, task_cfg, lik, val, task_cfg.train.seed);
    w = std::move(w_next);
    const auto here = classes_in(task.train, lik);
    buffer.observed_classes.insert(here.begin(), here.end());
    buffer.tasks.push_back(std::move(mem));
    for (Eigen::Index j = 0; j < T; ++j) {
      result.accuracy(t, j) = network_accuracy(w, tasks[static_cast<std::size_t>(j)].test, lik);
    }
  }
  result.average_final = result.accuracy.row(T - 1).mean();
  result.final_weights = w;
  result.buffer = std::move(buffer);
  return result;
}

}  // namespace sfr

#endif  // SFR_CL_HPP
