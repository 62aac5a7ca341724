// Copyright 2026 The metassign Authors.
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

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "metassign/dataset.hpp"
#include "metassign/gnn.hpp"
#include "metassign/tensor.hpp"

namespace metassign {

enum class MetaGradMode { kFirstOrder, kExactFd };
enum class OuterOptimizer { kSgd, kAdam };

MetaGradMode parse_meta_grad_mode(const std::string& name);
std::string to_string(MetaGradMode mode);
OuterOptimizer parse_outer_optimizer(const std::string& name);
std::string to_string(OuterOptimizer optimizer);

struct MetaConfig {
  double alpha = 0.02;   // inner (task-level) step size
  double beta = 0.055;   // outer (meta) step size
  int K = 4;             // support samples per task
  int M = 25;            // query samples per task
  int inner_steps = 5;
  int task_batch = 7;
  int meta_iterations = 1500;
  MetaGradMode meta_grad_mode = MetaGradMode::kFirstOrder;
  OuterOptimizer outer_optimizer = OuterOptimizer::kSgd;
  double clip_norm = 10.0;  // global-norm clipping on both loops; <= 0 disables
  double fd_step = 1e-5;    // central-difference step for kExactFd
  std::uint64_t seed = 7;
  int threads = 1;
  bool record_wall_time = true;

  void validate() const;
};

/// Which observations of one task feed the inner and the outer loop.
struct TaskDraw {
  std::int32_t task_id = 0;
  std::vector<std::int32_t> support;
  std::vector<std::int32_t> query;
};

/// Loss of one task on a subset of its observations; fills `grad` when
/// non-null. `stream` seeds any randomness (dropout) of the evaluation.
using TaskObjective = std::function<double(const ParamList& theta, std::span<const std::int32_t> observations,
                                           std::uint64_t stream, ParamList* grad)>;

struct MetaTask {
  TaskObjective objective;
  TaskDraw draw;
};

/// Draws `task_batch` distinct tasks and, per task, disjoint support (K) and
/// query (M) observation sets, all without replacement.
std::vector<TaskDraw> sample_task_batch(std::span<const std::int32_t> task_ids,
                                        std::span<const std::int32_t> observation_ids, const MetaConfig& config,
                                        std::mt19937_64& rng);

/// Dataset form: training tasks only, observations = OD ids not held out.
std::vector<TaskDraw> sample_task_batch(const Dataset& dataset, const MetaConfig& config, std::mt19937_64& rng);

struct AdaptResult {
  ParamList theta;
  // Support loss before each step, followed by the loss after the last step.
  std::vector<double> support_losses;
};

/// Gradient descent on the support loss starting from a copy of theta.
AdaptResult inner_adapt(const ParamList& theta, const TaskObjective& objective,
                        std::span<const std::int32_t> support, double alpha, int inner_steps, double clip_norm,
                        std::uint64_t stream, bool track_final_loss = false);

struct MetaGradient {
  ParamList grad;
  double mean_query_loss = 0.0;
  std::vector<double> query_losses;
};

MetaGradient meta_gradient(const ParamList& theta, std::span<const MetaTask> tasks, const MetaConfig& config,
                           std::uint64_t stream);

struct HistoryEntry {
  int iteration = 0;
  double mean_query_loss = 0.0;
  double wall_time_s = 0.0;
};

struct MetaTrainState {
  ParamList theta;
  int iteration = 0;
  std::vector<HistoryEntry> history;
  std::mt19937_64 rng;
  // Adam moments, allocated on first use.
  ParamList adam_m;
  ParamList adam_v;
  ParamList best_theta;
  double best_loss = 0.0;
  int best_iteration = 0;

  MetaTrainState() = default;
  MetaTrainState(ParamList init, std::uint64_t seed);
};

/// One outer update on an already drawn batch of tasks.
void meta_step(MetaTrainState& state, std::span<const MetaTask> batch, const MetaConfig& config,
               double wall_time_s = 0.0);

struct MetaTrainResult {
  GatedGCNParams best;   // parameters at the lowest recorded query loss
  GatedGCNParams final;  // parameters after the last iteration
  std::vector<HistoryEntry> history;
  int best_iteration = 0;
};

/// Objective of the surrogate on one closure task; observations are OD ids.
TaskObjective gnn_task_objective(const Dataset& dataset, const GnnHyper& hyper, std::int32_t task_id,
                                 bool train = true);

using IterationCallback = std::function<void(const HistoryEntry&)>;

MetaTrainResult meta_train(const Dataset& dataset, const GatedGCNParams& init, const MetaConfig& config,
                           const IterationCallback& on_iteration = {});

std::string format_history_csv(std::span<const HistoryEntry> history);

}  // namespace metassign
