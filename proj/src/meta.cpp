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

#include "metassign/meta.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "metassign/errors.hpp"
#include "metassign/rng.hpp"
#include "metassign/scenario.hpp"

namespace metassign {
namespace {

constexpr std::uint64_t kQueryKey = 0xffffffffULL;

void clip_global_norm(ParamList& grad, double max_norm) {
  if (!(max_norm > 0.0)) return;
  const double norm = global_norm(grad);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (Tensor& t : grad) {
      for (double& v : t.values()) v *= f;
    }
  }
}

bool all_finite(const ParamList& params) {
  for (const Tensor& t : params) {
    for (double v : t.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void axpy(ParamList& y, double a, const ParamList& x) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto ys = y[i].values();
    auto xs = x[i].values();
    for (std::size_t k = 0; k < ys.size(); ++k) ys[k] += a * xs[k];
  }
}

ParamList zeros_like(const ParamList& params) {
  ParamList z;
  z.reserve(params.size());
  for (const Tensor& t : params) z.emplace_back(t.rows(), t.cols());
  return z;
}

// Query loss after adaptation, optionally with its gradient at the adapted point.
double adapted_query_loss(const ParamList& theta, const MetaTask& task, const MetaConfig& config,
                          std::uint64_t stream, ParamList* grad) {
  const AdaptResult adapted =
      inner_adapt(theta, task.objective, task.draw.support, config.alpha, config.inner_steps, config.clip_norm, stream);
  return task.objective(adapted.theta, task.draw.query, derive_seed(stream, {kQueryKey}), grad);
}

}  // namespace

MetaGradMode parse_meta_grad_mode(const std::string& name) {
  if (name == "first_order") return MetaGradMode::kFirstOrder;
  if (name == "exact_fd") return MetaGradMode::kExactFd;
  throw ConfigError("unknown meta_grad_mode '" + name + "' (expected first_order or exact_fd)");
}

std::string to_string(MetaGradMode mode) { return mode == MetaGradMode::kFirstOrder ? "first_order" : "exact_fd"; }

OuterOptimizer parse_outer_optimizer(const std::string& name) {
  if (name == "sgd") return OuterOptimizer::kSgd;
  if (name == "adam") return OuterOptimizer::kAdam;
  throw ConfigError("unknown outer_optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(OuterOptimizer optimizer) { return optimizer == OuterOptimizer::kSgd ? "sgd" : "adam"; }

void MetaConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
  if (K < 1 || M < 1) throw ConfigError("K and M must be at least 1");
  if (inner_steps < 1) throw ConfigError("inner_steps must be at least 1");
  if (task_batch < 1) throw ConfigError("task_batch must be at least 1");
  if (meta_iterations < 0) throw ConfigError("meta_iterations must be non-negative");
  if (!(fd_step > 0.0)) throw ConfigError("fd_step must be positive");
  if (threads < 1) throw ConfigError("threads must be at least 1");
}

MetaTrainState::MetaTrainState(ParamList init, std::uint64_t seed)
    : theta(std::move(init)), rng(make_rng(seed, {0x6d657461})), best_theta(theta) {}

std::vector<TaskDraw> sample_task_batch(std::span<const std::int32_t> task_ids,
                                        std::span<const std::int32_t> observation_ids, const MetaConfig& config,
                                        std::mt19937_64& rng) {
  const auto n_tasks = static_cast<std::int64_t>(task_ids.size());
  const auto n_obs = static_cast<std::int64_t>(observation_ids.size());
  if (n_tasks < config.task_batch) {
    throw ConfigError("task_batch " + std::to_string(config.task_batch) + " exceeds the " +
                      std::to_string(n_tasks) + " available training tasks");
  }
  if (n_obs < config.K + config.M) {
    throw ConfigError("K + M = " + std::to_string(config.K + config.M) + " exceeds the " + std::to_string(n_obs) +
                      " observations available per task");
  }
  std::vector<std::int32_t> tasks(task_ids.begin(), task_ids.end());
  for (std::int64_t i = 0; i < config.task_batch; ++i) std::swap(tasks[i], tasks[uniform_int(rng, i, n_tasks - 1)]);

  std::vector<TaskDraw> draws;
  draws.reserve(config.task_batch);
  std::vector<std::int32_t> obs(observation_ids.begin(), observation_ids.end());
  for (int t = 0; t < config.task_batch; ++t) {
    std::copy(observation_ids.begin(), observation_ids.end(), obs.begin());
    const std::int64_t need = config.K + config.M;
    for (std::int64_t i = 0; i < need; ++i) std::swap(obs[i], obs[uniform_int(rng, i, n_obs - 1)]);
    TaskDraw d;
    d.task_id = tasks[t];
    d.support.assign(obs.begin(), obs.begin() + config.K);
    d.query.assign(obs.begin() + config.K, obs.begin() + need);
    draws.push_back(std::move(d));
  }
  return draws;
}

std::vector<TaskDraw> sample_task_batch(const Dataset& dataset, const MetaConfig& config, std::mt19937_64& rng) {
  const auto ods = dataset.train_od_ids();
  return sample_task_batch(dataset.split.train_task_ids, ods, config, rng);
}

AdaptResult inner_adapt(const ParamList& theta, const TaskObjective& objective,
                        std::span<const std::int32_t> support, double alpha, int inner_steps, double clip_norm,
                        std::uint64_t stream, bool track_final_loss) {
  if (support.empty()) throw ContractError("inner_adapt needs a non-empty support set");
  if (inner_steps < 1) throw ContractError("inner_adapt needs at least one step");
  AdaptResult out{theta, {}};
  ParamList grad;
  for (int s = 0; s < inner_steps; ++s) {
    const double loss = objective(out.theta, support, derive_seed(stream, {static_cast<std::uint64_t>(s)}), &grad);
    if (!std::isfinite(loss) || !all_finite(grad)) {
      throw AdaptationError("non-finite support loss or gradient at inner step " + std::to_string(s));
    }
    out.support_losses.push_back(loss);
    clip_global_norm(grad, clip_norm);
    axpy(out.theta, -alpha, grad);
  }
  if (track_final_loss) {
    out.support_losses.push_back(
        objective(out.theta, support, derive_seed(stream, {static_cast<std::uint64_t>(inner_steps)}), nullptr));
  }
  return out;
}

MetaGradient meta_gradient(const ParamList& theta, std::span<const MetaTask> tasks, const MetaConfig& config,
                           std::uint64_t stream) {
  if (tasks.empty()) throw ContractError("meta_gradient over zero tasks");
  MetaGradient out;
  out.grad = zeros_like(theta);
  out.query_losses.assign(tasks.size(), 0.0);
  std::vector<ParamList> per_task(tasks.size());
  auto task_stream = [&](std::size_t i) { return derive_seed(stream, {i}); };

  // Each task writes only its own slot; the reduction below runs in task order.
  auto run_task = [&](std::size_t i) {
    out.query_losses[i] = adapted_query_loss(theta, tasks[i], config, task_stream(i),
                                             config.meta_grad_mode == MetaGradMode::kFirstOrder ? &per_task[i] : nullptr);
  };
  if (config.threads > 1 && tasks.size() > 1) {
    std::vector<std::exception_ptr> errors(tasks.size());
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    const auto n = std::min<std::size_t>(config.threads, tasks.size());
    for (std::size_t w = 0; w < n; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
          try {
            run_task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  }

  if (config.meta_grad_mode == MetaGradMode::kFirstOrder) {
    for (const ParamList& g : per_task) axpy(out.grad, 1.0, g);
  } else {
    // Central differences of the task-summed query loss through the inner loop.
    ParamList work = theta;
    const double h = config.fd_step;
    auto summed = [&](const ParamList& p) {
      double total = 0.0;
      for (std::size_t i = 0; i < tasks.size(); ++i) total += adapted_query_loss(p, tasks[i], config, task_stream(i), nullptr);
      return total;
    };
    for (std::size_t t = 0; t < work.size(); ++t) {
      auto values = work[t].values();
      auto g = out.grad[t].values();
      for (std::size_t k = 0; k < values.size(); ++k) {
        const double saved = values[k];
        values[k] = saved + h;
        const double up = summed(work);
        values[k] = saved - h;
        const double down = summed(work);
        values[k] = saved;
        g[k] = (up - down) / (2.0 * h);
      }
    }
  }
  double total = 0.0;
  for (double l : out.query_losses) total += l;
  out.mean_query_loss = total / static_cast<double>(tasks.size());
  return out;
}

void meta_step(MetaTrainState& state, std::span<const MetaTask> batch, const MetaConfig& config,
               double wall_time_s) {
  const int iteration = state.iteration + 1;
  MetaGradient mg = meta_gradient(state.theta, batch, config,
                                  derive_seed(config.seed, {0x73746570, static_cast<std::uint64_t>(iteration)}));
  if (!std::isfinite(mg.mean_query_loss) || !all_finite(mg.grad)) {
    throw AdaptationError("non-finite meta-gradient at meta-iteration " + std::to_string(iteration) +
                          " (mean query loss " + std::to_string(mg.mean_query_loss) + ")");
  }
  // The recorded loss belongs to the parameters the batch was evaluated at.
  if (state.history.empty() || mg.mean_query_loss < state.best_loss) {
    state.best_loss = mg.mean_query_loss;
    state.best_theta = state.theta;
    state.best_iteration = iteration;
  }
  clip_global_norm(mg.grad, config.clip_norm);
  if (config.outer_optimizer == OuterOptimizer::kSgd) {
    axpy(state.theta, -config.beta, mg.grad);
  } else {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (state.adam_m.empty()) {
      state.adam_m = zeros_like(state.theta);
      state.adam_v = zeros_like(state.theta);
    }
    const double c1 = 1.0 - std::pow(b1, iteration);
    const double c2 = 1.0 - std::pow(b2, iteration);
    for (std::size_t i = 0; i < state.theta.size(); ++i) {
      auto th = state.theta[i].values();
      auto g = mg.grad[i].values();
      auto m = state.adam_m[i].values();
      auto v = state.adam_v[i].values();
      for (std::size_t k = 0; k < th.size(); ++k) {
        m[k] = b1 * m[k] + (1.0 - b1) * g[k];
        v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
        th[k] -= config.beta * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
      }
    }
  }
  state.iteration = iteration;
  state.history.push_back({iteration, mg.mean_query_loss, wall_time_s});
}

TaskObjective gnn_task_objective(const Dataset& dataset, const GnnHyper& hyper, std::int32_t task_id, bool train) {
  return [&dataset, hyper, task_id, train](const ParamList& theta, std::span<const std::int32_t> observations,
                                           std::uint64_t stream, ParamList* grad) {
    std::vector<GraphBatch> batches;
    batches.reserve(observations.size());
    for (std::int32_t od : observations) batches.push_back(make_graph_batch(dataset, task_id, od));
    return batch_loss(hyper, theta, batches, train, stream, grad);
  };
}

MetaTrainResult meta_train(const Dataset& dataset, const GatedGCNParams& init, const MetaConfig& config,
                           const IterationCallback& on_iteration) {
  config.validate();
  dataset.validate();
  MetaTrainState state(init.weights, config.seed);
  const auto start = std::chrono::steady_clock::now();
  for (int it = 0; it < config.meta_iterations; ++it) {
    const auto draws = sample_task_batch(dataset, config, state.rng);
    std::vector<MetaTask> batch;
    batch.reserve(draws.size());
    for (const TaskDraw& d : draws) {
      if (dataset.is_test_task(d.task_id)) throw ContractError("held-out task drawn during meta-training");
      batch.push_back({gnn_task_objective(dataset, init.hyper, d.task_id), d});
    }
    meta_step(state, batch, config);
    if (config.record_wall_time) {
      state.history.back().wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    if (on_iteration) on_iteration(state.history.back());
  }
  MetaTrainResult result;
  result.final = GatedGCNParams{init.hyper, state.theta};
  result.best = GatedGCNParams{init.hyper, state.history.empty() ? state.theta : state.best_theta};
  result.history = std::move(state.history);
  result.best_iteration = state.best_iteration;
  return result;
}

std::string format_history_csv(std::span<const HistoryEntry> history) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,mean_query_loss,wall_time_s\n";
  for (const HistoryEntry& h : history) out << h.iteration << ',' << h.mean_query_loss << ',' << h.wall_time_s << '\n';
  return out.str();
}

}  // namespace metassign
