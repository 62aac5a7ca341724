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

#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "metassign/errors.hpp"
#include "metassign/meta.hpp"
#include "metassign/rng.hpp"

using namespace metassign;

namespace {

// L(w) = (w - target)^2 on a single scalar parameter.
TaskObjective quadratic(double target) {
  return [target](const ParamList& theta, std::span<const std::int32_t>, std::uint64_t, ParamList* grad) {
    const double w = theta[0](0, 0);
    if (grad) *grad = ParamList{Tensor::scalar(2.0 * (w - target))};
    return (w - target) * (w - target);
  };
}

MetaConfig toy_config() {
  MetaConfig c;
  c.alpha = 0.1;
  c.beta = 0.1;
  c.inner_steps = 5;
  c.task_batch = 2;
  c.K = 1;
  c.M = 1;
  c.seed = 5;
  return c;
}

// Meta-trains on the quadratic family whose optima sit at center -1 and center + 1.
MetaTrainState train_toy(double start, double center, int iterations, const MetaConfig& cfg) {
  MetaTrainState state(ParamList{Tensor::scalar(start)}, cfg.seed);
  const std::vector<std::int32_t> tasks{0, 1}, obs{0, 1};
  for (int it = 0; it < iterations; ++it) {
    std::vector<MetaTask> batch;
    for (const TaskDraw& d : sample_task_batch(tasks, obs, cfg, state.rng)) {
      batch.push_back({quadratic(center + (d.task_id == 0 ? -1.0 : 1.0)), d});
    }
    meta_step(state, batch, cfg);
  }
  return state;
}

MetaConfig small_meta() {
  MetaConfig c;
  c.K = 2;
  c.M = 3;
  c.task_batch = 3;
  c.inner_steps = 2;
  c.meta_iterations = 3;
  c.record_wall_time = false;
  return c;
}

GnnHyper small_hyper(const Dataset& d) {
  GnnHyper h;
  h.node_features = 3 + d.network.n_zones;
  h.hidden = 6;
  h.layers = 1;
  return h;
}

}  // namespace

TEST_CASE("task batches have the configured composition") {
  std::vector<std::int32_t> tasks(300), obs(49);
  for (int i = 0; i < 300; ++i) tasks[i] = i;
  for (int i = 0; i < 49; ++i) obs[i] = i;
  MetaConfig c;
  std::mt19937_64 rng(1);
  const auto draws = sample_task_batch(tasks, obs, c, rng);
  REQUIRE(draws.size() == 7);
  std::size_t support = 0, query = 0;
  std::set<std::int32_t> ids;
  for (const TaskDraw& d : draws) {
    support += d.support.size();
    query += d.query.size();
    ids.insert(d.task_id);
    std::set<std::int32_t> s(d.support.begin(), d.support.end());
    std::set<std::int32_t> q(d.query.begin(), d.query.end());
    CHECK(s.size() == d.support.size());
    CHECK(q.size() == d.query.size());
    for (auto o : q) CHECK(s.count(o) == 0);
  }
  CHECK(support == 28);
  CHECK(query == 175);
  CHECK(ids.size() == 7);

  std::mt19937_64 again(1);
  const auto repeat = sample_task_batch(tasks, obs, c, again);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    CHECK(repeat[i].task_id == draws[i].task_id);
    CHECK(repeat[i].support == draws[i].support);
    CHECK(repeat[i].query == draws[i].query);
  }
}

TEST_CASE("task batches reject impossible requests") {
  const std::vector<std::int32_t> tasks{0, 1, 2}, obs{0, 1, 2, 3, 4};
  MetaConfig c;
  c.task_batch = 2;
  c.K = 2;
  c.M = 4;
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(sample_task_batch(tasks, obs, c, rng), ConfigError);
  c.M = 3;
  c.task_batch = 4;
  CHECK_THROWS_AS(sample_task_batch(tasks, obs, c, rng), ConfigError);
}

TEST_CASE("inner adaptation is gradient descent and leaves theta alone") {
  const ParamList theta{Tensor::scalar(0.0)};
  const std::int32_t support[] = {0};
  const AdaptResult r = inner_adapt(theta, quadratic(1.0), support, 0.1, 5, 0.0, 3, true);
  CHECK(r.theta[0].item() == doctest::Approx(1.0 - std::pow(0.8, 5)).epsilon(1e-14));
  CHECK(r.theta[0].item() == doctest::Approx(0.67232));
  CHECK(theta[0].item() == 0.0);
  REQUIRE(r.support_losses.size() == 6);
  CHECK(r.support_losses.back() <= r.support_losses.front());
  for (std::size_t i = 1; i < r.support_losses.size(); ++i) CHECK(r.support_losses[i] <= r.support_losses[i - 1]);
  CHECK_THROWS_AS(inner_adapt(theta, quadratic(1.0), support, 0.1, 0, 0.0, 3), ContractError);
  CHECK_THROWS_AS(inner_adapt(theta, quadratic(1.0), {}, 0.1, 1, 0.0, 3), ContractError);
}

TEST_CASE("inner adaptation on the real model does not touch the incoming weights") {
  const Dataset& d = testing::small_dataset();
  const GatedGCNParams p = init_params(4, small_hyper(d));
  const std::string before = serialize_params(p);
  const std::int32_t support[] = {d.train_od_ids()[0], d.train_od_ids()[1]};
  const AdaptResult r = inner_adapt(p.weights, gnn_task_objective(d, p.hyper, d.split.train_task_ids[0]), support,
                                    0.02, 3, 10.0, 1);
  CHECK(serialize_params(p) == before);
  CHECK(r.theta != p.weights);
}

TEST_CASE("non-finite support losses raise an adaptation error naming the step") {
  int calls = 0;
  const TaskObjective blows_up = [&](const ParamList& theta, std::span<const std::int32_t>, std::uint64_t,
                                     ParamList* grad) {
    if (grad) *grad = ParamList{Tensor::scalar(1.0)};
    return ++calls == 3 ? std::numeric_limits<double>::quiet_NaN() : theta[0].item();
  };
  const std::int32_t support[] = {0};
  try {
    inner_adapt(ParamList{Tensor::scalar(1.0)}, blows_up, support, 0.1, 5, 0.0, 0);
    FAIL("expected an adaptation error");
  } catch (const AdaptationError& e) {
    CHECK(std::string(e.what()).find("step 2") != std::string::npos);
  }
}

TEST_CASE("first-order meta-gradient sums the adapted query gradients") {
  MetaConfig c = toy_config();
  c.inner_steps = 1;
  const std::vector<MetaTask> tasks{{quadratic(-1.0), {0, {0}, {1}}}, {quadratic(2.0), {1, {0}, {1}}}};
  const MetaGradient g = meta_gradient(ParamList{Tensor::scalar(0.5)}, tasks, c, 0);
  // One step from 0.5: w' = 0.5 - 0.1 * 2 (0.5 - t).
  const double w1 = 0.5 - 0.2 * 1.5, w2 = 0.5 + 0.2 * 1.5;
  CHECK(g.grad[0].item() == doctest::Approx(2 * (w1 + 1.0) + 2 * (w2 - 2.0)).epsilon(1e-14));
  CHECK(g.mean_query_loss == doctest::Approx(0.5 * ((w1 + 1) * (w1 + 1) + (w2 - 2) * (w2 - 2))));

  c.meta_grad_mode = MetaGradMode::kExactFd;
  const MetaGradient fd = meta_gradient(ParamList{Tensor::scalar(0.5)}, tasks, c, 0);
  // Through one step dw'/dw = 0.8, so the exact gradient is 0.8 times the first-order one.
  CHECK(fd.grad[0].item() == doctest::Approx(0.8 * g.grad[0].item()).epsilon(1e-8));
}

TEST_CASE("zero meta step size keeps theta but still records history") {
  MetaConfig c = toy_config();
  c.beta = 0.0;
  const MetaTrainState s = train_toy(3.0, 0.0, 4, c);
  CHECK(s.theta[0].item() == 3.0);
  CHECK(s.history.size() == 4);
  CHECK(s.iteration == 4);
}

TEST_CASE("meta-training on the symmetric quadratic family finds the centre") {
  const MetaTrainState s = train_toy(3.0, 0.0, 200, toy_config());
  CHECK(std::abs(s.theta[0].item()) < 0.05);
  CHECK(s.history.back().mean_query_loss < s.history.front().mean_query_loss);
  for (std::size_t i = 50; i < s.history.size(); i += 50) {
    CHECK(s.history[i].mean_query_loss <= s.history[i - 50].mean_query_loss + 1e-12);
  }
}

TEST_CASE("adaptation from the meta-learned start beats a random start on held-out toy tasks") {
  const double center = 5.0;
  const MetaTrainState s = train_toy(0.0, center, 300, toy_config());
  auto rng = make_rng(77);
  int wins = 0;
  const int trials = 50;
  const std::int32_t support[] = {0};
  for (int t = 0; t < trials; ++t) {
    const double target = center - 1.0 + 2.0 * uniform01(rng);
    const double random_start = -1.0 + 2.0 * uniform01(rng);
    const auto from_meta = inner_adapt(s.theta, quadratic(target), support, 0.1, 5, 10.0, 0, true);
    const auto from_random = inner_adapt(ParamList{Tensor::scalar(random_start)}, quadratic(target), support, 0.1,
                                         5, 10.0, 0, true);
    if (from_meta.support_losses.back() < from_random.support_losses.back()) ++wins;
  }
  CHECK(wins >= 0.9 * trials);
}

TEST_CASE("meta configuration validation and names") {
  MetaConfig c;
  CHECK_NOTHROW(c.validate());
  c.beta = 0.0;
  CHECK_NOTHROW(c.validate());
  c.beta = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = MetaConfig{};
  c.inner_steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_meta_grad_mode("exact_fd") == MetaGradMode::kExactFd);
  CHECK(to_string(OuterOptimizer::kAdam) == "adam");
  CHECK_THROWS_AS(parse_outer_optimizer("rmsprop"), ConfigError);
}

TEST_CASE("meta_train on a generated corpus") {
  const Dataset& d = testing::small_dataset();
  const GatedGCNParams init = init_params(3, small_hyper(d));
  MetaConfig c = small_meta();

  c.meta_iterations = 1;
  CHECK(meta_train(d, init, c).history.size() == 1);

  c.meta_iterations = 3;
  std::vector<int> seen;
  const MetaTrainResult a = meta_train(d, init, c, [&](const HistoryEntry& h) { seen.push_back(h.iteration); });
  CHECK(seen == std::vector<int>{1, 2, 3});
  CHECK(a.history.size() == 3);
  CHECK(a.best_iteration >= 1);
  CHECK(a.best_iteration <= 3);
  double best = a.history[0].mean_query_loss;
  for (const HistoryEntry& h : a.history) best = std::min(best, h.mean_query_loss);
  CHECK(a.history[a.best_iteration - 1].mean_query_loss == best);

  const MetaTrainResult b = meta_train(d, init, c);
  CHECK(serialize_params(a.best) == serialize_params(b.best));
  CHECK(serialize_params(a.final) == serialize_params(b.final));

  c.threads = 3;
  const MetaTrainResult threaded = meta_train(d, init, c);
  CHECK(serialize_params(threaded.final) == serialize_params(a.final));
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(threaded.history[i].mean_query_loss == a.history[i].mean_query_loss);
  }

  const std::string csv = format_history_csv(a.history);
  CHECK(csv.rfind("iteration,mean_query_loss,wall_time_s\n", 0) == 0);
}

TEST_CASE("training draws never touch the held-out split") {
  const Dataset& d = testing::small_dataset();
  MetaConfig c = small_meta();
  std::mt19937_64 rng(123);
  for (int it = 0; it < 200; ++it) {
    for (const TaskDraw& draw : sample_task_batch(d, c, rng)) {
      CHECK_FALSE(d.is_test_task(draw.task_id));
      for (auto o : draw.support) CHECK_FALSE(d.is_test_od(o));
      for (auto o : draw.query) CHECK_FALSE(d.is_test_od(o));
    }
  }
}
