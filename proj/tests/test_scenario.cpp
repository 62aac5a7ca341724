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
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "metassign/errors.hpp"
#include "metassign/rng.hpp"
#include "metassign/scenario.hpp"

using namespace metassign;

namespace {

RoadNetwork line_network(int nodes) {
  RoadNetwork net;
  net.n_zones = nodes;
  for (int i = 0; i < nodes; ++i) {
    Node n;
    n.node_id = i;
    n.zone_id = i;
    n.original_id = i + 1;
    net.nodes.push_back(n);
  }
  for (int i = 0; i + 1 < nodes; ++i) {
    Edge e;
    e.edge_id = i;
    e.from_node = i;
    e.to_node = i + 1;
    e.capacity = 500.0 + 100.0 * i;
    e.free_flow_time = 1.0;
    net.edges.push_back(e);
  }
  return net;
}

}  // namespace

TEST_CASE("closure count range uses ceiling and floor") {
  CHECK(closure_count_range(258, 0.05, 0.30) == std::pair<std::int64_t, std::int64_t>{13, 77});
  CHECK(closure_count_range(60, 0.05, 0.05) == std::pair<std::int64_t, std::int64_t>{3, 3});
  CHECK(closure_count_range(10, 0.0, 0.0) == std::pair<std::int64_t, std::int64_t>{0, 0});
}

TEST_CASE("sampled closures respect the count range and keep demand connected") {
  const RoadNetwork net = synthetic_grid_network(4, 5, 30, 5);
  const ODMatrix od = synthetic_base_od(net, 40.0, 5);
  const auto [lo, hi] = closure_count_range(net.edge_count(), 0.05, 0.30);
  for (int t = 0; t < 25; ++t) {
    auto rng = make_rng(17, {static_cast<std::uint64_t>(t)});
    const ClosureTask task = sample_closure(net, od, 0.05, 0.30, rng, t);
    const auto closed = static_cast<std::int64_t>(task.closed_count());
    CHECK(closed >= lo);
    CHECK(closed <= hi);
    CHECK(demand_connected(net, task.present, od));
    CHECK(task.task_id == t);
  }
}

TEST_CASE("empty closure range leaves every edge open") {
  const RoadNetwork net = synthetic_grid_network(3, 3, 12, 1);
  const ODMatrix od = synthetic_base_od(net, 40.0, 1);
  std::mt19937_64 rng(3);
  const ClosureTask task = sample_closure(net, od, 0.0, 0.0, rng);
  CHECK(task.closed_count() == 0);
  CHECK(task.present == all_open(net));
}

TEST_CASE("closure sampling is deterministic for a seed") {
  const RoadNetwork net = synthetic_grid_network(3, 4, 16, 2);
  const ODMatrix od = synthetic_base_od(net, 40.0, 2);
  std::mt19937_64 a(42), b(42);
  CHECK(sample_closure(net, od, 0.1, 0.3, a) == sample_closure(net, od, 0.1, 0.3, b));
}

TEST_CASE("closure sampling gives up with a generation error") {
  // Every edge of a line is a bridge, so any closure cuts the demand.
  const RoadNetwork net = line_network(3);
  ODMatrix od(0, 3);
  od.at(0, 2) = 10.0;
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(sample_closure(net, od, 0.5, 0.5, rng, 0, 20), GenerationError);
}

TEST_CASE("perturbed entries are clamped to the stated change band") {
  CHECK(perturbed_entry(100.0, 0.70, 0.15, 0.70) == doctest::Approx(170.0));
  CHECK(perturbed_entry(100.0, -0.70, 0.15, 0.70) == doctest::Approx(30.0));
  CHECK(perturbed_entry(100.0, 1.5, 0.15, 0.70) == doctest::Approx(170.0));
  CHECK(perturbed_entry(100.0, -0.01, 0.15, 0.70) == doctest::Approx(85.0));
  CHECK(perturbed_entry(100.0, 0.01, 0.15, 0.70) == doctest::Approx(115.0));
  CHECK(perturbed_entry(0.0, 0.5, 0.15, 0.70) == 0.0);
}

TEST_CASE("zero perturbation band returns the base matrix") {
  const RoadNetwork net = synthetic_grid_network(3, 3, 12, 4);
  const ODMatrix base = synthetic_base_od(net, 50.0, 4);
  OdPerturbation p;
  p.factor_low = 0.0;
  p.factor_high = 0.0;
  std::mt19937_64 rng(8);
  const ODMatrix out = perturb_od(base, net, p, rng, base.od_id);
  CHECK(out == base);
}

TEST_CASE("perturbation keeps the diagonal at zero and changes within the band") {
  const RoadNetwork net = synthetic_grid_network(3, 3, 12, 4);
  ODMatrix base(0, net.n_zones);
  for (int o = 0; o < base.n_zones; ++o)
    for (int d = 0; d < base.n_zones; ++d)
      if (o != d) base.at(o, d) = 100.0;
  std::mt19937_64 rng(9);
  const ODMatrix out = perturb_od(base, net, OdPerturbation{}, rng, 7);
  CHECK(out.od_id == 7);
  for (int o = 0; o < base.n_zones; ++o) {
    CHECK(out.at(o, o) == 0.0);
    for (int d = 0; d < base.n_zones; ++d) {
      if (o == d) continue;
      const double change = std::abs(out.at(o, d) - 100.0) / 100.0;
      CHECK(change >= 0.15 - 1e-12);
      CHECK(change <= 0.70 + 1e-12);
    }
  }
}

TEST_CASE("relative changes are symmetric about zero") {
  const RoadNetwork net = line_network(4);
  ODMatrix base(0, 4);
  base.at(0, 3) = 100.0;
  double total = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto rng = make_rng(2024, {static_cast<std::uint64_t>(i)});
    const ODMatrix out = perturb_od(base, net, OdPerturbation{}, rng);
    total += (out.at(0, 3) - 100.0) / 100.0;
  }
  CHECK(std::abs(total / draws) <= 0.02);
}

TEST_CASE("node features count open degrees and scale OD rows") {
  RoadNetwork net = line_network(3);
  // Node 1 gets two incoming and three outgoing open edges.
  auto add = [&](int a, int b) {
    Edge e;
    e.edge_id = static_cast<EdgeId>(net.edges.size());
    e.from_node = a;
    e.to_node = b;
    e.capacity = 900.0;
    e.free_flow_time = 1.0;
    net.edges.push_back(e);
  };
  add(2, 1);
  add(1, 0);
  add(1, 2);
  ODMatrix od(0, 3);
  od.at(1, 0) = 20.0;
  od.at(1, 2) = 40.0;
  Normalization unit;
  const Tensor x = build_node_features(net, all_open(net), od, unit);
  CHECK(x.cols() == 6);
  CHECK(x(1, 0) == 2.0);
  CHECK(x(1, 1) == 3.0);
  CHECK(x(1, 2) == 5.0);
  CHECK(x(1, 3) == 20.0);
  CHECK(x(1, 5) == 40.0);

  std::vector<bool> present = all_open(net);
  present[0] = false;
  const Tensor closed = build_node_features(net, present, od, unit);
  CHECK(closed(0, 1) == 0.0);
  CHECK(closed(1, 0) == 1.0);
  const Tensor all_degrees = build_node_features(net, present, od, unit, false);
  CHECK(all_degrees(1, 0) == 2.0);
}

TEST_CASE("an isolated node with no demand has an all-zero row") {
  const RoadNetwork net = line_network(3);
  std::vector<bool> present(net.edge_count(), false);
  const ODMatrix od(0, 3);
  const Tensor x = build_node_features(net, present, od, compute_normalization(net, od));
  for (std::size_t c = 0; c < x.cols(); ++c) CHECK(x(1, c) == 0.0);
}

TEST_CASE("edge features carry scaled capacity and the present flag") {
  const RoadNetwork net = line_network(4);
  const ODMatrix od(0, 4);
  const Normalization n = compute_normalization(net, od);
  CHECK(n.capacity_scale == 700.0);
  std::vector<bool> present = all_open(net);
  present[0] = false;
  const Tensor e = build_edge_features(net, present, n);
  CHECK(e(0, 0) == doctest::Approx(500.0 / 700.0));
  CHECK(e(0, 1) == 0.0);
  CHECK(e(2, 0) == 1.0);
  CHECK(e(2, 1) == 1.0);
}

TEST_CASE("a degenerate corpus reproduces the base equilibrium") {
  const RoadNetwork net = synthetic_grid_network(3, 3, 12, 6);
  const ODMatrix base = synthetic_base_od(net, 60.0, 6);
  GenerationConfig g;
  g.n_tasks = 1;
  g.n_ods = 1;
  g.n_test_tasks = 0;
  g.n_test_ods = 0;
  g.closure_low = 0.0;
  g.closure_high = 0.0;
  g.od_perturbation.factor_low = 0.0;
  g.od_perturbation.factor_high = 0.0;
  const Dataset d = generate_dataset(net, base, g);
  REQUIRE(d.samples.size() == 1);
  const AssignmentResult ref = solve_ue(net, all_open(net), base, g.solver);
  CHECK(d.record(0, 0).flows == ref.flows);
}

TEST_CASE("generated corpus has the requested shape and split") {
  const Dataset& d = testing::small_dataset();
  CHECK(d.samples.size() == 80);
  CHECK(d.split.test_task_ids.size() == 2);
  CHECK(d.split.test_od_ids.size() == 4);
  CHECK(d.split.train_task_ids.size() == 6);
  for (const auto& [key, rec] : d.samples) {
    CHECK(rec.converged);
    for (std::size_t e = 0; e < rec.flows.size(); ++e) {
      if (!d.task(key.first).present[e]) CHECK(rec.flows[e] == 0.0);
    }
  }
  const Sample s = make_sample(d, 0, 0);
  const auto t = s.normalized_targets();
  for (std::size_t e = 0; e < t.size(); ++e) CHECK(t[e] == d.record(0, 0).flows[e] / d.normalization.flow_scale);
}

TEST_CASE("generation is byte-identical across runs and worker counts") {
  const RoadNetwork net = synthetic_grid_network(3, 3, 11, 21);
  const ODMatrix base = synthetic_base_od(net, 40.0, 21);
  GenerationConfig g;
  g.n_tasks = 4;
  g.n_ods = 5;
  g.n_test_tasks = 1;
  g.n_test_ods = 2;
  g.seed = 7;
  const std::string one = serialize_dataset(generate_dataset(net, base, g));
  CHECK(one == serialize_dataset(generate_dataset(net, base, g)));
  g.workers = 3;
  std::size_t calls = 0;
  const Dataset parallel = generate_dataset(net, base, g, [&](std::size_t done, std::size_t total) {
    ++calls;
    CHECK(done <= total);
  });
  CHECK(calls == 20);
  CHECK(serialize_dataset(parallel) == one);
  g.seed = 8;
  CHECK(serialize_dataset(generate_dataset(net, base, g)) != one);
}

TEST_CASE("generation configuration is validated") {
  GenerationConfig g;
  CHECK_NOTHROW(g.validate());
  g.closure_high = 1.0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = GenerationConfig{};
  g.n_test_ods = g.n_ods;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = GenerationConfig{};
  g.test_task_ids = {1, 2};
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.test_task_ids = {47, 248, 293};
  CHECK_NOTHROW(g.validate());
}

TEST_CASE("explicit held-out task ids are honoured") {
  const RoadNetwork net = synthetic_grid_network(3, 3, 11, 21);
  const ODMatrix base = synthetic_base_od(net, 40.0, 21);
  GenerationConfig g;
  g.n_tasks = 5;
  g.n_ods = 3;
  g.n_test_tasks = 2;
  g.n_test_ods = 1;
  g.test_task_ids = {4, 1};
  const Dataset d = generate_dataset(net, base, g);
  CHECK(d.split.test_task_ids == std::vector<std::int32_t>{1, 4});
  CHECK(d.split.train_task_ids == std::vector<std::int32_t>{0, 2, 3});
}
