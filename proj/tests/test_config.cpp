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

#include "doctest.h"
#include "helpers.hpp"
#include "metassign/config.hpp"
#include "metassign/errors.hpp"
#include "acceptance.hpp"

using namespace metassign;

TEST_CASE("defaults follow the published hyperparameters") {
  const RunConfig c = parse_run_config("{}");
  CHECK(c.generation.n_tasks == 336);
  CHECK(c.generation.n_ods == 74);
  CHECK(c.generation.n_tasks * c.generation.n_ods == 24864);
  CHECK(c.generation.n_test_tasks * c.generation.n_test_ods == 75);
  CHECK(c.generation.closure_low == 0.05);
  CHECK(c.generation.closure_high == 0.30);
  CHECK(c.generation.od_perturbation.factor_low == 0.15);
  CHECK(c.generation.od_perturbation.factor_high == 0.70);
  CHECK(c.model.hyper.hidden == 192);
  CHECK(c.model.hyper.layers == 6);
  CHECK(c.model.hyper.dropout == 0.01);
  CHECK(c.meta.alpha == 0.02);
  CHECK(c.meta.beta == 0.055);
  CHECK(c.meta.K == 4);
  CHECK(c.meta.M == 25);
  CHECK(c.meta.task_batch == 7);
  CHECK(c.meta.meta_iterations == 1500);
  CHECK(c.generation.solver.gap_tolerance == 1e-4);
  CHECK(c.generation.solver.max_iterations == 500);
}

TEST_CASE("config parsing accepts comments and rejects unknown keys") {
  const RunConfig c = parse_run_config(R"({
    // a comment
    "meta": {"K": 3, "outer_optimizer": "adam"},
    "generation": {"closure_fraction": [0.1, 0.2], "solver": {"method": "fw"}}
  })");
  CHECK(c.meta.K == 3);
  CHECK(c.meta.outer_optimizer == OuterOptimizer::kAdam);
  CHECK(c.generation.closure_low == 0.1);
  CHECK(c.generation.solver.method == SolverMethod::kFrankWolfe);

  CHECK_THROWS_AS(parse_run_config(R"({"meta": {"gamma": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"optimizer": {}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"generation": {"solver": {"tol": 1}}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"meta": {"K": "four"}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("{ not json"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"meta": {"K": 40, "M": 40}})"), ConfigError);
}

TEST_CASE("formatting round-trips") {
  RunConfig c;
  c.meta.K = 2;
  c.generation.test_task_ids = {47, 248, 293};
  c.generation.od_perturbation.correlation_length = 3.5;
  const RunConfig back = parse_run_config(format_run_config(c));
  CHECK(format_run_config(back) == format_run_config(c));
  CHECK(back.generation.test_task_ids == c.generation.test_task_ids);
}

TEST_CASE("shipped configuration files") {
  const RunConfig defaults;
  CHECK(format_run_config(load_run_config(testing::source_path("configs/full_scale.json"))) ==
        format_run_config(defaults));
  CHECK(format_run_config(load_run_config(testing::source_path("configs/annotated.json"))) ==
        format_run_config(defaults));
  CHECK(format_run_config(load_run_config(testing::source_path("configs/desk.json"))) ==
        format_run_config(acceptance::desk_scale_config()));
  const RunConfig smoke = load_run_config(testing::source_path("configs/smoke.json"));
  CHECK(smoke.synthetic.rows * smoke.synthetic.cols == 10);
  CHECK(smoke.generation.n_tasks == 8);
  CHECK(smoke.generation.n_ods == 10);
  CHECK(smoke.meta.meta_iterations == 50);
  CHECK_THROWS_AS(load_run_config(testing::source_path("configs/missing.json")), IoError);
}
