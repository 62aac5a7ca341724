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

#include "metassign/config.hpp"

#include <set>

#include "json.hpp"
#include "metassign/errors.hpp"

namespace metassign {
namespace {

using nlohmann::json;

// Reads known keys from one section and rejects anything else.
class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (root.contains(name)) {
      node_ = root.at(name);
      if (!node_.is_object()) throw ConfigError("section '" + name + "' must be an object");
    } else {
      node_ = json::object();
    }
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    try {
      target = node_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
    }
  }

  const json& node() const { return node_; }

 private:
  std::string name_;
  json node_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
  generation.validate();
  meta.validate();
  const int train_ods = generation.n_ods - generation.n_test_ods;
  if (meta.K + meta.M > train_ods) {
    throw ConfigError("K + M = " + std::to_string(meta.K + meta.M) + " exceeds the " + std::to_string(train_ods) +
                      " training ODs per task");
  }
  if (meta.task_batch > generation.n_tasks - generation.n_test_tasks) {
    throw ConfigError("task_batch exceeds the number of training tasks");
  }
  if (generation.n_test_ods > 0 && meta.K >= generation.n_test_ods) {
    throw ConfigError("meta-test needs K below the number of held-out ODs");
  }
  if (model.hyper.hidden <= 0) throw ConfigError("model.hidden must be positive");
  if (model.hyper.layers < 0) throw ConfigError("model.layers must be non-negative");
}

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  for (const auto& [key, value] : root.items()) {
    if (key != "generation" && key != "model" && key != "meta" && key != "synthetic" && key != "comment") {
      throw ConfigError("unknown section '" + key + "'");
    }
  }

  RunConfig c;
  {
    Section s(root, "generation");
    GenerationConfig& g = c.generation;
    s.read("n_tasks", g.n_tasks);
    s.read("n_ods", g.n_ods);
    std::vector<double> fraction{g.closure_low, g.closure_high};
    s.read("closure_fraction", fraction);
    if (fraction.size() != 2) throw ConfigError("generation.closure_fraction must be [low, high]");
    g.closure_low = fraction[0];
    g.closure_high = fraction[1];
    s.read("seed", g.seed);
    s.read("n_test_tasks", g.n_test_tasks);
    s.read("n_test_ods", g.n_test_ods);
    s.read("test_task_ids", g.test_task_ids);
    s.read("closure_retries", g.closure_retries);
    s.read("degrees_on_open_subgraph", g.degrees_on_open_subgraph);
    s.read("workers", g.workers);
    json od = json::object(), solver = json::object();
    s.read("od_perturbation", od);
    s.read("solver", solver);
    s.finish();

    const json wrapped_od = {{"od_perturbation", od}};
    Section p(wrapped_od, "od_perturbation");
    p.read("factor_low", g.od_perturbation.factor_low);
    p.read("factor_high", g.od_perturbation.factor_high);
    p.read("correlation_length", g.od_perturbation.correlation_length);
    p.finish();

    const json wrapped_solver = {{"solver", solver}};
    Section v(wrapped_solver, "solver");
    std::string method = to_string(g.solver.method);
    v.read("method", method);
    g.solver.method = parse_solver_method(method);
    v.read("gap_tolerance", g.solver.gap_tolerance);
    v.read("max_iterations", g.solver.max_iterations);
    v.read("line_search_tolerance", g.solver.line_search_tolerance);
    v.finish();
  }
  {
    Section s(root, "model");
    GnnHyper& h = c.model.hyper;
    s.read("hidden", h.hidden);
    s.read("layers", h.layers);
    s.read("dropout", h.dropout);
    s.read("epsilon", h.epsilon);
    s.read("relu_after_update", h.relu_after_update);
    s.read("update_edges", h.update_edges);
    s.read("residual", h.residual);
    s.read("mask_output", h.mask_output);
    s.read("init_seed", c.model.init_seed);
    s.finish();
  }
  {
    Section s(root, "meta");
    MetaConfig& m = c.meta;
    s.read("alpha", m.alpha);
    s.read("beta", m.beta);
    s.read("K", m.K);
    s.read("M", m.M);
    s.read("inner_steps", m.inner_steps);
    s.read("task_batch", m.task_batch);
    s.read("meta_iterations", m.meta_iterations);
    std::string mode = to_string(m.meta_grad_mode), outer = to_string(m.outer_optimizer);
    s.read("meta_grad_mode", mode);
    s.read("outer_optimizer", outer);
    m.meta_grad_mode = parse_meta_grad_mode(mode);
    m.outer_optimizer = parse_outer_optimizer(outer);
    s.read("clip_norm", m.clip_norm);
    s.read("fd_step", m.fd_step);
    s.read("seed", m.seed);
    s.read("threads", m.threads);
    s.read("record_wall_time", m.record_wall_time);
    s.finish();
  }
  {
    Section s(root, "synthetic");
    s.read("rows", c.synthetic.rows);
    s.read("cols", c.synthetic.cols);
    s.read("links", c.synthetic.links);
    s.read("mean_trips", c.synthetic.mean_trips);
    s.read("seed", c.synthetic.seed);
    s.finish();
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_text_file(path)); }

std::string format_run_config(const RunConfig& c) {
  nlohmann::ordered_json j;
  const GenerationConfig& g = c.generation;
  j["generation"] = {
      {"n_tasks", g.n_tasks},
      {"n_ods", g.n_ods},
      {"closure_fraction", {g.closure_low, g.closure_high}},
      {"od_perturbation",
       {{"factor_low", g.od_perturbation.factor_low},
        {"factor_high", g.od_perturbation.factor_high},
        {"correlation_length", g.od_perturbation.correlation_length}}},
      {"seed", g.seed},
      {"n_test_tasks", g.n_test_tasks},
      {"n_test_ods", g.n_test_ods},
      {"test_task_ids", g.test_task_ids},
      {"closure_retries", g.closure_retries},
      {"degrees_on_open_subgraph", g.degrees_on_open_subgraph},
      {"workers", g.workers},
      {"solver",
       {{"method", to_string(g.solver.method)},
        {"gap_tolerance", g.solver.gap_tolerance},
        {"max_iterations", g.solver.max_iterations},
        {"line_search_tolerance", g.solver.line_search_tolerance}}},
  };
  const GnnHyper& h = c.model.hyper;
  j["model"] = {{"hidden", h.hidden},
                {"layers", h.layers},
                {"dropout", h.dropout},
                {"epsilon", h.epsilon},
                {"relu_after_update", h.relu_after_update},
                {"update_edges", h.update_edges},
                {"residual", h.residual},
                {"mask_output", h.mask_output},
                {"init_seed", c.model.init_seed}};
  const MetaConfig& m = c.meta;
  j["meta"] = {{"alpha", m.alpha},
               {"beta", m.beta},
               {"K", m.K},
               {"M", m.M},
               {"inner_steps", m.inner_steps},
               {"task_batch", m.task_batch},
               {"meta_iterations", m.meta_iterations},
               {"meta_grad_mode", to_string(m.meta_grad_mode)},
               {"outer_optimizer", to_string(m.outer_optimizer)},
               {"clip_norm", m.clip_norm},
               {"fd_step", m.fd_step},
               {"seed", m.seed},
               {"threads", m.threads},
               {"record_wall_time", m.record_wall_time}};
  j["synthetic"] = {{"rows", c.synthetic.rows},
                    {"cols", c.synthetic.cols},
                    {"links", c.synthetic.links},
                    {"mean_trips", c.synthetic.mean_trips},
                    {"seed", c.synthetic.seed}};
  return j.dump(2) + "\n";
}

}  // namespace metassign
