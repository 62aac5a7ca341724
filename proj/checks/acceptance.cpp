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

#include "acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <numeric>
#include <thread>
#include <sstream>

#include "metassign/assign.hpp"
#include "metassign/errors.hpp"
#include "metassign/evaluate.hpp"
#include "metassign/gnn.hpp"
#include "metassign/meta.hpp"
#include "metassign/rng.hpp"
#include "metassign/scenario.hpp"
#include "metassign/tensor.hpp"
#include "oracles.hpp"

namespace metassign::acceptance {
namespace {

// Byte sink for artifacts; doubles are stored bit for bit.
class Artifact {
 public:
  void add(double v) {
    char b[sizeof v];
    std::memcpy(b, &v, sizeof v);
    bytes_.append(b, sizeof v);
  }
  void add(std::span<const double> vs) {
    for (double v : vs) add(v);
  }
  void add(const std::string& s) { bytes_ += s; }
  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

template <typename Body>
CriterionResult timed(int id, const std::string& name, double limit, Body&& body) {
  CriterionResult r;
  r.id = id;
  r.name = name;
  r.time_limit_s = limit;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!r.skipped && limit > 0.0 && r.seconds > limit) {
    r.passed = false;
    r.detail += " [over time limit]";
  }
  return r;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

double max_relative_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), 1.0));
  }
  return worst;
}

double conservation_residual(const RoadNetwork& net, const ODMatrix& od, std::span<const double> flows) {
  std::vector<double> balance(net.node_count(), 0.0);
  for (const Edge& e : net.edges) {
    balance[e.to_node] += flows[e.edge_id];
    balance[e.from_node] -= flows[e.edge_id];
  }
  for (int o = 0; o < od.n_zones; ++o) {
    for (int d = 0; d < od.n_zones; ++d) {
      balance[o] += od.at(o, d);
      balance[d] -= od.at(o, d);
    }
  }
  double worst = 0.0;
  for (double b : balance) worst = std::max(worst, std::abs(b));
  return worst;
}

// ---------------------------------------------------------------------------
// Solver instances shared by the first two criteria.

struct Instance {
  std::string name;
  RoadNetwork network;
  std::vector<bool> present;
  ODMatrix od;
};

std::vector<Instance> toy_instances() {
  std::vector<Instance> out;
  {
    RoadNetwork net = oracle::two_link_network();
    out.push_back({"two-link", net, all_open(net), oracle::single_pair_od(2, 0, 1, 3.0)});
  }
  {
    RoadNetwork net = oracle::braess_network();
    std::vector<bool> present = all_open(net);
    out.push_back({"braess", net, present, oracle::single_pair_od(4, 0, 3, 200.0)});
    present[4] = false;
    out.push_back({"braess-masked", net, present, oracle::single_pair_od(4, 0, 3, 200.0)});
  }
  {
    RoadNetwork net = synthetic_grid_network(3, 3, 12, 3);
    ODMatrix od = synthetic_base_od(net, 150.0, 4);
    out.push_back({"grid-3x3", net, all_open(net), od});
    auto rng = make_rng(9);
    ClosureTask closure = sample_closure(net, od, 0.1, 0.2, rng);
    out.push_back({"grid-3x3-closed", net, closure.present, od});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Autodiff helpers.

ParamList random_tensors(std::initializer_list<std::pair<std::size_t, std::size_t>> shapes, std::uint64_t seed,
                         double min_magnitude = 0.2) {
  auto rng = make_rng(seed);
  ParamList out;
  for (auto [r, c] : shapes) {
    Tensor t(r, c);
    for (double& v : t.values()) {
      const double mag = min_magnitude + (1.0 - min_magnitude) * uniform01(rng);
      v = uniform01(rng) < 0.5 ? -mag : mag;
    }
    out.push_back(std::move(t));
  }
  return out;
}

// Scalar projection with fixed pseudo-random weights, so every output entry
// contributes a distinct gradient.
Var project(Var y) {
  Tensor w(y.rows(), y.cols());
  auto rng = make_rng(0x70726f6a, {y.rows(), y.cols()});
  for (double& v : w.values()) v = 2.0 * uniform01(rng) - 1.0;
  return sum(hadamard(y, y.tape().constant(std::move(w))));
}

using TapeFn = std::function<Var(Tape&, std::span<const Var>)>;

double gradient_error(const TapeFn& fn, const ParamList& inputs, double h = 1e-6) {
  std::vector<double> analytic;
  {
    Tape tape;
    const auto vars = tape.variables(inputs);
    const Var loss = fn(tape, vars);
    for (const Tensor& g : tape.gradients(loss, vars)) analytic.insert(analytic.end(), g.values().begin(), g.values().end());
  }
  auto f = [&](const std::vector<double>& x) {
    ParamList p = inputs;
    unflatten(x, p);
    Tape tape;
    const auto vars = tape.variables(p);
    return fn(tape, vars).value().item();
  };
  const std::vector<double> numeric = oracle::finite_difference_gradient(f, flatten(inputs), h);
  double diff = 0.0, scale_a = 0.0, scale_n = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale_a = std::max(scale_a, std::abs(analytic[i]));
    scale_n = std::max(scale_n, std::abs(numeric[i]));
  }
  const double s = std::max(scale_a, scale_n);
  return s < 1e-12 ? diff : diff / s;
}

// ---------------------------------------------------------------------------
// Random graphs for the gnn properties.

GraphBatch random_graph(std::mt19937_64& rng, int& n_nodes_out) {
  const int n = static_cast<int>(uniform_int(rng, 3, 9));
  const int m = static_cast<int>(uniform_int(rng, n, 3 * n));
  GraphBatch g;
  g.node_features = Tensor(n, 3 + n);
  for (double& v : g.node_features.values()) v = uniform01(rng);
  g.edge_features = Tensor(m, 2);
  for (int e = 0; e < m; ++e) {
    const int o = static_cast<int>(uniform_int(rng, 0, n - 1));
    int d = static_cast<int>(uniform_int(rng, 0, n - 2));
    if (d >= o) ++d;
    g.origin.push_back(o);
    g.dest.push_back(d);
    const bool open = uniform01(rng) < 0.7;
    g.present.push_back(open);
    g.edge_features(e, 0) = uniform01(rng);
    g.edge_features(e, 1) = open ? 1.0 : 0.0;
  }
  g.targets = Tensor(m, 1);
  n_nodes_out = n;
  return g;
}

// Edge order that is random overall but keeps the relative order of edges
// sharing a destination, so per-node sums accumulate in the same order.
std::vector<std::size_t> destination_stable_shuffle(const std::vector<std::int32_t>& new_dest, std::mt19937_64& rng) {
  const std::size_t m = new_dest.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = m; i > 1; --i) std::swap(order[i - 1], order[uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1)]);
  std::map<std::int32_t, std::vector<std::size_t>> slots, members;
  for (std::size_t j = 0; j < m; ++j) slots[new_dest[order[j]]].push_back(j);
  for (std::size_t e = 0; e < m; ++e) members[new_dest[e]].push_back(e);
  std::vector<std::size_t> sigma(m);
  for (auto& [d, pos] : slots) {
    const auto& mem = members[d];
    for (std::size_t k = 0; k < pos.size(); ++k) sigma[pos[k]] = mem[k];
  }
  return sigma;
}

// ---------------------------------------------------------------------------
// Toy objectives for the meta-learning checks.

struct RegressionTask {
  Tensor x;  // observations x 4
  Tensor y;  // observations x 1
};

Var regression_model(Tape& tape, std::span<const Var> w, const RegressionTask& task,
                     std::span<const std::int32_t> rows) {
  const Var x = gather_rows(tape.constant(task.x), rows);
  const Var y = gather_rows(tape.constant(task.y), rows);
  const Var hidden = sigmoid(add_bias(matmul(x, w[0]), w[1]));
  const Var pred = add_bias(matmul(hidden, w[2]), w[3]);
  const Var d = sub(pred, y);
  return mean(hadamard(d, d));
}

TaskObjective regression_objective(const RegressionTask& task) {
  return [&task](const ParamList& theta, std::span<const std::int32_t> obs, std::uint64_t, ParamList* grad) {
    Tape tape;
    const auto vars = tape.variables(theta);
    const Var loss = regression_model(tape, vars, task, obs);
    if (grad) *grad = tape.gradients(loss, vars);
    return loss.value().item();
  };
}

TaskObjective quadratic_objective(double target) {
  return [target](const ParamList& theta, std::span<const std::int32_t>, std::uint64_t, ParamList* grad) {
    const double w = theta[0](0, 0);
    if (grad) *grad = ParamList{Tensor(1, 1, 2.0 * (w - target))};
    return (w - target) * (w - target);
  };
}

// ---------------------------------------------------------------------------
// End-to-end pipeline shared by the desk-scale and full-scale criteria.

struct PipelineOutput {
  Dataset dataset;
  MetaTrainResult trained;
  GatedGCNParams init;
  MetaTestReport meta_report;
  MetaTestReport random_report;
};

PipelineOutput run_pipeline(const RoadNetwork& network, const ODMatrix& base_od, const RunConfig& config,
                            const std::string& artifact_dir, Artifact& artifact) {
  PipelineOutput out;
  out.dataset = generate_dataset(network, base_od, config.generation);
  GnnHyper hyper = config.model.hyper;
  hyper.node_features = 3 + network.n_zones;
  out.init = init_params(config.model.init_seed, hyper);
  out.trained = meta_train(out.dataset, out.init, config.meta);
  out.meta_report = meta_test(out.trained.best, out.dataset, config.meta);
  out.random_report = meta_test(out.init, out.dataset, config.meta);

  const std::string dataset_bytes = serialize_dataset(out.dataset);
  const std::string checkpoint_bytes = serialize_params(out.trained.best);
  const std::string history_csv = format_history_csv(out.trained.history);
  const std::string report_json = report_to_json(out.meta_report);
  artifact.add(dataset_bytes);
  artifact.add(checkpoint_bytes);
  if (!config.meta.record_wall_time) artifact.add(history_csv);
  artifact.add(report_json);
  artifact.add(report_to_json(out.random_report));
  if (!artifact_dir.empty()) {
    std::filesystem::create_directories(artifact_dir);
    write_text_file(artifact_dir + "/dataset.bin", dataset_bytes);
    write_text_file(artifact_dir + "/checkpoint.bin", checkpoint_bytes);
    write_text_file(artifact_dir + "/report.json", report_json);
    write_text_file(artifact_dir + "/random_init_report.json", report_to_json(out.random_report));
    write_report(out.meta_report, out.trained.history, artifact_dir + "/report");
  }
  return out;
}

std::string per_task_summary(const PipelineOutput& p) {
  std::ostringstream s;
  for (std::size_t i = 0; i < p.meta_report.per_task.size(); ++i) {
    const TaskEvaluation& m = p.meta_report.per_task[i];
    const TaskEvaluation& r = p.random_report.per_task[i];
    s << " task " << m.task_id << ": R2=" << fmt(m.r_squared) << " query " << fmt(m.query_loss) << " vs random "
      << fmt(r.query_loss) << ";";
  }
  return s.str();
}

}  // namespace

// ---------------------------------------------------------------------------

CriterionResult check_equilibrium_oracle() {
  return timed(1, "equilibrium oracle", 1.0, [](CriterionResult& r) {
    Artifact art;
    SolverOptions opts;
    opts.gap_tolerance = 1e-10;
    opts.max_iterations = 20000;

    const auto instances = toy_instances();
    const Instance& two = instances[0];
    const auto [x1, x2] = oracle::two_link_linear(1.0, 1.0, 2.0, 1.0, 3.0);
    const AssignmentResult a = solve_ue(two.network, two.present, two.od, opts);
    const double two_err = std::max(std::abs(a.flows[0] - x1), std::abs(a.flows[1] - x2));
    art.add(a.flows);

    double braess_err = 0.0;
    for (std::size_t i = 1; i <= 2; ++i) {
      const Instance& inst = instances[i];
      const std::vector<double> reference = oracle::path_enumeration_ue(inst.network, inst.present, inst.od);
      const AssignmentResult b = solve_ue(inst.network, inst.present, inst.od, opts);
      braess_err = std::max(braess_err, max_relative_diff(b.flows, reference));
      art.add(b.flows);
    }
    r.passed = two_err <= 1e-3 && braess_err <= 1e-3;
    r.detail = "two-link flows (" + fmt(a.flows[0]) + ", " + fmt(a.flows[1]) + ") abs err " + fmt(two_err) +
               "; braess max rel err " + fmt(braess_err);
    r.artifact = art.take();
  });
}

CriterionResult check_solver_soundness() {
  return timed(2, "solver soundness", 10.0, [](CriterionResult& r) {
    Artifact art;
    double worst_conservation = 0.0, worst_gap = 0.0, worst_rise = 0.0, worst_agreement = 0.0, masked_flow = 0.0;
    bool all_converged = true;
    const SolverMethod methods[] = {SolverMethod::kFrankWolfe, SolverMethod::kConjugate, SolverMethod::kBiconjugate};
    for (const Instance& inst : toy_instances()) {
      const double total = inst.od.total();
      std::vector<std::vector<double>> tight;
      for (SolverMethod m : methods) {
        SolverOptions opts;
        opts.method = m;
        // Soundness, not speed, is under test: plain FW may need more than the
        // default 500 iterations on the congested closure instance.
        opts.max_iterations = 5000;
        const AssignmentResult res = solve_ue(inst.network, inst.present, inst.od, opts);
        all_converged = all_converged && res.converged;
        worst_gap = std::max(worst_gap, res.relative_gap);
        worst_conservation = std::max(worst_conservation, conservation_residual(inst.network, inst.od, res.flows) / total);
        for (std::size_t k = 1; k < res.objective_history.size(); ++k) {
          const double prev = res.objective_history[k - 1];
          worst_rise = std::max(worst_rise, (res.objective_history[k] - prev) / std::max(std::abs(prev), 1.0));
        }
        for (std::size_t e = 0; e < res.flows.size(); ++e) {
          if (!inst.present[e]) masked_flow = std::max(masked_flow, std::abs(res.flows[e]));
        }
        art.add(res.flows);

        opts.gap_tolerance = 1e-8;
        opts.max_iterations = 20000;
        tight.push_back(solve_ue(inst.network, inst.present, inst.od, opts).flows);
      }
      for (std::size_t k = 0; k + 1 < tight.size(); ++k) {
        worst_agreement = std::max(worst_agreement, max_relative_diff(tight[k], tight.back()));
      }
    }
    r.passed = all_converged && worst_gap <= 1e-4 && worst_conservation <= 1e-6 && worst_rise <= 1e-12 &&
               worst_agreement <= 1e-3 && masked_flow == 0.0;
    r.detail = std::string("converged=") + (all_converged ? "yes" : "no") + " max gap " + fmt(worst_gap) +
               ", conservation/total " + fmt(worst_conservation) + ", objective rise " + fmt(worst_rise) +
               ", method disagreement " + fmt(worst_agreement) + ", masked flow " + fmt(masked_flow);
    r.artifact = art.take();
  });
}

CriterionResult check_autodiff() {
  return timed(3, "autodiff gradient checks", 30.0, [](CriterionResult& r) {
    struct Case {
      std::string name;
      ParamList inputs;
      TapeFn fn;
    };
    std::vector<Case> cases;
    const std::vector<std::int32_t> gather_index{2, 0, 2, 1};
    const std::vector<std::int32_t> segment_index{0, 2, 2, 1, 0};
    const std::vector<bool> keep{true, false, true};

    cases.push_back({"matmul", random_tensors({{3, 4}, {4, 2}}, 1), [](Tape&, auto v) { return project(matmul(v[0], v[1])); }});
    cases.push_back({"add", random_tensors({{3, 2}, {3, 2}}, 2), [](Tape&, auto v) { return project(add(v[0], v[1])); }});
    cases.push_back({"add_bias", random_tensors({{3, 2}, {1, 2}}, 3), [](Tape&, auto v) { return project(add_bias(v[0], v[1])); }});
    cases.push_back({"sub", random_tensors({{3, 2}, {3, 2}}, 4), [](Tape&, auto v) { return project(sub(v[0], v[1])); }});
    cases.push_back({"scale", random_tensors({{3, 2}}, 5), [](Tape&, auto v) { return project(scale(v[0], 2.5)); }});
    cases.push_back({"add_scalar", random_tensors({{3, 2}}, 6), [](Tape&, auto v) { return project(add_scalar(v[0], 0.7)); }});
    cases.push_back({"hadamard", random_tensors({{3, 2}, {3, 2}}, 7), [](Tape&, auto v) { return project(hadamard(v[0], v[1])); }});
    cases.push_back({"divide", random_tensors({{3, 2}, {3, 2}}, 8), [](Tape&, auto v) {
                       // Denominator kept in [1.2, 2.0].
                       return project(divide(v[0], add_scalar(hadamard(v[1], v[1]), 1.16)));
                     }});
    cases.push_back({"sigmoid", random_tensors({{3, 3}}, 9), [](Tape&, auto v) { return project(sigmoid(v[0])); }});
    cases.push_back({"relu", random_tensors({{3, 3}}, 10), [](Tape&, auto v) { return project(relu(v[0])); }});
    cases.push_back({"dropout", random_tensors({{4, 3}}, 11), [](Tape&, auto v) {
                       auto rng = make_rng(12);
                       return project(dropout(v[0], 0.3, rng, true));
                     }});
    cases.push_back({"concat-rows", random_tensors({{2, 3}, {1, 3}}, 13), [](Tape&, auto v) { return project(concat(v, 0)); }});
    cases.push_back({"concat-cols", random_tensors({{2, 3}, {2, 1}}, 14), [](Tape&, auto v) { return project(concat(v, 1)); }});
    cases.push_back({"slice-rows", random_tensors({{4, 3}}, 15), [](Tape&, auto v) { return project(slice(v[0], 0, 1, 3)); }});
    cases.push_back({"slice-cols", random_tensors({{4, 3}}, 16), [](Tape&, auto v) { return project(slice(v[0], 1, 1, 2)); }});
    cases.push_back({"sum", random_tensors({{3, 2}}, 17), [](Tape&, auto v) { return scale(sum(v[0]), 1.3); }});
    cases.push_back({"mean", random_tensors({{3, 2}}, 18), [](Tape&, auto v) { return scale(mean(v[0]), 1.3); }});
    cases.push_back({"gather_rows", random_tensors({{3, 2}}, 19),
                     [&gather_index](Tape&, auto v) { return project(gather_rows(v[0], gather_index)); }});
    cases.push_back({"segment_sum", random_tensors({{5, 2}}, 20),
                     [&segment_index](Tape&, auto v) { return project(segment_sum(v[0], segment_index, 4)); }});
    cases.push_back({"mask_rows", random_tensors({{3, 2}}, 21), [&keep](Tape&, auto v) { return project(mask_rows(v[0], keep)); }});
    {
      // Differences on both sides of the delta = 1 switch, away from the kink.
      ParamList in = random_tensors({{6, 1}}, 22);
      Tensor target = in[0];
      const double offsets[] = {0.3, -0.5, 1.6, -2.1, 0.05, 1.4};
      for (std::size_t i = 0; i < 6; ++i) target(i, 0) += offsets[i];
      in.push_back(target);
      cases.push_back({"smooth_l1", in, [](Tape&, auto v) { return smooth_l1(v[0], v[1]); }});
    }

    std::ostringstream detail;
    double worst = 0.0;
    std::string worst_name;
    Artifact art;
    for (const Case& c : cases) {
      const double err = gradient_error(c.fn, c.inputs);
      art.add(err);
      if (err > worst) {
        worst = err;
        worst_name = c.name;
      }
    }

    // Full gatedGCN loss on a 5-node, 8-edge graph with two closed edges,
    // in training mode with a fixed dropout stream.
    GraphBatch g;
    auto rng = make_rng(23);
    g.node_features = Tensor(5, 8);
    for (double& v : g.node_features.values()) v = uniform01(rng);
    g.origin = {0, 1, 2, 3, 4, 0, 2, 3};
    g.dest = {1, 2, 3, 4, 0, 2, 4, 1};
    g.present = {true, true, false, true, true, true, false, true};
    g.edge_features = Tensor(8, 2);
    g.targets = Tensor(8, 1);
    for (int e = 0; e < 8; ++e) {
      g.edge_features(e, 0) = uniform01(rng);
      g.edge_features(e, 1) = g.present[e] ? 1.0 : 0.0;
      g.targets(e, 0) = g.present[e] ? 2.0 * uniform01(rng) : 0.0;
    }
    double gnn_worst = 0.0;
    for (int variant = 0; variant < 2; ++variant) {
      GnnHyper h;
      h.node_features = 8;
      h.hidden = 4;
      h.layers = 2;
      h.dropout = 0.1;
      h.update_edges = variant == 1;
      h.residual = variant == 1;
      const GatedGCNParams params = init_params(24 + variant, h);
      const TapeFn loss = [&g, h](Tape&, std::span<const Var> w) {
        auto drop = make_rng(25);
        return task_loss(forward(g, w, h, drop, true), w[0].tape().constant(g.targets));
      };
      const double err = gradient_error(loss, params.weights);
      art.add(err);
      gnn_worst = std::max(gnn_worst, err);
    }

    r.passed = worst < 1e-5 && gnn_worst < 1e-5;
    r.detail = std::to_string(cases.size()) + " op checks, worst " + fmt(worst) + " (" + worst_name +
               "); gatedGCN loss worst " + fmt(gnn_worst);
    r.artifact = art.take();
  });
}

CriterionResult check_gnn_properties(int graphs) {
  return timed(4, "mask severing and permutation equivariance", 30.0, [graphs](CriterionResult& r) {
    auto rng = make_rng(0x65717569);
    int masked_nonzero = 0, severing_fail = 0, removal_fail = 0, perm_fail = 0, od_perm_fail = 0;
    double od_perm_worst = 0.0;
    Artifact art;
    for (int gi = 0; gi < graphs; ++gi) {
      int n = 0;
      const GraphBatch g = random_graph(rng, n);
      GnnHyper h;
      h.node_features = 3 + n;
      h.hidden = 6;
      h.layers = 2;
      h.update_edges = gi % 3 == 1;
      h.residual = gi % 3 == 2;
      const GatedGCNParams params = init_params(1000 + gi, h);
      const std::vector<double> base = predict(params, g);
      art.add(base);
      const std::size_t m = g.edge_count();

      for (std::size_t e = 0; e < m; ++e) {
        if (!g.present[e] && base[e] != 0.0) ++masked_nonzero;
      }

      // Arbitrary features and endpoints on closed edges.
      GraphBatch altered = g;
      for (std::size_t e = 0; e < m; ++e) {
        if (g.present[e]) continue;
        altered.edge_features(e, 0) = 200.0 * uniform01(rng) - 100.0;
        altered.edge_features(e, 1) = 200.0 * uniform01(rng) - 100.0;
        altered.origin[e] = static_cast<std::int32_t>(uniform_int(rng, 0, n - 1));
        altered.dest[e] = static_cast<std::int32_t>(uniform_int(rng, 0, n - 1));
      }
      if (predict(params, altered) != base) ++severing_fail;

      // Closed edges deleted outright.
      GraphBatch removed;
      removed.node_features = g.node_features;
      std::vector<std::size_t> kept;
      for (std::size_t e = 0; e < m; ++e) {
        if (g.present[e]) kept.push_back(e);
      }
      removed.edge_features = Tensor(kept.size(), 2);
      removed.targets = Tensor(kept.size(), 1);
      for (std::size_t k = 0; k < kept.size(); ++k) {
        removed.origin.push_back(g.origin[kept[k]]);
        removed.dest.push_back(g.dest[kept[k]]);
        removed.present.push_back(true);
        removed.edge_features(k, 0) = g.edge_features(kept[k], 0);
        removed.edge_features(k, 1) = g.edge_features(kept[k], 1);
      }
      if (!kept.empty()) {
        const std::vector<double> pr = predict(params, removed);
        for (std::size_t k = 0; k < kept.size(); ++k) {
          if (pr[k] != base[kept[k]]) {
            ++removal_fail;
            break;
          }
        }
      }

      // Node relabelling with a destination-stable edge reorder.
      std::vector<std::int32_t> pi(n);
      std::iota(pi.begin(), pi.end(), 0);
      for (int i = n; i > 1; --i) std::swap(pi[i - 1], pi[uniform_int(rng, 0, i - 1)]);
      std::vector<std::int32_t> relabelled_dest(m);
      for (std::size_t e = 0; e < m; ++e) relabelled_dest[e] = pi[g.dest[e]];
      const std::vector<std::size_t> sigma = destination_stable_shuffle(relabelled_dest, rng);

      GraphBatch p;
      p.node_features = Tensor(n, 3 + n);
      for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3 + n; ++c) p.node_features(pi[i], c) = g.node_features(i, c);
      }
      p.edge_features = Tensor(m, 2);
      p.targets = Tensor(m, 1);
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t e = sigma[j];
        p.origin.push_back(pi[g.origin[e]]);
        p.dest.push_back(pi[g.dest[e]]);
        p.present.push_back(g.present[e]);
        p.edge_features(j, 0) = g.edge_features(e, 0);
        p.edge_features(j, 1) = g.edge_features(e, 1);
      }
      const std::vector<double> pp = predict(params, p);
      for (std::size_t j = 0; j < m; ++j) {
        if (pp[j] != base[sigma[j]]) {
          ++perm_fail;
          break;
        }
      }

      // Same relabelling applied to the OD columns as well; the encoder rows
      // move with them, so the result holds up to rounding.
      GraphBatch q = p;
      GatedGCNParams qparams = params;
      for (int i = 0; i < n; ++i) {
        for (int z = 0; z < n; ++z) q.node_features(pi[i], 3 + pi[z]) = g.node_features(i, 3 + z);
      }
      for (int z = 0; z < n; ++z) {
        for (std::size_t c = 0; c < params.weights[0].cols(); ++c) {
          qparams.weights[0](3 + pi[z], c) = params.weights[0](3 + z, c);
        }
      }
      const std::vector<double> qp = predict(qparams, q);
      for (std::size_t j = 0; j < m; ++j) {
        const double err = std::abs(qp[j] - base[sigma[j]]) / std::max(1.0, std::abs(base[sigma[j]]));
        od_perm_worst = std::max(od_perm_worst, err);
      }
      if (od_perm_worst > 1e-12) ++od_perm_fail;
    }
    r.passed = masked_nonzero == 0 && severing_fail == 0 && removal_fail == 0 && perm_fail == 0 && od_perm_fail == 0;
    r.detail = std::to_string(graphs) + " graphs: masked outputs nonzero " + std::to_string(masked_nonzero) +
               ", severing failures " + std::to_string(severing_fail) + ", removal failures " +
               std::to_string(removal_fail) + ", bitwise permutation failures " + std::to_string(perm_fail) +
               ", OD-column permutation worst " + fmt(od_perm_worst);
    r.artifact = art.take();
  });
}

CriterionResult check_maml() {
  return timed(5, "MAML correctness", 60.0, [](CriterionResult& r) {
    Artifact art;

    // First-order vs finite-difference meta-gradient on a 19-parameter model.
    std::vector<RegressionTask> tasks;
    for (int t = 0; t < 3; ++t) {
      auto rng = make_rng(31, {static_cast<std::uint64_t>(t)});
      RegressionTask task{Tensor(10, 4), Tensor(10, 1)};
      for (double& v : task.x.values()) v = 2.0 * uniform01(rng) - 1.0;
      for (double& v : task.y.values()) v = 2.0 * uniform01(rng) - 1.0;
      tasks.push_back(std::move(task));
    }
    const ParamList theta = random_tensors({{4, 3}, {1, 3}, {3, 1}, {1, 1}}, 32, 0.0);
    MetaConfig cfg;
    cfg.alpha = 1e-4;
    cfg.inner_steps = 1;
    cfg.task_batch = 1;
    cfg.K = 3;
    cfg.M = 5;
    double worst_rel = 0.0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const std::vector<MetaTask> batch{
          {regression_objective(tasks[t]), TaskDraw{static_cast<std::int32_t>(t), {0, 1, 2}, {3, 4, 5, 6, 7}}}};
      cfg.meta_grad_mode = MetaGradMode::kFirstOrder;
      const MetaGradient fo = meta_gradient(theta, batch, cfg, 1);
      cfg.meta_grad_mode = MetaGradMode::kExactFd;
      const MetaGradient fd = meta_gradient(theta, batch, cfg, 1);
      const std::vector<double> a = flatten(fo.grad), b = flatten(fd.grad);
      double diff = 0.0, norm = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        norm += b[i] * b[i];
      }
      worst_rel = std::max(worst_rel, std::sqrt(diff / norm));
      art.add(a);
      art.add(b);
    }

    // Quadratic family with optima at -1 and +1: the symmetric optimum is 0.
    MetaConfig toy;
    toy.alpha = 0.1;
    toy.beta = 0.1;
    toy.inner_steps = 5;
    toy.task_batch = 2;
    toy.K = 1;
    toy.M = 1;
    toy.seed = 33;
    MetaTrainState state(ParamList{Tensor(1, 1, 3.0)}, toy.seed);
    const std::vector<std::int32_t> task_ids{0, 1};
    const std::vector<std::int32_t> obs{0, 1};
    for (int it = 0; it < 200; ++it) {
      const auto draws = sample_task_batch(task_ids, obs, toy, state.rng);
      std::vector<MetaTask> batch;
      for (const TaskDraw& d : draws) batch.push_back({quadratic_objective(d.task_id == 0 ? -1.0 : 1.0), d});
      meta_step(state, batch, toy);
    }
    const double final_theta = state.theta[0](0, 0);
    art.add(final_theta);
    for (const HistoryEntry& h : state.history) art.add(h.mean_query_loss);

    r.passed = worst_rel < 0.05 && std::abs(final_theta) < 0.05;
    r.detail = "first-order vs exact_fd relative difference " + fmt(worst_rel) + "; quadratic toy theta after 200 " +
               "iterations " + fmt(final_theta);
    r.artifact = art.take();
  });
}

RunConfig desk_scale_config() {
  RunConfig c;
  c.synthetic = {4, 5, 30, 50.0, 5};
  GenerationConfig& g = c.generation;
  g.n_tasks = 40;
  g.n_ods = 20;
  g.n_test_tasks = 3;
  g.n_test_ods = 5;
  g.seed = 2024;
  GnnHyper& h = c.model.hyper;
  h.hidden = 32;
  h.layers = 3;
  c.model.init_seed = 11;
  MetaConfig& m = c.meta;
  m.alpha = 0.02;
  m.beta = 0.008;
  m.K = 4;
  m.M = 11;
  m.inner_steps = 5;
  m.task_batch = 7;
  m.meta_iterations = 300;
  m.outer_optimizer = OuterOptimizer::kAdam;
  m.record_wall_time = false;
  return c;
}

CriterionResult check_desk_scale(const RunConfig& config, const std::string& artifact_dir) {
  return timed(6, "desk-scale end-to-end", 900.0, [&](CriterionResult& r) {
    Artifact art;
    const RoadNetwork net = synthetic_grid_network(config.synthetic.rows, config.synthetic.cols, config.synthetic.links,
                                                   config.synthetic.seed);
    const ODMatrix base = synthetic_base_od(net, config.synthetic.mean_trips, config.synthetic.seed);
    const PipelineOutput p = run_pipeline(net, base, config, artifact_dir, art);
    bool r2_ok = !p.meta_report.per_task.empty();
    bool beats_random = r2_ok;
    for (std::size_t i = 0; i < p.meta_report.per_task.size(); ++i) {
      r2_ok = r2_ok && p.meta_report.per_task[i].r_squared >= 0.6;
      beats_random = beats_random && p.meta_report.per_task[i].query_loss < p.random_report.per_task[i].query_loss;
    }
    r.passed = r2_ok && beats_random;
    r.detail = std::to_string(net.node_count()) + " nodes/" + std::to_string(net.edge_count()) + " edges, best iter " +
               std::to_string(p.trained.best_iteration) + ";" + per_task_summary(p);
    r.artifact = art.take();
  });
}

CriterionResult check_full_scale(const std::string& corpus_dir, const std::string& artifact_dir) {
  return timed(7, "full-scale reproduction", 0.0, [&](CriterionResult& r) {
    namespace fs = std::filesystem;
    fs::path net_file, trips_file, node_file;
    if (!corpus_dir.empty() && fs::is_directory(corpus_dir)) {
      for (const auto& entry : fs::directory_iterator(corpus_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.ends_with("_net.tntp")) net_file = entry.path();
        if (name.ends_with("_trips.tntp")) trips_file = entry.path();
        if (name.ends_with("_node.tntp")) node_file = entry.path();
      }
    }
    if (net_file.empty() || trips_file.empty()) {
      r.skipped = true;
      r.passed = true;
      r.detail = "corpus not available (set METASSIGN_FULL_CORPUS to a directory with *_net.tntp and *_trips.tntp)";
      return;
    }
    RoadNetwork net = parse_network(read_text_file(net_file.string()));
    if (!node_file.empty()) parse_node_coordinates(read_text_file(node_file.string()), net);
    const ODMatrix base = parse_trips(read_text_file(trips_file.string())).od;
    RunConfig config;  // published defaults
    config.generation.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    config.meta.threads = config.generation.workers;
    Artifact art;
    const PipelineOutput p = run_pipeline(net, base, config, artifact_dir, art);

    const auto& hist = p.trained.history;
    const std::size_t window = std::min<std::size_t>(100, hist.size() / 2);
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
      head += hist[i].mean_query_loss;
      tail += hist[hist.size() - 1 - i].mean_query_loss;
    }
    head /= static_cast<double>(std::max<std::size_t>(window, 1));
    tail /= static_cast<double>(std::max<std::size_t>(window, 1));
    bool r2_ok = !p.meta_report.per_task.empty();
    for (const TaskEvaluation& t : p.meta_report.per_task) r2_ok = r2_ok && t.r_squared >= 0.80;
    const bool curve_ok = window > 0 && tail < head && tail >= 1e-3 && tail <= 1e-2;
    r.passed = curve_ok && r2_ok;
    r.detail = "meta-loss " + fmt(head) + " -> plateau " + fmt(tail) + ";" + per_task_summary(p);
  });
}

CriterionResult check_determinism(const std::vector<CriterionResult>& first,
                                  const std::function<std::vector<CriterionResult>()>& suite) {
  return timed(8, "determinism", 0.0, [&](CriterionResult& r) {
    const std::vector<CriterionResult> second = suite();
    std::vector<std::string> mismatched;
    std::size_t compared = 0;
    for (const CriterionResult& a : first) {
      if (a.skipped) continue;
      const auto it = std::find_if(second.begin(), second.end(), [&](const CriterionResult& b) { return b.id == a.id; });
      ++compared;
      if (it == second.end() || it->artifact != a.artifact || a.artifact.empty()) mismatched.push_back(std::to_string(a.id));
    }
    r.passed = mismatched.empty() && compared > 0;
    std::ostringstream s;
    s << compared << " criteria compared byte for byte";
    if (!mismatched.empty()) {
      s << "; differing:";
      for (const auto& id : mismatched) s << ' ' << id;
    }
    r.detail = s.str();
  });
}

std::string format_line(const CriterionResult& r) {
  std::ostringstream s;
  s << (r.skipped ? "SKIP" : (r.passed ? "PASS" : "FAIL")) << " [" << r.id << "] " << r.name << " (";
  s.precision(3);
  s << std::fixed << r.seconds << " s): " << r.detail;
  return s.str();
}

}  // namespace metassign::acceptance
