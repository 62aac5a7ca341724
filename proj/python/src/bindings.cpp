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

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "metassign/assign.hpp"
#include "metassign/config.hpp"
#include "metassign/errors.hpp"
#include "metassign/evaluate.hpp"
#include "metassign/gnn.hpp"
#include "metassign/meta.hpp"
#include "metassign/network.hpp"
#include "metassign/scenario.hpp"

namespace py = pybind11;
using namespace metassign;

namespace {

std::vector<bool> mask_or_open(const RoadNetwork& net, const std::optional<std::vector<bool>>& present) {
  if (!present) return all_open(net);
  if (present->size() != net.edge_count()) throw DimensionError("mask length differs from the edge count");
  return *present;
}

GnnHyper hyper_for(const Dataset& dataset, const RunConfig& config) {
  GnnHyper h = config.model.hyper;
  h.node_features = 3 + dataset.network.n_zones;
  return h;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Traffic assignment, closure-scenario generation and meta-learned gatedGCN surrogates.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());
  py::register_exception<UnsupportedVersionError>(m, "UnsupportedVersionError", base.ptr());
  py::register_exception<ScenarioInfeasibleError>(m, "ScenarioInfeasibleError", base.ptr());
  py::register_exception<GenerationError>(m, "GenerationError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<IndexError>(m, "IndexError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<AdaptationError>(m, "AdaptationError", base.ptr());
  py::register_exception<MetricError>(m, "MetricError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<Edge>(m, "Edge")
      .def_readonly("edge_id", &Edge::edge_id)
      .def_readonly("from_node", &Edge::from_node)
      .def_readonly("to_node", &Edge::to_node)
      .def_readonly("capacity", &Edge::capacity)
      .def_readonly("free_flow_time", &Edge::free_flow_time)
      .def_readonly("bpr_b", &Edge::bpr_b)
      .def_readonly("bpr_power", &Edge::bpr_power)
      .def_readonly("length", &Edge::length);

  py::class_<RoadNetwork>(m, "RoadNetwork")
      .def_property_readonly("node_count", &RoadNetwork::node_count)
      .def_property_readonly("edge_count", &RoadNetwork::edge_count)
      .def_readonly("n_zones", &RoadNetwork::n_zones)
      .def_readonly("edges", &RoadNetwork::edges)
      .def("to_tntp", &format_network_tntp);

  py::class_<ODMatrix>(m, "ODMatrix")
      .def(py::init<std::int32_t, std::int32_t>(), py::arg("od_id"), py::arg("n_zones"))
      .def_readonly("n_zones", &ODMatrix::n_zones)
      .def("__getitem__", [](const ODMatrix& od, std::pair<int, int> k) { return od.at(k.first, k.second); })
      .def("__setitem__", [](ODMatrix& od, std::pair<int, int> k, double v) { od.at(k.first, k.second) = v; })
      .def("total", &ODMatrix::total)
      .def("to_tntp", &format_trips_tntp);

  m.def("parse_network", &parse_network, py::arg("text"), "Parse TNTP network text.");
  m.def("parse_trips", [](const std::string& text) { return parse_trips(text).od; }, py::arg("text"),
        "Parse TNTP trips text into an OD matrix.");
  m.def("synthetic_grid_network", &synthetic_grid_network, py::arg("rows"), py::arg("cols"), py::arg("links"),
        py::arg("seed"));
  m.def("synthetic_base_od", &synthetic_base_od, py::arg("network"), py::arg("mean_trips"), py::arg("seed"));
  m.def("bpr_cost", &bpr_cost, py::arg("free_flow_time"), py::arg("capacity"), py::arg("bpr_b"),
        py::arg("bpr_power"), py::arg("flow"));

  m.def(
      "solve_ue",
      [](const RoadNetwork& net, const ODMatrix& od, std::optional<std::vector<bool>> present,
         const std::string& method, double gap, int max_iterations, bool allow_unreachable) {
        SolverOptions o;
        o.method = parse_solver_method(method);
        o.gap_tolerance = gap;
        o.max_iterations = max_iterations;
        o.allow_unreachable = allow_unreachable;
        const AssignmentResult r = solve_ue(net, mask_or_open(net, present), od, o);
        py::dict d;
        d["flows"] = r.flows;
        d["costs"] = r.costs;
        d["relative_gap"] = r.relative_gap;
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        d["objective"] = r.objective;
        d["unreachable_demand"] = r.unreachable_demand;
        return d;
      },
      py::arg("network"), py::arg("od"), py::arg("present") = py::none(), py::arg("method") = "bcfw",
      py::arg("gap") = 1e-4, py::arg("max_iterations") = 500, py::arg("allow_unreachable") = false,
      "Solve static user equilibrium; returns a dict with flows, costs, gap and convergence data.");

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("parse", &parse_run_config, py::arg("text"))
      .def_static("load", &load_run_config, py::arg("path"))
      .def("to_json", &format_run_config)
      .def("validate", &RunConfig::validate);

  py::class_<Dataset>(m, "Dataset")
      .def_static("load", &read_dataset, py::arg("path"))
      .def("save", [](const Dataset& d, const std::string& path) { write_dataset(d, path); }, py::arg("path"))
      .def_readonly("network", &Dataset::network)
      .def_property_readonly("sample_count", [](const Dataset& d) { return d.samples.size(); })
      .def_property_readonly("task_count", [](const Dataset& d) { return d.tasks.size(); })
      .def_property_readonly("od_count", [](const Dataset& d) { return d.od_matrices.size(); })
      .def_property_readonly("test_task_ids", [](const Dataset& d) { return d.split.test_task_ids; })
      .def_property_readonly("test_od_ids", [](const Dataset& d) { return d.split.test_od_ids; })
      .def("present", [](const Dataset& d, std::int32_t t) { return d.task(t).present; }, py::arg("task_id"))
      .def("flows", [](const Dataset& d, std::int32_t t, std::int32_t o) { return d.record(t, o).flows; },
           py::arg("task_id"), py::arg("od_id"));

  m.def(
      "generate_dataset",
      [](const RoadNetwork& net, const ODMatrix& base_od, const RunConfig& config) {
        py::gil_scoped_release release;
        return generate_dataset(net, base_od, config.generation);
      },
      py::arg("network"), py::arg("base_od"), py::arg("config"));

  py::class_<GatedGCNParams>(m, "Params")
      .def_static("load", &read_checkpoint, py::arg("path"))
      .def("save", [](const GatedGCNParams& p, const std::string& path) { write_checkpoint(p, path); },
           py::arg("path"))
      .def_property_readonly("parameter_count", [](const GatedGCNParams& p) { return parameter_count(p.weights); })
      .def_property_readonly("hidden", [](const GatedGCNParams& p) { return p.hyper.hidden; })
      .def_property_readonly("layers", [](const GatedGCNParams& p) { return p.hyper.layers; });

  m.def(
      "init_params",
      [](const Dataset& d, const RunConfig& config) { return init_params(config.model.init_seed, hyper_for(d, config)); },
      py::arg("dataset"), py::arg("config"));

  m.def("predict", [](const GatedGCNParams& p, const Dataset& d, std::int32_t task_id, std::int32_t od_id) {
        return predict(p, make_graph_batch(d, task_id, od_id));
      }, py::arg("params"), py::arg("dataset"), py::arg("task_id"), py::arg("od_id"),
        "Predicted flows (normalized units) for one (task, OD) pair.");

  m.def(
      "meta_train",
      [](const Dataset& d, const GatedGCNParams& init, const RunConfig& config) {
        MetaTrainResult r;
        {
          py::gil_scoped_release release;
          r = meta_train(d, init, config.meta);
        }
        py::list history;
        for (const HistoryEntry& h : r.history) {
          history.append(py::make_tuple(h.iteration, h.mean_query_loss, h.wall_time_s));
        }
        return py::make_tuple(r.best, r.final, history, r.best_iteration);
      },
      py::arg("dataset"), py::arg("init"), py::arg("config"),
      "Returns (best_params, final_params, history, best_iteration); history rows are "
      "(iteration, mean_query_loss, wall_time_s).");

  m.def(
      "meta_test",
      [](const GatedGCNParams& theta, const Dataset& d, const RunConfig& config) {
        MetaTestReport r;
        {
          py::gil_scoped_release release;
          r = meta_test(theta, d, config.meta);
        }
        return report_to_json(r);
      },
      py::arg("params"), py::arg("dataset"), py::arg("config"), "Meta-test report as a JSON string.");

  m.def(
      "r_squared",
      [](const std::vector<double>& truth, const std::vector<double>& pred) { return r_squared(truth, pred); },
      py::arg("truth"), py::arg("predicted"));

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"metassign"};
        for (const std::string& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command line tool in-process; returns (exit_code, stdout, stderr).");
}
