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

#include "cli.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "acceptance.hpp"
#include "metassign/assign.hpp"
#include "metassign/config.hpp"
#include "metassign/dataset.hpp"
#include "metassign/errors.hpp"
#include "metassign/evaluate.hpp"
#include "metassign/gnn.hpp"
#include "metassign/meta.hpp"
#include "metassign/network.hpp"
#include "metassign/scenario.hpp"

namespace metassign {
namespace {

RunConfig load_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_run_config(path); }

std::vector<bool> read_mask(const std::string& path, std::size_t edges) {
  std::istringstream in(read_text_file(path));
  std::vector<bool> present;
  std::string token;
  while (in >> token) {
    if (token == "1") {
      present.push_back(true);
    } else if (token == "0") {
      present.push_back(false);
    } else {
      throw ParseError("mask file " + path + ": expected 0 or 1, got '" + token + "'");
    }
  }
  if (present.size() != edges) {
    throw ValidationError("mask file " + path + " has " + std::to_string(present.size()) + " entries for " +
                          std::to_string(edges) + " edges");
  }
  return present;
}

RoadNetwork load_network(const std::string& net_path, const std::string& nodes_path) {
  RoadNetwork net = parse_network(read_text_file(net_path));
  if (!nodes_path.empty()) parse_node_coordinates(read_text_file(nodes_path), net);
  return net;
}

std::string assignment_csv(const RoadNetwork& net, const AssignmentResult& res) {
  std::ostringstream s;
  s.precision(17);
  s << "edge_id,from,to,flow,cost,gap\n";
  for (const Edge& e : net.edges) {
    s << e.edge_id << ',' << net.nodes[e.from_node].original_id << ',' << net.nodes[e.to_node].original_id << ','
      << res.flows[e.edge_id] << ',' << res.costs[e.edge_id] << ',' << res.relative_gap << '\n';
  }
  return s.str();
}

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Meta-learned graph surrogate for static traffic assignment", "metassign"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::optional<std::uint64_t> seed;
  std::string config_path;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    sub->add_option("--seed", seed, "Seed override for this command's random streams");
    if (with_config) sub->add_option("--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
  };

  // synth
  int rows = 0, cols = 0, links = 0;
  double mean_trips = 0.0;
  std::string prefix;
  auto* synth = app.add_subcommand("synth", "Write a synthetic grid network as TNTP files");
  add_common(synth, true);
  synth->add_option("--rows", rows, "Grid rows");
  synth->add_option("--cols", cols, "Grid columns");
  synth->add_option("--links", links, "Undirected links (each becomes two directed edges)");
  synth->add_option("--mean-trips", mean_trips, "Mean trips per zone pair");
  synth->add_option("--out-prefix", prefix, "Writes <prefix>_net.tntp, _trips.tntp and _node.tntp")->required();

  // assign
  std::string net_path, trips_path, nodes_path, mask_path, method = "bcfw", out_path;
  double gap = 1e-4;
  int max_iter = 500;
  auto* assign = app.add_subcommand("assign", "Solve user equilibrium and print per-edge flows as CSV");
  add_common(assign, false);
  assign->add_option("--net", net_path, "TNTP network file")->required()->check(CLI::ExistingFile);
  assign->add_option("--trips", trips_path, "TNTP trips file")->required()->check(CLI::ExistingFile);
  assign->add_option("--mask", mask_path, "Whitespace separated 0/1 per edge (1 = open)")->check(CLI::ExistingFile);
  assign->add_option("--method", method, "fw, bfw or bcfw")->check(CLI::IsMember({"fw", "bfw", "bcfw"}));
  assign->add_option("--gap", gap, "Relative gap tolerance");
  assign->add_option("--max-iter", max_iter, "Iteration cap");
  assign->add_option("--out", out_path, "CSV destination (standard output when omitted)");

  // generate
  std::string data_path;
  int workers = 0;
  auto* generate = app.add_subcommand("generate", "Build a closure/OD dataset with ground-truth assignments");
  add_common(generate, true);
  generate->add_option("--net", net_path, "TNTP network file")->required()->check(CLI::ExistingFile);
  generate->add_option("--trips", trips_path, "TNTP trips file (base OD)")->required()->check(CLI::ExistingFile);
  generate->add_option("--nodes", nodes_path, "TNTP node file with coordinates")->check(CLI::ExistingFile);
  generate->add_option("--out", data_path, "Dataset file to write")->required();
  generate->add_option("--workers", workers, "Solver threads");

  // meta-train
  std::string checkpoint_path, history_path, final_path;
  int iterations = -1, threads = 0;
  auto* train = app.add_subcommand("meta-train", "Meta-train the surrogate on a dataset");
  add_common(train, true);
  train->add_option("--data", data_path, "Dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", checkpoint_path, "Checkpoint of the best parameters")->required();
  train->add_option("--history", history_path, "Meta-loss history CSV");
  train->add_option("--final-out", final_path, "Checkpoint of the last iteration's parameters");
  train->add_option("--iterations", iterations, "Override meta_iterations");
  train->add_option("--threads", threads, "Worker threads for the task batch");

  // meta-test
  std::string report_path, report_dir;
  auto* test = app.add_subcommand("meta-test", "Adapt to the held-out tasks and score the query ODs");
  add_common(test, true);
  test->add_option("--data", data_path, "Dataset file")->required()->check(CLI::ExistingFile);
  test->add_option("--checkpoint", checkpoint_path, "Meta-trained checkpoint")->required()->check(CLI::ExistingFile);
  test->add_option("--out", report_path, "Report JSON to write")->required();
  test->add_option("--report-dir", report_dir, "Also write CSV/SVG artifacts here");
  test->add_option("--history", history_path, "Meta-loss history CSV to include in --report-dir");

  // report
  std::string out_dir;
  auto* report = app.add_subcommand("report", "Render CSV and SVG artifacts from a report");
  add_common(report, false);
  report->add_option("--report", report_path, "Report JSON from meta-test")->required()->check(CLI::ExistingFile);
  report->add_option("--history", history_path, "Meta-loss history CSV")->check(CLI::ExistingFile);
  report->add_option("--out", out_dir, "Output directory")->required();

  // selftest
  bool desk = false;
  auto* selftest = app.add_subcommand("selftest", "Run the oracle and property checks");
  add_common(selftest, true);
  selftest->add_flag("--desk", desk, "Also run the desk-scale end-to-end check (minutes)");
  selftest->add_option("--artifacts", out_dir, "Directory for the end-to-end artifacts");

  // print-config
  auto* print_config = app.add_subcommand("print-config", "Print the resolved configuration as JSON");
  add_common(print_config, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    auto log = [&err](const std::string& line) { err << line << std::endl; };

    if (*synth) {
      RunConfig c = load_or_default(config_path);
      SyntheticConfig s = c.synthetic;
      if (rows > 0) s.rows = rows;
      if (cols > 0) s.cols = cols;
      if (links > 0) s.links = links;
      if (mean_trips > 0.0) s.mean_trips = mean_trips;
      if (seed) s.seed = *seed;
      const RoadNetwork net = synthetic_grid_network(s.rows, s.cols, s.links, s.seed);
      const ODMatrix od = synthetic_base_od(net, s.mean_trips, s.seed);
      ensure_parent(prefix);
      write_text_file(prefix + "_net.tntp", format_network_tntp(net));
      write_text_file(prefix + "_trips.tntp", format_trips_tntp(od));
      write_text_file(prefix + "_node.tntp", format_nodes_tntp(net));
      log("wrote " + prefix + "_{net,trips,node}.tntp (" + std::to_string(net.node_count()) + " nodes, " +
          std::to_string(net.edge_count()) + " edges)");
      return 0;
    }

    if (*assign) {
      const RoadNetwork net = load_network(net_path, "");
      const ODMatrix od = parse_trips(read_text_file(trips_path)).od;
      const std::vector<bool> present = mask_path.empty() ? all_open(net) : read_mask(mask_path, net.edge_count());
      SolverOptions opts;
      opts.method = parse_solver_method(method);
      opts.gap_tolerance = gap;
      opts.max_iterations = max_iter;
      opts.allow_unreachable = true;
      const AssignmentResult res = solve_ue(net, present, od, opts);
      if (res.unreachable_demand > 0.0) {
        log("warning: " + std::to_string(res.unreachable_demand) + " trips/hour have no open path and were dropped");
      }
      if (!res.converged) log("warning: gap " + std::to_string(res.relative_gap) + " above tolerance after cap");
      const std::string csv = assignment_csv(net, res);
      if (out_path.empty()) {
        out << csv;
      } else {
        ensure_parent(out_path);
        write_text_file(out_path, csv);
      }
      std::ostringstream s;
      s << "iterations " << res.iterations << ", relative gap " << res.relative_gap;
      log(s.str());
      return 0;
    }

    if (*generate) {
      RunConfig c = load_or_default(config_path);
      if (seed) c.generation.seed = *seed;
      if (workers > 0) c.generation.workers = workers;
      c.validate();
      const RoadNetwork net = load_network(net_path, nodes_path);
      const ODMatrix base = parse_trips(read_text_file(trips_path)).od;
      std::size_t last_pct = 101;
      const Dataset ds = generate_dataset(net, base, c.generation, [&](std::size_t done, std::size_t total) {
        const std::size_t pct = total ? done * 100 / total : 100;
        if (pct / 10 != last_pct / 10 || done == total) {
          last_pct = pct;
          log("generate: " + std::to_string(done) + "/" + std::to_string(total) + " assignments");
        }
      });
      ensure_parent(data_path);
      write_dataset(ds, data_path);
      log("wrote " + data_path);
      return 0;
    }

    if (*train) {
      RunConfig c = load_or_default(config_path);
      if (seed) c.meta.seed = *seed;
      if (iterations >= 0) c.meta.meta_iterations = iterations;
      if (threads > 0) c.meta.threads = threads;
      const Dataset ds = read_dataset(data_path);
      GnnHyper hyper = c.model.hyper;
      hyper.node_features = 3 + ds.network.n_zones;
      const GatedGCNParams init = init_params(c.model.init_seed, hyper);
      const int every = std::max(1, c.meta.meta_iterations / 20);
      const MetaTrainResult result = meta_train(ds, init, c.meta, [&](const HistoryEntry& h) {
        if (h.iteration % every == 0 || h.iteration == c.meta.meta_iterations) {
          std::ostringstream s;
          s << "meta-train: iteration " << h.iteration << " mean query loss " << h.mean_query_loss;
          log(s.str());
        }
      });
      ensure_parent(checkpoint_path);
      write_checkpoint(result.best, checkpoint_path);
      if (!final_path.empty()) {
        ensure_parent(final_path);
        write_checkpoint(result.final, final_path);
      }
      if (!history_path.empty()) {
        ensure_parent(history_path);
        write_text_file(history_path, format_history_csv(result.history));
      }
      log("wrote " + checkpoint_path + " (best iteration " + std::to_string(result.best_iteration) + ")");
      return 0;
    }

    if (*test) {
      RunConfig c = load_or_default(config_path);
      if (seed) c.meta.seed = *seed;
      const Dataset ds = read_dataset(data_path);
      const GatedGCNParams theta = read_checkpoint(checkpoint_path);
      if (theta.hyper.node_features != 3 + ds.network.n_zones) {
        throw ConfigError("checkpoint expects " + std::to_string(theta.hyper.node_features) +
                          " node features but the dataset provides " + std::to_string(3 + ds.network.n_zones));
      }
      const MetaTestReport rep = meta_test(theta, ds, c.meta);
      ensure_parent(report_path);
      write_text_file(report_path, report_to_json(rep));
      for (const TaskEvaluation& t : rep.per_task) {
        std::ostringstream s;
        s << "task " << t.task_id << ": R2 " << std::setprecision(4) << t.r_squared << ", query loss "
          << t.query_loss_before << " -> " << t.query_loss;
        log(s.str());
      }
      if (!report_dir.empty()) {
        const auto history = history_path.empty() ? std::vector<HistoryEntry>{}
                                                  : parse_history_csv(read_text_file(history_path));
        write_report(rep, history, report_dir);
      }
      return 0;
    }

    if (*report) {
      const MetaTestReport rep = report_from_json(read_text_file(report_path));
      const auto history = history_path.empty() ? std::vector<HistoryEntry>{}
                                                : parse_history_csv(read_text_file(history_path));
      for (const std::string& p : write_report(rep, history, out_dir)) out << p << '\n';
      return 0;
    }

    if (*selftest) {
      using namespace acceptance;
      std::vector<CriterionResult> results{check_equilibrium_oracle(), check_solver_soundness(), check_autodiff(),
                                           check_gnn_properties(), check_maml()};
      if (desk) {
        RunConfig c = config_path.empty() ? desk_scale_config() : load_run_config(config_path);
        if (seed) c.meta.seed = *seed;
        results.push_back(check_desk_scale(c, out_dir));
      }
      bool ok = true;
      for (const CriterionResult& r : results) {
        out << format_line(r) << '\n';
        ok = ok && r.passed;
      }
      return ok ? 0 : 1;
    }

    if (*print_config) {
      RunConfig c = load_or_default(config_path);
      if (seed) c.generation.seed = *seed;
      out << format_run_config(c);
      return 0;
    }
  } catch (const Error& e) {
    err << "error[" << e.kind() << "]: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

}  // namespace metassign
