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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "metassign/network.hpp"

namespace metassign {

enum class SolverMethod {
  kFrankWolfe,        // "fw"
  kConjugate,         // "bfw": one previous direction
  kBiconjugate,       // "bcfw": two previous directions
};

SolverMethod parse_solver_method(const std::string& name);
std::string to_string(SolverMethod method);

struct SolverOptions {
  int max_iterations = 500;
  double gap_tolerance = 1e-4;
  SolverMethod method = SolverMethod::kBiconjugate;
  double line_search_tolerance = 1e-8;
  // When false, positive demand between disconnected zones raises
  // ScenarioInfeasibleError; when true it is dropped and reported.
  bool allow_unreachable = false;

  void validate() const;
};

struct AssignmentResult {
  std::vector<double> flows;
  std::vector<double> costs;  // BPR travel times at the final flows
  double relative_gap = 0.0;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  double unreachable_demand = 0.0;
  // Beckmann objective after every iteration, starting with the initial loading.
  std::vector<double> objective_history;
};

struct ShortestPathTree {
  std::vector<double> dist;
  std::vector<EdgeId> predecessor_edge;  // -1 for the root and unreachable nodes

  bool reachable(NodeId n) const { return dist[n] < std::numeric_limits<double>::infinity(); }
};

struct LoadingResult {
  std::vector<double> flows;
  double unreachable_demand = 0.0;
};

/// BPR volume-delay function t0 * (1 + b * (v / c)^p).
double bpr_cost(double free_flow_time, double capacity, double bpr_b, double bpr_power, double flow);

/// Integral of the BPR function from 0 to `flow`.
double bpr_integral(const Edge& edge, double flow);

std::vector<double> edge_costs(const RoadNetwork& network, std::span<const double> flows);

/// Beckmann objective: sum over open edges of the integrated link cost.
double beckmann_objective(const RoadNetwork& network, std::span<const double> flows);

/// Label-setting shortest paths from `origin` over open edges only. Ties are
/// resolved toward the smaller predecessor edge id.
ShortestPathTree shortest_path_tree(const RoadNetwork& network, const std::vector<bool>& present,
                                    std::span<const double> costs, NodeId origin);

LoadingResult all_or_nothing(const RoadNetwork& network, const std::vector<bool>& present,
                             std::span<const double> costs, const ODMatrix& od);

/// Static user-equilibrium assignment on the open subnetwork.
AssignmentResult solve_ue(const RoadNetwork& network, const std::vector<bool>& present, const ODMatrix& od,
                          const SolverOptions& options = {});

std::vector<bool> all_open(const RoadNetwork& network);

}  // namespace metassign
