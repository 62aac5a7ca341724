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

// Reference solutions that share no code with the library under test. They
// favour obviousness over speed and only work on toy instances.

#include <functional>
#include <utility>
#include <vector>

#include "metassign/network.hpp"

namespace metassign::oracle {

/// Equilibrium of two parallel links with linear costs a_i + b_i * x_i and
/// total demand d, by solving the two-equation system directly.
std::pair<double, double> two_link_linear(double a1, double b1, double a2, double b2, double demand);

/// User equilibrium by enumerating every simple path of every positive OD
/// pair and running projected fixed-point iterations on path flows. Link
/// costs are evaluated from the raw edge fields here, not via the solver.
std::vector<double> path_enumeration_ue(const RoadNetwork& network, const std::vector<bool>& present,
                                        const ODMatrix& od, int max_iterations = 200000, double tolerance = 1e-12);

/// Euclidean projection onto {h >= 0, sum h = total}.
std::vector<double> project_simplex(const std::vector<double>& v, double total);

/// Central-difference gradient of f at x.
std::vector<double> finite_difference_gradient(const std::function<double(const std::vector<double>&)>& f,
                                               std::vector<double> x, double h = 1e-5);

// Toy networks. Every node is a zone and through traffic is allowed.

/// Edge 0: cost 1 + x. Edge 1: cost 2 + x. Both from node 0 to node 1.
RoadNetwork two_link_network();

/// Classic four-node Braess layout: 0->1 (1 + x/10), 1->3 (15), 0->2 (15),
/// 2->3 (1 + x/10) and the bypass 1->2 (constant 1) as edge 4.
RoadNetwork braess_network();

/// Demand from node 0 to node 1 of a two-zone matrix, or 0 -> 3 for Braess.
ODMatrix single_pair_od(std::int32_t zones, std::int32_t origin, std::int32_t dest, double demand);

}  // namespace metassign::oracle
