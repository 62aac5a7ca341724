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

#include "metassign/assign.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "metassign/errors.hpp"

namespace metassign {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Forward-star adjacency over all edges; masking is applied during search.
struct Adjacency {
  std::vector<std::int32_t> offset;
  std::vector<EdgeId> edges;

  explicit Adjacency(const RoadNetwork& net) : offset(net.node_count() + 1, 0) {
    for (const Edge& e : net.edges) ++offset[e.from_node + 1];
    for (std::size_t i = 1; i < offset.size(); ++i) offset[i] += offset[i - 1];
    edges.resize(net.edge_count());
    std::vector<std::int32_t> cursor(offset.begin(), offset.end() - 1);
    for (const Edge& e : net.edges) edges[cursor[e.from_node]++] = e.edge_id;
  }
};

ShortestPathTree search(const RoadNetwork& net, const Adjacency& adj, const std::vector<bool>& present,
                        std::span<const double> costs, NodeId origin) {
  const std::size_t n = net.node_count();
  ShortestPathTree tree{std::vector<double>(n, kInf), std::vector<EdgeId>(n, -1)};
  std::vector<bool> settled(n, false);
  using Entry = std::pair<double, NodeId>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  tree.dist[origin] = 0.0;
  heap.emplace(0.0, origin);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (settled[u] || d > tree.dist[u]) continue;
    settled[u] = true;
    const Node& node = net.nodes[u];
    if (u != origin && node.zone_id && node.original_id < net.first_thru_node) continue;
    for (auto k = adj.offset[u]; k < adj.offset[u + 1]; ++k) {
      const EdgeId e = adj.edges[k];
      if (!present[e]) continue;
      const NodeId v = net.edges[e].to_node;
      if (settled[v]) continue;
      const double nd = d + costs[e];
      if (nd < tree.dist[v] || (nd == tree.dist[v] && e < tree.predecessor_edge[v])) {
        const bool improved = nd < tree.dist[v];
        tree.dist[v] = nd;
        tree.predecessor_edge[v] = e;
        if (improved) heap.emplace(nd, v);
      }
    }
  }
  return tree;
}

LoadingResult load(const RoadNetwork& net, const Adjacency& adj, const std::vector<bool>& present,
                   std::span<const double> costs, const ODMatrix& od) {
  LoadingResult out{std::vector<double>(net.edge_count(), 0.0), 0.0};
  for (std::int32_t o = 0; o < od.n_zones; ++o) {
    const auto row = od.row(o);
    if (std::none_of(row.begin(), row.end(), [](double v) { return v > 0.0; })) continue;
    const auto tree = search(net, adj, present, costs, o);
    for (std::int32_t d = 0; d < od.n_zones; ++d) {
      const double demand = row[d];
      if (!(demand > 0.0) || d == o) continue;
      if (!tree.reachable(d)) {
        out.unreachable_demand += demand;
        continue;
      }
      for (NodeId v = d; v != o;) {
        const EdgeId e = tree.predecessor_edge[v];
        out.flows[e] += demand;
        v = net.edges[e].from_node;
      }
    }
  }
  return out;
}

double bpr_derivative(const Edge& e, double flow) {
  if (e.bpr_b == 0.0 || e.bpr_power == 0.0) return 0.0;
  const double v = std::max(flow, 1e-12);
  return e.free_flow_time * e.bpr_b * e.bpr_power * std::pow(v / e.capacity, e.bpr_power - 1.0) / e.capacity;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

constexpr double kConjugateDelta = 0.01;

// Exact line search along x + t*d for t in [0, 1]. The Beckmann objective is
// convex along the segment, so its minimizer is where the directional
// derivative sum_e c_e(x + t d) d_e changes sign; bisection on that sign
// resolves steps far below what comparing objective values can.
// `tol` is the bracket width relative to its upper end.
double line_search(const RoadNetwork& net, std::span<const double> x, std::span<const double> d, double tol) {
  auto slope = [&](double t) {
    double s = 0.0;
    for (const Edge& e : net.edges) {
      const std::size_t i = e.edge_id;
      if (d[i] == 0.0) continue;
      s += bpr_cost(e.free_flow_time, e.capacity, e.bpr_b, e.bpr_power, std::max(0.0, x[i] + t * d[i])) * d[i];
    }
    return s;
  };
  if (slope(0.0) >= 0.0) return 0.0;
  if (slope(1.0) <= 0.0) return 1.0;
  double a = 0.0, b = 1.0;
  while (b - a > tol * b) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    (slope(mid) < 0.0 ? a : b) = mid;
  }
  // Any point left of the minimizer keeps the objective from rising.
  return a > 0.0 ? a : 0.5 * b;
}

}  // namespace

SolverMethod parse_solver_method(const std::string& name) {
  if (name == "fw") return SolverMethod::kFrankWolfe;
  if (name == "bfw") return SolverMethod::kConjugate;
  if (name == "bcfw") return SolverMethod::kBiconjugate;
  throw ConfigError("unknown solver method '" + name + "' (expected fw, bfw or bcfw)");
}

std::string to_string(SolverMethod method) {
  switch (method) {
    case SolverMethod::kFrankWolfe:
      return "fw";
    case SolverMethod::kConjugate:
      return "bfw";
    case SolverMethod::kBiconjugate:
      return "bcfw";
  }
  return "?";
}

void SolverOptions::validate() const {
  if (!(gap_tolerance > 0.0)) throw ConfigError("gap_tolerance must be positive");
  if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (!(line_search_tolerance > 0.0)) throw ConfigError("line_search_tolerance must be positive");
}

double bpr_cost(double free_flow_time, double capacity, double bpr_b, double bpr_power, double flow) {
  return free_flow_time * (1.0 + bpr_b * std::pow(flow / capacity, bpr_power));
}

double bpr_integral(const Edge& e, double flow) {
  const double ratio = flow / e.capacity;
  return e.free_flow_time * (flow + e.bpr_b * e.capacity * std::pow(ratio, e.bpr_power + 1.0) / (e.bpr_power + 1.0));
}

std::vector<double> edge_costs(const RoadNetwork& network, std::span<const double> flows) {
  std::vector<double> costs(network.edge_count());
  for (const Edge& e : network.edges) {
    costs[e.edge_id] = bpr_cost(e.free_flow_time, e.capacity, e.bpr_b, e.bpr_power, flows[e.edge_id]);
  }
  return costs;
}

double beckmann_objective(const RoadNetwork& network, std::span<const double> flows) {
  double total = 0.0;
  for (const Edge& e : network.edges) total += bpr_integral(e, flows[e.edge_id]);
  return total;
}

ShortestPathTree shortest_path_tree(const RoadNetwork& network, const std::vector<bool>& present,
                                    std::span<const double> costs, NodeId origin) {
  if (present.size() != network.edge_count() || costs.size() != network.edge_count()) {
    throw DimensionError("mask/cost length differs from the edge count");
  }
  if (origin < 0 || static_cast<std::size_t>(origin) >= network.node_count()) {
    throw IndexError("origin node out of range");
  }
  return search(network, Adjacency(network), present, costs, origin);
}

LoadingResult all_or_nothing(const RoadNetwork& network, const std::vector<bool>& present,
                             std::span<const double> costs, const ODMatrix& od) {
  if (present.size() != network.edge_count() || costs.size() != network.edge_count()) {
    throw DimensionError("mask/cost length differs from the edge count");
  }
  if (od.n_zones != network.n_zones) throw DimensionError("OD zone count differs from the network");
  return load(network, Adjacency(network), present, costs, od);
}

std::vector<bool> all_open(const RoadNetwork& network) { return std::vector<bool>(network.edge_count(), true); }

AssignmentResult solve_ue(const RoadNetwork& network, const std::vector<bool>& present, const ODMatrix& od,
                          const SolverOptions& options) {
  options.validate();
  if (present.size() != network.edge_count()) throw DimensionError("mask length differs from the edge count");
  if (od.n_zones != network.n_zones) throw DimensionError("OD zone count differs from the network");

  const Adjacency adj(network);
  const std::size_t m = network.edge_count();
  AssignmentResult result;

  const auto free_costs = edge_costs(network, std::vector<double>(m, 0.0));
  LoadingResult initial = load(network, adj, present, free_costs, od);
  result.unreachable_demand = initial.unreachable_demand;
  if (initial.unreachable_demand > 0.0 && !options.allow_unreachable) {
    throw ScenarioInfeasibleError(std::to_string(initial.unreachable_demand) +
                                  " trips/hour of demand cannot reach their destination");
  }
  std::vector<double> x = std::move(initial.flows);
  result.objective_history.push_back(beckmann_objective(network, x));

  // Previous target points for the conjugate constructions.
  std::vector<double> s1, s2;
  double prev_step = 0.0;
  std::vector<double> direction(m), target(m), hess(m);

  auto gap_at = [&](const std::vector<double>& costs, const std::vector<double>& aon) {
    const double total = dot(costs, x);
    if (!(total > 0.0)) return 0.0;
    return std::max(0.0, (total - dot(costs, aon)) / total);
  };

  int it = 0;
  for (;;) {
    const auto costs = edge_costs(network, x);
    const auto aon = load(network, adj, present, costs, od).flows;
    result.relative_gap = gap_at(costs, aon);
    if (result.relative_gap <= options.gap_tolerance) {
      result.converged = true;
      break;
    }
    if (it >= options.max_iterations) break;

    for (const Edge& e : network.edges) hess[e.edge_id] = bpr_derivative(e, x[e.edge_id]);

    target = aon;
    const bool can_conjugate = options.method != SolverMethod::kFrankWolfe && !s1.empty() && prev_step < 1.0;
    if (can_conjugate && options.method == SolverMethod::kBiconjugate && !s2.empty()) {
      // Bi-conjugate: combine the AON point with the two previous targets.
      double mu_num = 0.0, mu_den = 0.0, nu_num = 0.0, nu_den = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d1 = s1[i] - x[i];
        const double d2 = prev_step * s1[i] - x[i] + (1.0 - prev_step) * s2[i];
        const double fw = aon[i] - x[i];
        mu_num += d2 * hess[i] * fw;
        mu_den += d2 * hess[i] * (s2[i] - s1[i]);
        nu_num += d1 * hess[i] * fw;
        nu_den += d1 * hess[i] * d1;
      }
      double mu = mu_den != 0.0 ? -mu_num / mu_den : 0.0;
      mu = std::max(0.0, mu);
      double nu = nu_den != 0.0 ? -nu_num / nu_den + mu * prev_step / (1.0 - prev_step) : 0.0;
      nu = std::max(0.0, nu);
      const double b0 = 1.0 / (1.0 + mu + nu);
      const double b1 = nu * b0;
      const double b2 = mu * b0;
      for (std::size_t i = 0; i < m; ++i) target[i] = b0 * aon[i] + b1 * s1[i] + b2 * s2[i];
    } else if (can_conjugate) {
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double prev = s1[i] - x[i];
        num += prev * hess[i] * (aon[i] - x[i]);
        den += prev * hess[i] * (aon[i] - s1[i]);
      }
      double alpha = den != 0.0 ? num / den : 0.0;
      // Capping the weight on the previous target at 1 - delta keeps a share of
      // the fresh AON point; a cap next to 1 lets the direction collapse onto
      // the previous one and the iteration stalls.
      alpha = std::clamp(alpha, 0.0, 1.0 - kConjugateDelta);
      for (std::size_t i = 0; i < m; ++i) target[i] = alpha * s1[i] + (1.0 - alpha) * aon[i];
    }
    for (std::size_t i = 0; i < m; ++i) direction[i] = target[i] - x[i];
    // A conjugate target that is not a descent direction falls back to plain FW.
    if (dot(costs, direction) >= 0.0) {
      target = aon;
      for (std::size_t i = 0; i < m; ++i) direction[i] = target[i] - x[i];
    }

    const double step = line_search(network, x, direction, options.line_search_tolerance);
    for (std::size_t i = 0; i < m; ++i) x[i] = std::max(0.0, x[i] + step * direction[i]);
    if (step == 0.0) {
      // No progress along the combined direction: restart from plain FW.
      s1.clear();
      s2.clear();
    } else {
      s2 = std::move(s1);
      s1 = target;
    }
    prev_step = step;
    ++it;
    result.objective_history.push_back(beckmann_objective(network, x));
  }

  result.iterations = it;
  result.flows = std::move(x);
  for (std::size_t i = 0; i < m; ++i) {
    if (!present[i]) result.flows[i] = 0.0;
  }
  result.costs = edge_costs(network, result.flows);
  result.objective = beckmann_objective(network, result.flows);
  return result;
}

}  // namespace metassign
