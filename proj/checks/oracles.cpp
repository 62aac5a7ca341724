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

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace metassign::oracle {

std::pair<double, double> two_link_linear(double a1, double b1, double a2, double b2, double demand) {
  // Interior solution of a1 + b1 x1 = a2 + b2 x2 with x1 + x2 = demand.
  double x1 = (a2 - a1 + b2 * demand) / (b1 + b2);
  x1 = std::clamp(x1, 0.0, demand);
  return {x1, demand - x1};
}

std::vector<double> project_simplex(const std::vector<double>& v, double total) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumulative += u[i];
    const double t = (cumulative - total) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

std::vector<double> path_enumeration_ue(const RoadNetwork& network, const std::vector<bool>& present,
                                        const ODMatrix& od, int max_iterations, double tolerance) {
  const std::size_t n_edges = network.edges.size();
  struct Commodity {
    double demand;
    std::vector<std::vector<int>> paths;  // edge lists
    std::vector<double> flow;
  };
  std::vector<Commodity> commodities;

  for (int o = 0; o < od.n_zones; ++o) {
    for (int d = 0; d < od.n_zones; ++d) {
      if (od.at(o, d) <= 0.0) continue;
      Commodity c{od.at(o, d), {}, {}};
      std::vector<bool> visited(network.nodes.size(), false);
      std::vector<int> stack;
      std::function<void(int)> dfs = [&](int node) {
        if (node == d) {
          c.paths.push_back(stack);
          return;
        }
        visited[node] = true;
        for (std::size_t e = 0; e < n_edges; ++e) {
          const Edge& edge = network.edges[e];
          if (!present[e] || edge.from_node != node || visited[edge.to_node]) continue;
          stack.push_back(static_cast<int>(e));
          dfs(edge.to_node);
          stack.pop_back();
        }
        visited[node] = false;
      };
      dfs(o);
      if (c.paths.empty()) throw std::runtime_error("oracle: OD pair without a path");
      c.flow.assign(c.paths.size(), c.demand / static_cast<double>(c.paths.size()));
      commodities.push_back(std::move(c));
    }
  }

  auto link_flows = [&] {
    std::vector<double> x(n_edges, 0.0);
    for (const Commodity& c : commodities) {
      for (std::size_t p = 0; p < c.paths.size(); ++p) {
        for (int e : c.paths[p]) x[e] += c.flow[p];
      }
    }
    return x;
  };
  auto link_cost = [&](std::size_t e, double x) {
    const Edge& edge = network.edges[e];
    return edge.free_flow_time * (1.0 + edge.bpr_b * std::pow(x / edge.capacity, edge.bpr_power));
  };

  // Step size from a crude bound on the path-cost Lipschitz constant.
  double slope = 0.0;
  double total_demand = 0.0;
  for (const Commodity& c : commodities) total_demand += c.demand;
  for (std::size_t e = 0; e < n_edges; ++e) {
    const Edge& edge = network.edges[e];
    const double xmax = total_demand;
    const double derivative = edge.free_flow_time * edge.bpr_b * edge.bpr_power *
                              std::pow(xmax / edge.capacity, edge.bpr_power - 1.0) / edge.capacity;
    slope += derivative;
  }
  const double step = 0.5 / std::max(slope, 1e-12);

  for (int it = 0; it < max_iterations; ++it) {
    const std::vector<double> x = link_flows();
    double change = 0.0;
    for (Commodity& c : commodities) {
      std::vector<double> trial(c.flow.size());
      for (std::size_t p = 0; p < c.paths.size(); ++p) {
        double cost = 0.0;
        for (int e : c.paths[p]) cost += link_cost(e, x[e]);
        trial[p] = c.flow[p] - step * cost;
      }
      const std::vector<double> next = project_simplex(trial, c.demand);
      for (std::size_t p = 0; p < next.size(); ++p) change = std::max(change, std::abs(next[p] - c.flow[p]));
      c.flow = next;
    }
    if (change < tolerance) break;
  }
  return link_flows();
}

std::vector<double> finite_difference_gradient(const std::function<double(const std::vector<double>&)>& f,
                                               std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

namespace {

RoadNetwork nodes_only(int n) {
  RoadNetwork net;
  net.n_zones = n;
  net.first_thru_node = 1;
  for (int i = 0; i < n; ++i) {
    Node node;
    node.node_id = i;
    node.zone_id = i;
    node.original_id = i + 1;
    net.nodes.push_back(node);
  }
  return net;
}

// Linear cost t0 + slope * x expressed as BPR with power 1.
void add_linear_edge(RoadNetwork& net, int from, int to, double t0, double slope) {
  Edge e;
  e.edge_id = static_cast<EdgeId>(net.edges.size());
  e.from_node = from;
  e.to_node = to;
  e.free_flow_time = t0;
  e.bpr_power = 1.0;
  if (slope > 0.0) {
    e.bpr_b = 1.0;
    e.capacity = t0 / slope;
  } else {
    e.bpr_b = 0.0;
    e.capacity = 1.0;
  }
  e.length = 1.0;
  net.edges.push_back(e);
}

}  // namespace

RoadNetwork two_link_network() {
  RoadNetwork net = nodes_only(2);
  add_linear_edge(net, 0, 1, 1.0, 1.0);
  add_linear_edge(net, 0, 1, 2.0, 1.0);
  return net;
}

RoadNetwork braess_network() {
  RoadNetwork net = nodes_only(4);
  add_linear_edge(net, 0, 1, 1.0, 0.1);
  add_linear_edge(net, 1, 3, 15.0, 0.0);
  add_linear_edge(net, 0, 2, 15.0, 0.0);
  add_linear_edge(net, 2, 3, 1.0, 0.1);
  add_linear_edge(net, 1, 2, 1.0, 0.0);
  return net;
}

ODMatrix single_pair_od(std::int32_t zones, std::int32_t origin, std::int32_t dest, double demand) {
  ODMatrix od(0, zones);
  od.at(origin, dest) = demand;
  return od;
}

}  // namespace metassign::oracle
