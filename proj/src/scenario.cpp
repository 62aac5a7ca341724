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

#include "metassign/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "metassign/errors.hpp"
#include "metassign/rng.hpp"

namespace metassign {
namespace {

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
std::vector<double> cholesky(std::vector<double> a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) throw GenerationError("zone covariance is not positive definite");
    d = std::sqrt(d);
    a[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / d;
    }
    for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
  }
  return a;
}

double node_distance(const Node& a, const Node& b) { return std::hypot(*a.x - *b.x, *a.y - *b.y); }

}  // namespace

void GenerationConfig::validate() const {
  if (n_tasks < 1 || n_ods < 1) throw ConfigError("n_tasks and n_ods must be positive");
  if (!(closure_low >= 0.0 && closure_low <= closure_high && closure_high < 1.0)) {
    throw ConfigError("closure fraction range must satisfy 0 <= low <= high < 1");
  }
  if (!(od_perturbation.factor_low >= 0.0 && od_perturbation.factor_low <= od_perturbation.factor_high)) {
    throw ConfigError("OD perturbation factors must satisfy 0 <= low <= high");
  }
  if (n_test_tasks < 0 || n_test_tasks >= n_tasks) throw ConfigError("n_test_tasks must be below n_tasks");
  if (n_test_ods < 0 || n_test_ods >= n_ods) throw ConfigError("n_test_ods must be below n_ods");
  if (!test_task_ids.empty()) {
    if (static_cast<int>(test_task_ids.size()) != n_test_tasks) {
      throw ConfigError("test_task_ids must list exactly n_test_tasks ids");
    }
    for (auto id : test_task_ids) {
      if (id < 0 || id >= n_tasks) throw ConfigError("test task id " + std::to_string(id) + " out of range");
    }
  }
  if (closure_retries < 1) throw ConfigError("closure_retries must be positive");
  if (workers < 1) throw ConfigError("workers must be positive");
  solver.validate();
}

std::vector<double> Sample::normalized_targets() const {
  std::vector<double> out(target_flows.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = target_flows[i] / normalization.flow_scale;
  return out;
}

std::pair<std::int64_t, std::int64_t> closure_count_range(std::size_t edge_count, double low, double high) {
  const double m = static_cast<double>(edge_count);
  // The tolerance absorbs products such as 0.05 * 60 = 3.0000000000000004.
  const auto lo = static_cast<std::int64_t>(std::ceil(low * m - 1e-9));
  const auto hi = static_cast<std::int64_t>(std::floor(high * m + 1e-9));
  return {lo, hi};
}

bool demand_connected(const RoadNetwork& network, const std::vector<bool>& present, const ODMatrix& od) {
  const std::vector<double> unit(network.edge_count(), 1.0);
  for (std::int32_t o = 0; o < od.n_zones; ++o) {
    const auto row = od.row(o);
    if (std::none_of(row.begin(), row.end(), [](double v) { return v > 0.0; })) continue;
    const auto tree = shortest_path_tree(network, present, unit, o);
    for (std::int32_t d = 0; d < od.n_zones; ++d) {
      if (d != o && row[d] > 0.0 && !tree.reachable(d)) return false;
    }
  }
  return true;
}

ClosureTask sample_closure(const RoadNetwork& network, const ODMatrix& base_od, double low, double high,
                           std::mt19937_64& rng, std::int32_t task_id, int max_retries) {
  const std::size_t m = network.edge_count();
  const auto [lo, hi] = closure_count_range(m, low, high);
  ClosureTask task{task_id, std::vector<bool>(m, true)};
  if (hi < lo || hi <= 0) return task;
  const auto k = static_cast<std::size_t>(uniform_int(rng, lo, hi));
  std::vector<std::int32_t> order(m);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: the first k entries are a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(i), static_cast<std::int64_t>(m - 1)));
      std::swap(order[i], order[j]);
    }
    std::fill(task.present.begin(), task.present.end(), true);
    for (std::size_t i = 0; i < k; ++i) task.present[order[i]] = false;
    if (demand_connected(network, task.present, base_od)) return task;
  }
  throw GenerationError("closing " + std::to_string(k) + " of " + std::to_string(m) +
                        " edges (fraction range [" + std::to_string(low) + ", " + std::to_string(high) +
                        "]) disconnects demand in every one of " + std::to_string(max_retries) +
                        " attempts; the range is infeasible for this network");
}

double perturbed_entry(double base, double relative_change, double low, double high) {
  const double sign = relative_change < 0.0 ? -1.0 : 1.0;
  const double magnitude = std::clamp(std::abs(relative_change), low, high);
  return std::max(0.0, base * (1.0 + sign * magnitude));
}

ODMatrix perturb_od(const ODMatrix& base, const RoadNetwork& network, const OdPerturbation& params,
                    std::mt19937_64& rng, std::int32_t od_id) {
  const auto z = static_cast<std::size_t>(base.n_zones);
  std::vector<double> normal(z);
  for (double& v : normal) v = standard_normal(rng);

  std::vector<double> factor = normal;
  if (network.has_coordinates() && z > 1 && static_cast<std::size_t>(network.n_zones) == z) {
    double length = params.correlation_length;
    if (!(length > 0.0)) {
      double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
      for (const Node& n : network.nodes) {
        xmin = std::min(xmin, *n.x);
        xmax = std::max(xmax, *n.x);
        ymin = std::min(ymin, *n.y);
        ymax = std::max(ymax, *n.y);
      }
      length = 0.25 * std::hypot(xmax - xmin, ymax - ymin);
    }
    if (length > 0.0) {
      std::vector<double> cov(z * z);
      for (std::size_t i = 0; i < z; ++i) {
        for (std::size_t j = 0; j < z; ++j) {
          cov[i * z + j] = std::exp(-node_distance(network.nodes[i], network.nodes[j]) / length);
        }
        cov[i * z + i] += 1e-9;
      }
      const auto chol = cholesky(std::move(cov), z);
      for (std::size_t i = 0; i < z; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k <= i; ++k) s += chol[i * z + k] * normal[k];
        factor[i] = s;
      }
    }
  }

  const double sigma = 0.5 * (params.factor_low + params.factor_high);
  ODMatrix out(od_id, base.n_zones);
  for (std::int32_t o = 0; o < base.n_zones; ++o) {
    for (std::int32_t d = 0; d < base.n_zones; ++d) {
      if (o == d) continue;
      const double change = sigma * 0.5 * (factor[o] + factor[d]);
      out.at(o, d) = perturbed_entry(base.at(o, d), change, params.factor_low, params.factor_high);
    }
  }
  return out;
}

Normalization compute_normalization(const RoadNetwork& network, const ODMatrix& base_od) {
  Normalization n;
  double max_cap = 0.0;
  for (const Edge& e : network.edges) max_cap = std::max(max_cap, e.capacity);
  n.flow_scale = max_cap > 0.0 ? max_cap : 1.0;
  n.capacity_scale = n.flow_scale;
  const double max_demand = base_od.max_entry();
  n.demand_scale = max_demand > 0.0 ? max_demand : 1.0;
  std::vector<int> degree(network.node_count(), 0);
  for (const Edge& e : network.edges) {
    ++degree[e.from_node];
    ++degree[e.to_node];
  }
  const int max_degree = degree.empty() ? 0 : *std::max_element(degree.begin(), degree.end());
  n.degree_scale = max_degree > 0 ? max_degree : 1.0;
  return n;
}

Tensor build_node_features(const RoadNetwork& network, const std::vector<bool>& present, const ODMatrix& od,
                           const Normalization& normalization, bool degrees_on_open_subgraph) {
  if (od.n_zones != network.n_zones) throw DimensionError("OD zone count differs from the network");
  if (present.size() != network.edge_count()) throw DimensionError("mask length differs from the edge count");
  const std::size_t n = network.node_count();
  const auto z = static_cast<std::size_t>(od.n_zones);
  Tensor x(n, 3 + z);
  for (const Edge& e : network.edges) {
    if (degrees_on_open_subgraph && !present[e.edge_id]) continue;
    x(e.to_node, 0) += 1.0;
    x(e.from_node, 1) += 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 2) = x(i, 0) + x(i, 1);
    for (int c = 0; c < 3; ++c) x(i, c) /= normalization.degree_scale;
    if (const auto& zone = network.nodes[i].zone_id) {
      const auto row = od.row(*zone);
      for (std::size_t d = 0; d < z; ++d) x(i, 3 + d) = row[d] / normalization.demand_scale;
    }
  }
  return x;
}

Tensor build_edge_features(const RoadNetwork& network, const std::vector<bool>& present,
                           const Normalization& normalization) {
  if (present.size() != network.edge_count()) throw DimensionError("mask length differs from the edge count");
  Tensor e(network.edge_count(), 2);
  for (const Edge& edge : network.edges) {
    e(edge.edge_id, 0) = edge.capacity / normalization.capacity_scale;
    e(edge.edge_id, 1) = present[edge.edge_id] ? 1.0 : 0.0;
  }
  return e;
}

Sample make_sample(const Dataset& dataset, std::int32_t task_id, std::int32_t od_id) {
  const ClosureTask& task = dataset.task(task_id);
  const ODMatrix& od = dataset.od(od_id);
  Sample s;
  s.task_id = task_id;
  s.od_id = od_id;
  s.normalization = dataset.normalization;
  s.node_features = build_node_features(dataset.network, task.present, od, dataset.normalization,
                                        dataset.degrees_on_open_subgraph);
  s.edge_features = build_edge_features(dataset.network, task.present, dataset.normalization);
  s.target_flows = dataset.record(task_id, od_id).flows;
  return s;
}

GraphBatch make_graph_batch(const RoadNetwork& network, const std::vector<bool>& present, const Sample& sample) {
  GraphBatch b;
  b.node_features = sample.node_features;
  b.edge_features = sample.edge_features;
  b.origin.reserve(network.edge_count());
  b.dest.reserve(network.edge_count());
  for (const Edge& e : network.edges) {
    b.origin.push_back(e.from_node);
    b.dest.push_back(e.to_node);
  }
  b.present = present;
  b.targets = Tensor(network.edge_count(), 1, sample.normalized_targets());
  return b;
}

GraphBatch make_graph_batch(const Dataset& dataset, std::int32_t task_id, std::int32_t od_id) {
  return make_graph_batch(dataset.network, dataset.task(task_id).present, make_sample(dataset, task_id, od_id));
}

Dataset generate_dataset(const RoadNetwork& network, const ODMatrix& base_od, const GenerationConfig& config,
                         const ProgressCallback& progress) {
  config.validate();
  network.validate();
  base_od.validate();
  if (base_od.n_zones != network.n_zones) throw ConfigError("base OD zone count differs from the network");

  Dataset d;
  d.network = network;
  d.base_od = base_od;
  d.normalization = compute_normalization(network, base_od);
  d.degrees_on_open_subgraph = config.degrees_on_open_subgraph;

  for (int t = 0; t < config.n_tasks; ++t) {
    auto rng = make_rng(config.seed, {1, static_cast<std::uint64_t>(t)});
    d.tasks.push_back(sample_closure(network, base_od, config.closure_low, config.closure_high, rng, t,
                                     config.closure_retries));
  }
  for (int o = 0; o < config.n_ods; ++o) {
    auto rng = make_rng(config.seed, {2, static_cast<std::uint64_t>(o)});
    d.od_matrices.push_back(perturb_od(base_od, network, config.od_perturbation, rng, o));
  }

  auto draw_ids = [&](int total, int count, std::uint64_t key) {
    std::vector<std::int32_t> ids(total);
    std::iota(ids.begin(), ids.end(), 0);
    auto rng = make_rng(config.seed, {key});
    for (int i = 0; i < count; ++i) std::swap(ids[i], ids[uniform_int(rng, i, total - 1)]);
    ids.resize(count);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  d.split.test_task_ids = config.test_task_ids.empty() ? draw_ids(config.n_tasks, config.n_test_tasks, 3)
                                                       : config.test_task_ids;
  std::sort(d.split.test_task_ids.begin(), d.split.test_task_ids.end());
  d.split.test_od_ids = draw_ids(config.n_ods, config.n_test_ods, 4);
  for (int t = 0; t < config.n_tasks; ++t) {
    if (!d.is_test_task(t)) d.split.train_task_ids.push_back(t);
  }

  const std::size_t total = static_cast<std::size_t>(config.n_tasks) * config.n_ods;
  std::vector<SampleRecord> records(total);
  std::vector<std::string> failures(total);
  std::atomic<std::size_t> next{0}, done{0};
  std::mutex progress_mutex;
  SolverOptions solver = config.solver;
  solver.allow_unreachable = false;

  auto work = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const auto t = static_cast<std::int32_t>(i / config.n_ods);
      const auto o = static_cast<std::int32_t>(i % config.n_ods);
      try {
        const auto result = solve_ue(network, d.tasks[t].present, d.od_matrices[o], solver);
        records[i] = SampleRecord{t, o, result.flows, result.relative_gap, result.iterations, result.converged};
      } catch (const Error& e) {
        failures[i] = e.what();
      }
      const std::size_t finished = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(finished, total);
      }
    }
  };
  if (config.workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < config.workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < total; ++i) {
    if (!failures[i].empty()) {
      throw GenerationError("assignment for (task " + std::to_string(i / config.n_ods) + ", od " +
                            std::to_string(i % config.n_ods) + ") failed: " + failures[i]);
    }
    const auto key = std::make_pair(records[i].task_id, records[i].od_id);
    d.samples.emplace(key, std::move(records[i]));
  }
  d.validate();
  return d;
}

RoadNetwork synthetic_grid_network(int rows, int cols, int links, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw ConfigError("grid dimensions must be positive");
  auto rng = make_rng(seed, {0x67726964});
  const int n = rows * cols;
  auto id = [cols](int r, int c) { return r * cols + c; };
  std::vector<std::pair<int, int>> grid, diagonals;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) grid.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < rows) grid.emplace_back(id(r, c), id(r + 1, c));
      if (r + 1 < rows && c + 1 < cols) diagonals.emplace_back(id(r, c), id(r + 1, c + 1));
    }
  }
  if (links < n - 1 || links > static_cast<int>(grid.size() + diagonals.size())) {
    throw ConfigError("cannot build a connected grid with " + std::to_string(links) + " links");
  }
  auto connected = [n](const std::vector<std::pair<int, int>>& ls) {
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
    int components = n;
    for (auto [a, b] : ls) {
      const int ra = find(a), rb = find(b);
      if (ra != rb) {
        parent[ra] = rb;
        --components;
      }
    }
    return components == 1;
  };
  std::vector<std::pair<int, int>> chosen = grid;
  while (static_cast<int>(chosen.size()) > links) {
    const auto k = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(chosen.size()) - 1));
    auto trial = chosen;
    trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
    if (connected(trial)) chosen = std::move(trial);
  }
  for (std::size_t k = 0; static_cast<int>(chosen.size()) < links; ++k) chosen.push_back(diagonals[k]);

  RoadNetwork net;
  net.n_zones = n;
  for (int i = 0; i < n; ++i) {
    Node node;
    node.node_id = i;
    node.zone_id = i;
    node.original_id = i + 1;
    node.x = static_cast<double>(i % cols);
    node.y = static_cast<double>(i / cols);
    net.nodes.push_back(node);
  }
  for (auto [a, b] : chosen) {
    const double length = std::hypot(*net.nodes[a].x - *net.nodes[b].x, *net.nodes[a].y - *net.nodes[b].y);
    const double capacity = std::round(800.0 + 800.0 * uniform01(rng));
    // Faster roads carry more: free-flow time falls with capacity, so the
    // capacity feature carries the travel-time information as well.
    const double fft = length * 2.0 * 1200.0 / capacity;
    for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
      Edge e;
      e.edge_id = static_cast<EdgeId>(net.edges.size());
      e.from_node = from;
      e.to_node = to;
      e.capacity = capacity;
      e.free_flow_time = fft;
      e.length = length;
      net.edges.push_back(e);
    }
  }
  net.validate();
  return net;
}

ODMatrix synthetic_base_od(const RoadNetwork& network, double mean_trips, std::uint64_t seed) {
  auto rng = make_rng(seed, {0x6f64});
  ODMatrix od(0, network.n_zones);
  for (std::int32_t o = 0; o < od.n_zones; ++o) {
    for (std::int32_t d = 0; d < od.n_zones; ++d) {
      if (o != d) od.at(o, d) = std::round(mean_trips * (0.2 + 1.6 * uniform01(rng)));
    }
  }
  return od;
}

}  // namespace metassign
