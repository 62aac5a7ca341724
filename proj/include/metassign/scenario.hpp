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
#include <functional>
#include <random>
#include <vector>

#include "metassign/assign.hpp"
#include "metassign/dataset.hpp"
#include "metassign/gnn.hpp"
#include "metassign/network.hpp"
#include "metassign/tensor.hpp"

namespace metassign {

struct OdPerturbation {
  double factor_low = 0.15;
  double factor_high = 0.70;
  // Length scale of the exponential zone-factor correlation, in coordinate
  // units. Values <= 0 select a quarter of the bounding-box diagonal.
  double correlation_length = 0.0;
};

struct GenerationConfig {
  int n_tasks = 336;
  int n_ods = 74;
  double closure_low = 0.05;
  double closure_high = 0.30;
  OdPerturbation od_perturbation;
  std::uint64_t seed = 2024;
  int n_test_tasks = 3;
  int n_test_ods = 25;
  // Optional explicit held-out task ids; drawn from the seed when empty.
  std::vector<std::int32_t> test_task_ids;
  int closure_retries = 1000;
  bool degrees_on_open_subgraph = true;
  SolverOptions solver;
  int workers = 1;

  void validate() const;
};

/// One (task, OD) pair with materialized features.
struct Sample {
  std::int32_t task_id = 0;
  std::int32_t od_id = 0;
  Tensor node_features;  // |N| x (3 + Z): in, out, total degree, scaled OD row
  Tensor edge_features;  // |E| x 2: scaled capacity, present flag
  std::vector<double> target_flows;  // raw vehicles/hour
  Normalization normalization;

  std::vector<double> normalized_targets() const;
};

/// Inclusive closed-edge count range [ceil(low*|E|), floor(high*|E|)].
std::pair<std::int64_t, std::int64_t> closure_count_range(std::size_t edge_count, double low, double high);

/// True when every zone pair with positive demand is connected over open edges.
bool demand_connected(const RoadNetwork& network, const std::vector<bool>& present, const ODMatrix& od);

ClosureTask sample_closure(const RoadNetwork& network, const ODMatrix& base_od, double low, double high,
                           std::mt19937_64& rng, std::int32_t task_id = 0, int max_retries = 1000);

/// Applies a relative change to a demand entry, clamping the change magnitude
/// to [low, high] while keeping its sign. The result is never negative.
double perturbed_entry(double base, double relative_change, double low, double high);

ODMatrix perturb_od(const ODMatrix& base, const RoadNetwork& network, const OdPerturbation& params,
                    std::mt19937_64& rng, std::int32_t od_id = 0);

Normalization compute_normalization(const RoadNetwork& network, const ODMatrix& base_od);

Tensor build_node_features(const RoadNetwork& network, const std::vector<bool>& present, const ODMatrix& od,
                           const Normalization& normalization, bool degrees_on_open_subgraph = true);

Tensor build_edge_features(const RoadNetwork& network, const std::vector<bool>& present,
                           const Normalization& normalization);

Sample make_sample(const Dataset& dataset, std::int32_t task_id, std::int32_t od_id);

GraphBatch make_graph_batch(const RoadNetwork& network, const std::vector<bool>& present, const Sample& sample);
GraphBatch make_graph_batch(const Dataset& dataset, std::int32_t task_id, std::int32_t od_id);

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

Dataset generate_dataset(const RoadNetwork& network, const ODMatrix& base_od, const GenerationConfig& config,
                         const ProgressCallback& progress = {});

/// Grid road network with unit spacing; each undirected link becomes two
/// directed edges. `links` below the full grid count removes random links
/// while keeping the grid connected; above it adds diagonals.
RoadNetwork synthetic_grid_network(int rows, int cols, int links, std::uint64_t seed);

/// Random all-pairs demand with mean `mean_trips` per zone pair.
ODMatrix synthetic_base_od(const RoadNetwork& network, double mean_trips, std::uint64_t seed);

}  // namespace metassign
