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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace metassign {

using NodeId = std::int32_t;
using EdgeId = std::int32_t;

struct Node {
  NodeId node_id = 0;
  std::optional<std::int32_t> zone_id;
  std::optional<double> x;
  std::optional<double> y;
  // Node number as it appeared in the source file (1-based for TNTP).
  std::int64_t original_id = 0;

  bool operator==(const Node&) const = default;
};

struct Edge {
  EdgeId edge_id = 0;
  NodeId from_node = 0;
  NodeId to_node = 0;
  double capacity = 0.0;        // vehicles/hour
  double free_flow_time = 0.0;  // minutes
  double bpr_b = 0.15;
  double bpr_power = 4.0;
  double length = 0.0;

  bool operator==(const Edge&) const = default;
};

/// Directed road network. Node and edge ids are dense and equal to their
/// position in the respective vectors. Zone i is node i for i < n_zones.
struct RoadNetwork {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::int32_t n_zones = 0;
  // Zones numbered below this (original numbering) cannot be passed through.
  std::int64_t first_thru_node = 1;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t edge_count() const { return edges.size(); }
  bool has_coordinates() const;

  // Throws ValidationError when an invariant is broken.
  void validate() const;

  bool operator==(const RoadNetwork&) const = default;
};

/// Dense zone-to-zone demand in trips/hour, row-major (origin, destination).
struct ODMatrix {
  std::int32_t od_id = 0;
  std::int32_t n_zones = 0;
  std::vector<double> demand;

  ODMatrix() = default;
  ODMatrix(std::int32_t id, std::int32_t zones)
      : od_id(id), n_zones(zones), demand(static_cast<std::size_t>(zones) * zones, 0.0) {}

  double& at(std::int32_t o, std::int32_t d) { return demand[static_cast<std::size_t>(o) * n_zones + d]; }
  double at(std::int32_t o, std::int32_t d) const {
    return demand[static_cast<std::size_t>(o) * n_zones + d];
  }
  std::span<const double> row(std::int32_t o) const {
    return {demand.data() + static_cast<std::size_t>(o) * n_zones, static_cast<std::size_t>(n_zones)};
  }
  double total() const;
  double max_entry() const;

  void validate() const;

  bool operator==(const ODMatrix&) const = default;
};

struct TripsFile {
  ODMatrix od;
  std::optional<double> declared_total;
};

// TNTP link file (`_net.tntp`).
RoadNetwork parse_network(std::string_view text);

// TNTP trips file (`_trips.tntp`). Unspecified pairs are zero and the
// diagonal is forced to zero.
TripsFile parse_trips(std::string_view text);

// TNTP node file (`_node.tntp`): attaches x/y coordinates by original node number.
void parse_node_coordinates(std::string_view text, RoadNetwork& network);

std::string format_network_tntp(const RoadNetwork& network);
std::string format_trips_tntp(const ODMatrix& od);
std::string format_nodes_tntp(const RoadNetwork& network);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace metassign
