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
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "metassign/network.hpp"

namespace metassign {

/// A closure pattern over the base network; the unit of meta-learning.
struct ClosureTask {
  std::int32_t task_id = 0;
  std::vector<bool> present;  // one flag per edge, true = open

  std::size_t closed_count() const;
  bool operator==(const ClosureTask&) const = default;
};

struct Normalization {
  double flow_scale = 1.0;      // vehicles/hour
  double demand_scale = 1.0;    // trips/hour
  double capacity_scale = 1.0;  // vehicles/hour
  double degree_scale = 1.0;    // max total degree of the base network

  bool operator==(const Normalization&) const = default;
};

/// Stored ground truth for one (task, OD) assignment. Feature tensors are
/// rebuilt on demand from the task mask and the OD matrix (see make_sample).
struct SampleRecord {
  std::int32_t task_id = 0;
  std::int32_t od_id = 0;
  std::vector<double> flows;  // raw vehicles/hour, one per edge
  double relative_gap = 0.0;
  std::int32_t iterations = 0;
  bool converged = false;

  bool operator==(const SampleRecord&) const = default;
};

struct Split {
  std::vector<std::int32_t> train_task_ids;
  std::vector<std::int32_t> test_task_ids;
  std::vector<std::int32_t> test_od_ids;

  bool operator==(const Split&) const = default;
};

struct Dataset {
  RoadNetwork network;
  ODMatrix base_od;
  std::vector<ClosureTask> tasks;
  std::vector<ODMatrix> od_matrices;
  std::map<std::pair<std::int32_t, std::int32_t>, SampleRecord> samples;
  Split split;
  Normalization normalization;
  bool degrees_on_open_subgraph = true;

  const ClosureTask& task(std::int32_t task_id) const;
  const ODMatrix& od(std::int32_t od_id) const;
  const SampleRecord& record(std::int32_t task_id, std::int32_t od_id) const;

  bool is_test_task(std::int32_t task_id) const;
  bool is_test_od(std::int32_t od_id) const;
  // OD ids available for training (every OD not reserved for testing).
  std::vector<std::int32_t> train_od_ids() const;

  void validate() const;

  bool operator==(const Dataset&) const = default;
};

inline constexpr char kDatasetMagic[4] = {'M', 'A', 'S', 'G'};
inline constexpr std::uint32_t kDatasetVersion = 1;

std::string serialize_dataset(const Dataset& dataset);
Dataset deserialize_dataset(const std::string& bytes);

void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace metassign
