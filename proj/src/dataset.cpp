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

#include "metassign/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "metassign/errors.hpp"

namespace metassign {
namespace {

using detail::ByteReader;
using detail::ByteWriter;

void put_od(ByteWriter& w, const ODMatrix& od) {
  w.put<std::int32_t>(od.od_id);
  w.put<std::int32_t>(od.n_zones);
  w.put_doubles(od.demand);
}

ODMatrix get_od(ByteReader& r) {
  ODMatrix od;
  od.od_id = r.get<std::int32_t>();
  od.n_zones = r.get<std::int32_t>();
  od.demand = r.get_doubles();
  if (od.demand.size() != static_cast<std::size_t>(od.n_zones) * od.n_zones) {
    throw IntegrityError("OD matrix payload has the wrong size");
  }
  return od;
}

template <typename T>
void put_optional(ByteWriter& w, const std::optional<T>& v) {
  w.put<std::uint8_t>(v.has_value() ? 1 : 0);
  w.put<T>(v.value_or(T{}));
}

template <typename T>
std::optional<T> get_optional(ByteReader& r) {
  const bool has = r.get<std::uint8_t>() != 0;
  const T v = r.get<T>();
  return has ? std::optional<T>(v) : std::nullopt;
}

void put_network(ByteWriter& w, const RoadNetwork& net) {
  w.put_tag("NETW");
  w.put<std::int32_t>(net.n_zones);
  w.put<std::int64_t>(net.first_thru_node);
  w.put<std::uint64_t>(net.nodes.size());
  for (const Node& n : net.nodes) {
    w.put<std::int32_t>(n.node_id);
    put_optional(w, n.zone_id);
    put_optional(w, n.x);
    put_optional(w, n.y);
    w.put<std::int64_t>(n.original_id);
  }
  w.put<std::uint64_t>(net.edges.size());
  for (const Edge& e : net.edges) {
    w.put<std::int32_t>(e.edge_id);
    w.put<std::int32_t>(e.from_node);
    w.put<std::int32_t>(e.to_node);
    w.put<double>(e.capacity);
    w.put<double>(e.free_flow_time);
    w.put<double>(e.bpr_b);
    w.put<double>(e.bpr_power);
    w.put<double>(e.length);
  }
}

RoadNetwork get_network(ByteReader& r) {
  r.expect_tag("NETW");
  RoadNetwork net;
  net.n_zones = r.get<std::int32_t>();
  net.first_thru_node = r.get<std::int64_t>();
  const auto n_nodes = r.get<std::uint64_t>();
  if (n_nodes > r.remaining()) throw IntegrityError("node count exceeds remaining bytes");
  net.nodes.resize(n_nodes);
  for (Node& n : net.nodes) {
    n.node_id = r.get<std::int32_t>();
    n.zone_id = get_optional<std::int32_t>(r);
    n.x = get_optional<double>(r);
    n.y = get_optional<double>(r);
    n.original_id = r.get<std::int64_t>();
  }
  const auto n_edges = r.get<std::uint64_t>();
  if (n_edges > r.remaining()) throw IntegrityError("edge count exceeds remaining bytes");
  net.edges.resize(n_edges);
  for (Edge& e : net.edges) {
    e.edge_id = r.get<std::int32_t>();
    e.from_node = r.get<std::int32_t>();
    e.to_node = r.get<std::int32_t>();
    e.capacity = r.get<double>();
    e.free_flow_time = r.get<double>();
    e.bpr_b = r.get<double>();
    e.bpr_power = r.get<double>();
    e.length = r.get<double>();
  }
  return net;
}

}  // namespace

std::size_t ClosureTask::closed_count() const {
  return static_cast<std::size_t>(std::count(present.begin(), present.end(), false));
}

const ClosureTask& Dataset::task(std::int32_t task_id) const {
  const auto it = std::find_if(tasks.begin(), tasks.end(), [&](const ClosureTask& t) { return t.task_id == task_id; });
  if (it == tasks.end()) throw IndexError("unknown task id " + std::to_string(task_id));
  return *it;
}

const ODMatrix& Dataset::od(std::int32_t od_id) const {
  const auto it =
      std::find_if(od_matrices.begin(), od_matrices.end(), [&](const ODMatrix& m) { return m.od_id == od_id; });
  if (it == od_matrices.end()) throw IndexError("unknown OD id " + std::to_string(od_id));
  return *it;
}

const SampleRecord& Dataset::record(std::int32_t task_id, std::int32_t od_id) const {
  const auto it = samples.find({task_id, od_id});
  if (it == samples.end()) {
    throw IndexError("no sample for (task " + std::to_string(task_id) + ", od " + std::to_string(od_id) + ")");
  }
  return it->second;
}

bool Dataset::is_test_task(std::int32_t task_id) const {
  return std::find(split.test_task_ids.begin(), split.test_task_ids.end(), task_id) != split.test_task_ids.end();
}

bool Dataset::is_test_od(std::int32_t od_id) const {
  return std::find(split.test_od_ids.begin(), split.test_od_ids.end(), od_id) != split.test_od_ids.end();
}

std::vector<std::int32_t> Dataset::train_od_ids() const {
  std::vector<std::int32_t> ids;
  for (const ODMatrix& m : od_matrices) {
    if (!is_test_od(m.od_id)) ids.push_back(m.od_id);
  }
  return ids;
}

void Dataset::validate() const {
  network.validate();
  base_od.validate();
  if (base_od.n_zones != network.n_zones) throw ValidationError("base OD zone count differs from the network");
  std::set<std::int32_t> task_ids;
  for (const ClosureTask& t : tasks) {
    if (t.present.size() != network.edge_count()) {
      throw ValidationError("task " + std::to_string(t.task_id) + " mask length differs from edge count");
    }
    if (!task_ids.insert(t.task_id).second) throw ValidationError("duplicate task id " + std::to_string(t.task_id));
  }
  std::set<std::int32_t> od_ids;
  for (const ODMatrix& m : od_matrices) {
    m.validate();
    if (m.n_zones != network.n_zones) throw ValidationError("OD zone count differs from the network");
    if (!od_ids.insert(m.od_id).second) throw ValidationError("duplicate OD id " + std::to_string(m.od_id));
  }
  for (const auto& [key, rec] : samples) {
    if (!task_ids.count(key.first) || !od_ids.count(key.second)) {
      throw ValidationError("sample references an unknown task or OD");
    }
    if (rec.task_id != key.first || rec.od_id != key.second) throw ValidationError("sample key mismatch");
    if (rec.flows.size() != network.edge_count()) throw ValidationError("sample flow vector has the wrong length");
  }
  const std::set<std::int32_t> train(split.train_task_ids.begin(), split.train_task_ids.end());
  for (std::int32_t id : split.test_task_ids) {
    if (train.count(id)) throw ValidationError("task " + std::to_string(id) + " is in both train and test splits");
    if (!task_ids.count(id)) throw ValidationError("test split references unknown task");
  }
  for (std::int32_t id : split.train_task_ids) {
    if (!task_ids.count(id)) throw ValidationError("train split references unknown task");
  }
  for (std::int32_t id : split.test_od_ids) {
    if (!od_ids.count(id)) throw ValidationError("test split references unknown OD");
  }
}

std::string serialize_dataset(const Dataset& d) {
  ByteWriter w;
  put_network(w, d.network);

  w.put_tag("BASE");
  put_od(w, d.base_od);

  w.put_tag("NORM");
  w.put<double>(d.normalization.flow_scale);
  w.put<double>(d.normalization.demand_scale);
  w.put<double>(d.normalization.capacity_scale);
  w.put<double>(d.normalization.degree_scale);
  w.put<std::uint8_t>(d.degrees_on_open_subgraph ? 1 : 0);

  w.put_tag("TASK");
  w.put<std::uint64_t>(d.tasks.size());
  for (const ClosureTask& t : d.tasks) {
    w.put<std::int32_t>(t.task_id);
    w.put<std::uint64_t>(t.present.size());
    for (bool open : t.present) w.put<std::uint8_t>(open ? 1 : 0);
  }

  w.put_tag("ODMX");
  w.put<std::uint64_t>(d.od_matrices.size());
  for (const ODMatrix& m : d.od_matrices) put_od(w, m);

  w.put_tag("SAMP");
  w.put<std::uint64_t>(d.samples.size());
  for (const auto& [key, rec] : d.samples) {
    w.put<std::int32_t>(rec.task_id);
    w.put<std::int32_t>(rec.od_id);
    w.put_doubles(rec.flows);
    w.put<double>(rec.relative_gap);
    w.put<std::int32_t>(rec.iterations);
    w.put<std::uint8_t>(rec.converged ? 1 : 0);
  }

  w.put_tag("SPLT");
  w.put_ints(d.split.train_task_ids);
  w.put_ints(d.split.test_task_ids);
  w.put_ints(d.split.test_od_ids);

  return detail::frame(kDatasetMagic, kDatasetVersion, w.bytes());
}

Dataset deserialize_dataset(const std::string& bytes) {
  ByteReader r(detail::unframe(kDatasetMagic, kDatasetVersion, bytes, "dataset"));
  Dataset d;
  d.network = get_network(r);

  r.expect_tag("BASE");
  d.base_od = get_od(r);

  r.expect_tag("NORM");
  d.normalization.flow_scale = r.get<double>();
  d.normalization.demand_scale = r.get<double>();
  d.normalization.capacity_scale = r.get<double>();
  d.normalization.degree_scale = r.get<double>();
  d.degrees_on_open_subgraph = r.get<std::uint8_t>() != 0;

  r.expect_tag("TASK");
  const auto n_tasks = r.get<std::uint64_t>();
  if (n_tasks > r.remaining()) throw IntegrityError("task count exceeds remaining bytes");
  d.tasks.resize(n_tasks);
  for (ClosureTask& t : d.tasks) {
    t.task_id = r.get<std::int32_t>();
    const auto n = r.get<std::uint64_t>();
    const auto flags = r.get_bytes(n);
    t.present.resize(n);
    for (std::size_t i = 0; i < n; ++i) t.present[i] = flags[i] != 0;
  }

  r.expect_tag("ODMX");
  const auto n_ods = r.get<std::uint64_t>();
  if (n_ods > r.remaining()) throw IntegrityError("OD count exceeds remaining bytes");
  d.od_matrices.reserve(n_ods);
  for (std::uint64_t i = 0; i < n_ods; ++i) d.od_matrices.push_back(get_od(r));

  r.expect_tag("SAMP");
  const auto n_samples = r.get<std::uint64_t>();
  if (n_samples > r.remaining()) throw IntegrityError("sample count exceeds remaining bytes");
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    SampleRecord rec;
    rec.task_id = r.get<std::int32_t>();
    rec.od_id = r.get<std::int32_t>();
    rec.flows = r.get_doubles();
    rec.relative_gap = r.get<double>();
    rec.iterations = r.get<std::int32_t>();
    rec.converged = r.get<std::uint8_t>() != 0;
    d.samples.emplace(std::make_pair(rec.task_id, rec.od_id), std::move(rec));
  }

  r.expect_tag("SPLT");
  d.split.train_task_ids = r.get_ints();
  d.split.test_task_ids = r.get_ints();
  d.split.test_od_ids = r.get_ints();
  if (!r.done()) throw IntegrityError("dataset: trailing bytes after the last section");

  try {
    d.validate();
  } catch (const ValidationError& e) {
    throw IntegrityError(std::string("dataset: decoded content is invalid: ") + e.what());
  }
  return d;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
  dataset.validate();
  const std::string bytes = serialize_dataset(dataset);
  write_text_file(path, bytes);
}

Dataset read_dataset(const std::string& path) { return deserialize_dataset(read_text_file(path)); }

}  // namespace metassign
