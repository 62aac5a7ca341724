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

#include <algorithm>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "metassign/dataset.hpp"
#include "metassign/errors.hpp"
#include "metassign/network.hpp"

using namespace metassign;
using testing::tntp_network;

TEST_CASE("a single link row maps field by field") {
  const RoadNetwork net = parse_network(tntp_network("", "1 2 1000 1 10 0.15 4 0 0 1 ;\n", 2, 1, 2));
  REQUIRE(net.node_count() == 2);
  REQUIRE(net.edge_count() == 1);
  const Edge& e = net.edges[0];
  CHECK(e.from_node == 0);
  CHECK(e.to_node == 1);
  CHECK(e.capacity == 1000.0);
  CHECK(e.length == 1.0);
  CHECK(e.free_flow_time == 10.0);
  CHECK(e.bpr_b == 0.15);
  CHECK(e.bpr_power == 4.0);
  CHECK(net.n_zones == 2);
}

TEST_CASE("an empty link section parses") {
  const RoadNetwork net = parse_network(tntp_network("", "", 3, 0, 1));
  CHECK(net.edge_count() == 0);
  CHECK(net.node_count() == 3);
}

TEST_CASE("a missing header tag is named in the error") {
  const std::string text = "<NUMBER OF ZONES> 2\n<NUMBER OF NODES> 2\n<FIRST THRU NODE> 1\n<END OF METADATA>\n"
                           "~ header\n1 2 1000 1 10 0.15 4 0 0 1 ;\n";
  try {
    parse_network(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("<NUMBER OF LINKS>") != std::string::npos);
  }
}

TEST_CASE("non-positive capacity or free-flow time reports the row") {
  const std::string rows = "1 2 1000 1 10 0.15 4 0 0 1 ;\n2 1 0 1 10 0.15 4 0 0 1 ;\n";
  try {
    parse_network(tntp_network("", rows, 2, 2, 2));
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_network(tntp_network("", "1 2 1000 1 0 0.15 4 0 0 1 ;\n", 2, 1, 2)), ValidationError);
}

TEST_CASE("link count mismatch is a parse error") {
  CHECK_THROWS_AS(parse_network(tntp_network("", "1 2 1000 1 10 0.15 4 0 0 1 ;\n", 2, 2, 2)), ParseError);
}

TEST_CASE("original node numbers map one-to-one onto dense ids") {
  const std::string rows = "1 3 900 1 5 0.15 4 0 0 1 ;\n3 2 900 1 5 0.15 4 0 0 1 ;\n2 1 900 1 5 0.15 4 0 0 1 ;\n";
  const RoadNetwork net = parse_network(tntp_network("", rows, 3, 3, 3));
  std::set<std::int64_t> originals;
  for (std::size_t i = 0; i < net.node_count(); ++i) {
    CHECK(net.nodes[i].node_id == static_cast<NodeId>(i));
    originals.insert(net.nodes[i].original_id);
  }
  CHECK(originals.size() == net.node_count());
  CHECK(net.nodes[net.edges[0].to_node].original_id == 3);
}

TEST_CASE("trips blocks fill a dense matrix") {
  const TripsFile t = parse_trips("<NUMBER OF ZONES> 2\n<TOTAL OD FLOW> 100.0\n<END OF METADATA>\n\nOrigin 1\n 2 : 100.0;\n");
  REQUIRE(t.od.n_zones == 2);
  CHECK(t.od.at(0, 0) == 0.0);
  CHECK(t.od.at(0, 1) == 100.0);
  CHECK(t.od.at(1, 0) == 0.0);
  CHECK(t.od.at(1, 1) == 0.0);
  REQUIRE(t.declared_total.has_value());
  CHECK(t.od.total() == doctest::Approx(*t.declared_total).epsilon(1e-6));
}

TEST_CASE("a trips file with only headers is all zeros") {
  const TripsFile t = parse_trips("<NUMBER OF ZONES> 3\n<TOTAL OD FLOW> 0.0\n<END OF METADATA>\n");
  CHECK(t.od.total() == 0.0);
  CHECK(t.od.demand.size() == 9);
}

TEST_CASE("trips: diagonal is forced to zero and out-of-range zones are rejected") {
  const TripsFile t = parse_trips("<NUMBER OF ZONES> 2\n<END OF METADATA>\nOrigin 1\n 1 : 5.0; 2 : 7.5;\n");
  CHECK(t.od.at(0, 0) == 0.0);
  CHECK(t.od.at(0, 1) == 7.5);
  CHECK_THROWS_AS(parse_trips("<NUMBER OF ZONES> 2\n<END OF METADATA>\nOrigin 1\n 3 : 5.0;\n"), ValidationError);
  CHECK_THROWS_AS(parse_trips("<NUMBER OF ZONES> 2\n<END OF METADATA>\nOrigin 4\n 1 : 5.0;\n"), ValidationError);
}

TEST_CASE("network, trips and node text round-trip through the writers") {
  RoadNetwork net = synthetic_grid_network(3, 4, 15, 2);
  const ODMatrix od = synthetic_base_od(net, 30.0, 2);
  RoadNetwork back = parse_network(format_network_tntp(net));
  parse_node_coordinates(format_nodes_tntp(net), back);
  CHECK(back == net);
  CHECK(parse_trips(format_trips_tntp(od)).od == od);
}

TEST_CASE("dataset round-trip is exact") {
  const Dataset& ds = testing::small_dataset();
  const std::string bytes = serialize_dataset(ds);
  CHECK(deserialize_dataset(bytes) == ds);

  const auto path = std::filesystem::temp_directory_path() / "metassign_roundtrip.bin";
  write_dataset(ds, path.string());
  CHECK(read_dataset(path.string()) == ds);
  std::filesystem::remove(path);
}

TEST_CASE("round-trip holds for datasets from many seeds") {
  const RoadNetwork net = synthetic_grid_network(2, 3, 6, 4);
  const ODMatrix base = synthetic_base_od(net, 20.0, 4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GenerationConfig g;
    g.n_tasks = 3;
    g.n_ods = 3;
    g.n_test_tasks = 1;
    g.n_test_ods = 1;
    g.closure_low = 0.0;
    g.closure_high = 0.1;
    g.seed = seed;
    const Dataset ds = generate_dataset(net, base, g);
    CHECK(deserialize_dataset(serialize_dataset(ds)) == ds);
  }
}

TEST_CASE("damaged dataset files are rejected") {
  const std::string bytes = serialize_dataset(testing::small_dataset());

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_dataset(bad_magic), IntegrityError);

  std::string bad_version = bytes;
  bad_version[4] = static_cast<char>(bad_version[4] + 1);
  CHECK_THROWS_AS(deserialize_dataset(bad_version), UnsupportedVersionError);

  CHECK_THROWS_AS(deserialize_dataset(bytes.substr(0, bytes.size() / 2)), IntegrityError);
  CHECK_THROWS_AS(deserialize_dataset(bytes.substr(0, 3)), IntegrityError);

  std::string flipped = bytes;
  flipped[bytes.size() / 2] = static_cast<char>(flipped[bytes.size() / 2] ^ 0x10);
  CHECK_THROWS_AS(deserialize_dataset(flipped), IntegrityError);
}

TEST_CASE("dataset split invariants") {
  const Dataset& ds = testing::small_dataset();
  for (auto t : ds.split.test_task_ids) CHECK(std::find(ds.split.train_task_ids.begin(), ds.split.train_task_ids.end(), t) == ds.split.train_task_ids.end());
  CHECK(ds.samples.size() == 8 * 10);
  CHECK(ds.split.test_task_ids.size() == 2);
  CHECK(ds.split.test_od_ids.size() == 4);
  CHECK(ds.train_od_ids().size() == 6);
}
