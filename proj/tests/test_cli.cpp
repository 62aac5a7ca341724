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
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "metassign/evaluate.hpp"
#include "metassign/network.hpp"

using namespace metassign;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "metassign");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace

TEST_CASE("usage errors exit with status 2") {
  const Run none = run({});
  CHECK(none.code == 2);
  CHECK(none.err.find("usage") != std::string::npos);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"assign", "--bogus"}).code == 2);
  const Run missing = run({"meta-test", "--data", testing::source_path("configs/smoke.json"), "--out", "x.json"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--checkpoint") != std::string::npos);
}

TEST_CASE("library errors carry a machine-readable prefix and exit 1") {
  const fs::path dir = fs::temp_directory_path() / "metassign_unit_cli_err";
  fs::create_directories(dir);
  const fs::path junk = dir / "junk.bin";
  write_text_file(junk.string(), "definitely not a dataset");
  const Run r = run({"meta-train", "--data", junk.string(), "--out", (dir / "ckpt.bin").string()});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error[integrity]", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  const fs::path bad_config = dir / "bad.json";
  write_text_file(bad_config.string(), R"({"meta": {"gamma": 3}})");
  const Run c = run({"print-config", "--config", bad_config.string()});
  CHECK(c.code == 1);
  CHECK(c.err.rfind("error[config]", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("print-config reproduces the shipped defaults") {
  const Run r = run({"print-config"});
  CHECK(r.code == 0);
  CHECK(r.out == read_text_file(testing::source_path("configs/full_scale.json")));
}

TEST_CASE("selftest passes on a clean checkout") {
  const Run r = run({"selftest"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("assign prints per-edge flows") {
  const fs::path dir = fs::temp_directory_path() / "metassign_unit_cli_assign";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string prefix = (dir / "grid").string();
  REQUIRE(run({"synth", "--rows", "2", "--cols", "3", "--links", "7", "--out-prefix", prefix}).code == 0);
  const Run r = run({"assign", "--net", prefix + "_net.tntp", "--trips", prefix + "_trips.tntp", "--method", "fw"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("edge_id,from,to,flow,cost,gap\n", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 15);
  fs::remove_all(dir);
}

TEST_CASE("end-to-end smoke run") {
  const fs::path dir = fs::temp_directory_path() / "metassign_unit_cli_smoke";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string config = testing::source_path("configs/smoke.json");
  const std::string prefix = (dir / "net").string();
  const std::string data = (dir / "data.masg").string();
  const std::string ckpt = (dir / "theta.mawt").string();
  const std::string history = (dir / "history.csv").string();
  const std::string report = (dir / "report.json").string();

  REQUIRE(run({"synth", "--config", config, "--out-prefix", prefix}).code == 0);
  const RoadNetwork net = parse_network(read_text_file(prefix + "_net.tntp"));
  CHECK(net.node_count() == 10);

  REQUIRE(run({"generate", "--config", config, "--net", prefix + "_net.tntp", "--trips", prefix + "_trips.tntp",
               "--nodes", prefix + "_node.tntp", "--out", data})
              .code == 0);
  REQUIRE(run({"meta-train", "--config", config, "--data", data, "--out", ckpt, "--history", history}).code == 0);
  CHECK(parse_history_csv(read_text_file(history)).size() == 50);
  const Run test = run({"meta-test", "--config", config, "--data", data, "--checkpoint", ckpt, "--out", report,
                        "--report-dir", (dir / "report").string(), "--history", history});
  REQUIRE(test.code == 0);
  const MetaTestReport parsed = report_from_json(read_text_file(report));
  CHECK(parsed.per_task.size() == 2);
  CHECK(fs::exists(dir / "report" / "summary.csv"));
  CHECK(run({"report", "--report", report, "--history", history, "--out", (dir / "again").string()}).code == 0);
  CHECK(read_text_file((dir / "again" / "summary.csv").string()) ==
        read_text_file((dir / "report" / "summary.csv").string()));
  fs::remove_all(dir);
}
