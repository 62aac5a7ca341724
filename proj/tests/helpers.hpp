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

#include <string>

#include "metassign/config.hpp"
#include "metassign/dataset.hpp"
#include "metassign/scenario.hpp"

namespace metassign::testing {

// Small generated corpus on a 3x3 grid, built once per test binary.
inline const Dataset& small_dataset() {
  static const Dataset ds = [] {
    const RoadNetwork net = synthetic_grid_network(3, 3, 11, 21);
    const ODMatrix base = synthetic_base_od(net, 40.0, 21);
    GenerationConfig g;
    g.n_tasks = 8;
    g.n_ods = 10;
    g.n_test_tasks = 2;
    g.n_test_ods = 4;
    g.closure_low = 0.05;
    g.closure_high = 0.15;
    g.seed = 99;
    return generate_dataset(net, base, g);
  }();
  return ds;
}

inline std::string tntp_network(const std::string& header_extra, const std::string& rows, int nodes, int links,
                                int zones) {
  return "<NUMBER OF ZONES> " + std::to_string(zones) + "\n<NUMBER OF NODES> " + std::to_string(nodes) +
         "\n<FIRST THRU NODE> 1\n<NUMBER OF LINKS> " + std::to_string(links) + "\n" + header_extra +
         "<END OF METADATA>\n\n~ init_node term_node capacity length free_flow_time b power speed toll link_type ;\n" +
         rows;
}

inline std::string source_path(const std::string& relative) { return std::string(METASSIGN_SOURCE_DIR) + "/" + relative; }

}  // namespace metassign::testing
