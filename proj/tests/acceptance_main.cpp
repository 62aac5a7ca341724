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

// Runs every acceptance criterion and prints one PASS/FAIL/SKIP line each.
//
// Environment:
//   METASSIGN_FULL_CORPUS   directory with the full-scale TNTP files
//   METASSIGN_ARTIFACT_DIR  where the end-to-end runs leave their files

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "acceptance.hpp"

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

}  // namespace

int main() {
  using namespace metassign::acceptance;
  const std::string artifact_dir = env_or_empty("METASSIGN_ARTIFACT_DIR");
  const auto suite = [&](bool report) {
    std::vector<CriterionResult> results;
    auto run = [&](CriterionResult r) {
      if (report) std::cout << format_line(r) << std::endl;
      results.push_back(std::move(r));
    };
    run(check_equilibrium_oracle());
    run(check_solver_soundness());
    run(check_autodiff());
    run(check_gnn_properties());
    run(check_maml());
    run(check_desk_scale(desk_scale_config(), report && !artifact_dir.empty() ? artifact_dir + "/desk" : ""));
    return results;
  };

  std::vector<CriterionResult> first = suite(true);
  const CriterionResult full = check_full_scale(env_or_empty("METASSIGN_FULL_CORPUS"),
                                                artifact_dir.empty() ? "" : artifact_dir + "/full");
  std::cout << format_line(full) << std::endl;
  const CriterionResult det = check_determinism(first, [&] { return suite(false); });
  std::cout << format_line(det) << std::endl;

  first.push_back(full);
  first.push_back(det);
  int failed = 0;
  for (const CriterionResult& r : first) failed += r.passed ? 0 : 1;
  std::cout << (failed == 0 ? "acceptance: all criteria passed" : "acceptance: " + std::to_string(failed) + " failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
