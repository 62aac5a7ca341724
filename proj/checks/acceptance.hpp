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

#include <functional>
#include <string>
#include <vector>

#include "metassign/config.hpp"

namespace metassign::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
  double seconds = 0.0;
  double time_limit_s = 0.0;  // 0 = no limit
  // Bytes that must be reproduced exactly by a second run with the same seeds.
  std::string artifact;
};

CriterionResult check_equilibrium_oracle();
CriterionResult check_solver_soundness();
CriterionResult check_autodiff();
CriterionResult check_gnn_properties(int graphs = 100);
CriterionResult check_maml();

/// Configuration of the small end-to-end reproduction on a synthetic grid.
RunConfig desk_scale_config();
/// Synthetic network, generation, meta-training and meta-test. Writes the
/// intermediate files into `artifact_dir` when it is non-empty.
CriterionResult check_desk_scale(const RunConfig& config, const std::string& artifact_dir = "");

/// Full corpus run; skipped unless `corpus_dir` holds the TNTP network,
/// trips and node files.
CriterionResult check_full_scale(const std::string& corpus_dir, const std::string& artifact_dir = "");

/// Runs `suite` again and compares every artifact with `first`.
CriterionResult check_determinism(const std::vector<CriterionResult>& first,
                                  const std::function<std::vector<CriterionResult>()>& suite);

/// "PASS [1] name (0.12 s): detail"
std::string format_line(const CriterionResult& result);

}  // namespace metassign::acceptance
