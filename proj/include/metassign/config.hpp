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
#include <string>

#include "metassign/gnn.hpp"
#include "metassign/meta.hpp"
#include "metassign/scenario.hpp"

namespace metassign {

struct ModelConfig {
  GnnHyper hyper;  // node_features is filled in from the dataset
  std::uint64_t init_seed = 11;
};

struct SyntheticConfig {
  int rows = 4;
  int cols = 5;
  int links = 30;
  double mean_trips = 40.0;
  std::uint64_t seed = 5;
};

/// Every tunable of a run in one document. Defaults follow the published
/// hyperparameter tables.
struct RunConfig {
  GenerationConfig generation;
  ModelConfig model;
  MetaConfig meta;
  SyntheticConfig synthetic;

  // Cross-section consistency (K + M within the training ODs, etc.).
  void validate() const;
};

/// JSON document with optional sections "generation", "model", "meta" and
/// "synthetic". Missing keys keep their defaults; unknown keys are rejected.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string format_run_config(const RunConfig& config);

}  // namespace metassign
