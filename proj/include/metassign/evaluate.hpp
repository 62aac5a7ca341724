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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metassign/dataset.hpp"
#include "metassign/gnn.hpp"
#include "metassign/meta.hpp"

namespace metassign {

/// Coefficient of determination 1 - SS_res / SS_tot about the mean of `truth`.
double r_squared(std::span<const double> truth, std::span<const double> predicted);

struct TaskEvaluation {
  std::int32_t task_id = 0;
  double r_squared = 0.0;
  std::int64_t n_points = 0;
  double support_loss_before = 0.0;
  double support_loss_after = 0.0;
  double query_loss_before = 0.0;  // query loss of the unadapted parameters
  double query_loss = 0.0;         // query loss after one adaptation round
  std::vector<std::int32_t> support_od_ids;
  std::vector<std::int32_t> query_od_ids;
  // (true flow, predicted flow) in vehicles/hour over every (query OD, edge).
  std::vector<std::pair<double, double>> scatter;

  bool operator==(const TaskEvaluation&) const = default;
};

struct MetaTestReport {
  std::vector<TaskEvaluation> per_task;

  bool operator==(const MetaTestReport&) const = default;
};

/// Held-out protocol: per test task, adapt with one round of inner-loop steps
/// on K test-OD assignments, then score the remaining test ODs.
MetaTestReport meta_test(const GatedGCNParams& theta, const Dataset& dataset, const MetaConfig& config);

std::string report_to_json(const MetaTestReport& report);
MetaTestReport report_from_json(const std::string& text);

std::vector<HistoryEntry> parse_history_csv(const std::string& text);

std::string format_summary_csv(const MetaTestReport& report);
std::string format_scatter_csv(const TaskEvaluation& task);
std::string render_scatter_svg(const TaskEvaluation& task);
std::string render_history_svg(std::span<const HistoryEntry> history);

/// Writes summary.csv, scatter_task_<id>.csv/.svg per task, and the meta-loss
/// history (CSV, plus an SVG curve when non-empty). Returns the written paths.
std::vector<std::string> write_report(const MetaTestReport& report, std::span<const HistoryEntry> history,
                                      const std::string& out_dir);

}  // namespace metassign
