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

#include "metassign/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "metassign/errors.hpp"
#include "metassign/rng.hpp"
#include "metassign/scenario.hpp"

namespace metassign {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

double r_squared(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.size() != predicted.size()) throw DimensionError("r_squared: length mismatch");
  if (truth.empty()) throw MetricError("r_squared of an empty sample");
  double mean = 0.0;
  for (double v : truth) mean += v;
  mean /= static_cast<double>(truth.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
    ss_res += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
  }
  if (!(ss_tot > 0.0)) throw MetricError("r_squared is undefined when the true values have zero variance");
  return 1.0 - ss_res / ss_tot;
}

MetaTestReport meta_test(const GatedGCNParams& theta, const Dataset& dataset, const MetaConfig& config) {
  config.validate();
  if (dataset.split.test_task_ids.empty() || dataset.split.test_od_ids.empty()) {
    throw ConfigError("dataset has no reserved test split");
  }
  const auto n_test_ods = static_cast<int>(dataset.split.test_od_ids.size());
  if (config.K >= n_test_ods) {
    throw ConfigError("meta-test needs K < number of held-out ODs (K = " + std::to_string(config.K) + ", " +
                      std::to_string(n_test_ods) + " held out)");
  }
  MetaTestReport report;
  for (std::int32_t task_id : dataset.split.test_task_ids) {
    TaskEvaluation ev;
    ev.task_id = task_id;
    std::vector<std::int32_t> ods = dataset.split.test_od_ids;
    auto rng = make_rng(config.seed, {0x7465737466, static_cast<std::uint64_t>(task_id)});
    for (int i = 0; i < config.K; ++i) std::swap(ods[i], ods[uniform_int(rng, i, n_test_ods - 1)]);
    ev.support_od_ids.assign(ods.begin(), ods.begin() + config.K);
    ev.query_od_ids.assign(ods.begin() + config.K, ods.end());
    std::sort(ev.query_od_ids.begin(), ev.query_od_ids.end());

    const auto train_obj = gnn_task_objective(dataset, theta.hyper, task_id, true);
    const auto eval_obj = gnn_task_objective(dataset, theta.hyper, task_id, false);
    ev.support_loss_before = eval_obj(theta.weights, ev.support_od_ids, 0, nullptr);
    ev.query_loss_before = eval_obj(theta.weights, ev.query_od_ids, 0, nullptr);
    const AdaptResult adapted =
        inner_adapt(theta.weights, train_obj, ev.support_od_ids, config.alpha, config.inner_steps, config.clip_norm,
                    derive_seed(config.seed, {0x6164617074, static_cast<std::uint64_t>(task_id)}));
    ev.support_loss_after = eval_obj(adapted.theta, ev.support_od_ids, 0, nullptr);
    ev.query_loss = eval_obj(adapted.theta, ev.query_od_ids, 0, nullptr);

    const GatedGCNParams tuned{theta.hyper, adapted.theta};
    const double scale = dataset.normalization.flow_scale;
    std::vector<double> truth, pred;
    for (std::int32_t od : ev.query_od_ids) {
      const GraphBatch batch = make_graph_batch(dataset, task_id, od);
      const auto q = predict(tuned, batch);
      const auto& flows = dataset.record(task_id, od).flows;
      for (std::size_t e = 0; e < q.size(); ++e) {
        truth.push_back(flows[e]);
        pred.push_back(q[e] * scale);
        ev.scatter.emplace_back(flows[e], q[e] * scale);
      }
    }
    ev.n_points = static_cast<std::int64_t>(truth.size());
    ev.r_squared = r_squared(truth, pred);
    report.per_task.push_back(std::move(ev));
  }
  return report;
}

std::string report_to_json(const MetaTestReport& report) {
  nlohmann::ordered_json j;
  j["format"] = "metassign-metatest";
  j["version"] = 1;
  auto& tasks = j["tasks"] = nlohmann::ordered_json::array();
  for (const TaskEvaluation& t : report.per_task) {
    nlohmann::ordered_json e;
    e["task_id"] = t.task_id;
    e["r_squared"] = t.r_squared;
    e["n_points"] = t.n_points;
    e["support_loss_before"] = t.support_loss_before;
    e["support_loss_after"] = t.support_loss_after;
    e["query_loss_before"] = t.query_loss_before;
    e["query_loss"] = t.query_loss;
    e["support_od_ids"] = t.support_od_ids;
    e["query_od_ids"] = t.query_od_ids;
    auto& pts = e["scatter"] = nlohmann::ordered_json::array();
    for (const auto& [a, b] : t.scatter) pts.push_back({a, b});
    tasks.push_back(std::move(e));
  }
  return j.dump(1) + "\n";
}

MetaTestReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("meta-test report: ") + e.what());
  }
  if (j.value("format", "") != "metassign-metatest") throw ParseError("not a meta-test report");
  if (j.value("version", 0) != 1) throw UnsupportedVersionError("meta-test report version is not supported");
  MetaTestReport report;
  try {
    for (const auto& e : j.at("tasks")) {
      TaskEvaluation t;
      t.task_id = e.at("task_id").get<std::int32_t>();
      t.r_squared = e.at("r_squared").get<double>();
      t.n_points = e.at("n_points").get<std::int64_t>();
      t.support_loss_before = e.at("support_loss_before").get<double>();
      t.support_loss_after = e.at("support_loss_after").get<double>();
      t.query_loss_before = e.at("query_loss_before").get<double>();
      t.query_loss = e.at("query_loss").get<double>();
      t.support_od_ids = e.at("support_od_ids").get<std::vector<std::int32_t>>();
      t.query_od_ids = e.at("query_od_ids").get<std::vector<std::int32_t>>();
      for (const auto& p : e.at("scatter")) t.scatter.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      report.per_task.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("meta-test report: ") + e.what());
  }
  return report;
}

std::vector<HistoryEntry> parse_history_csv(const std::string& text) {
  std::vector<HistoryEntry> out;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("iteration", 0) == 0) continue;
    }
    HistoryEntry h;
    char c1 = 0, c2 = 0;
    std::istringstream row(line);
    if (!(row >> h.iteration >> c1 >> h.mean_query_loss >> c2 >> h.wall_time_s) || c1 != ',' || c2 != ',') {
      throw ParseError("malformed history row: " + line);
    }
    out.push_back(h);
  }
  return out;
}

std::string format_summary_csv(const MetaTestReport& report) {
  std::string out =
      "task_id,r_squared,n_points,support_loss_before,support_loss_after,query_loss_before,query_loss\n";
  for (const TaskEvaluation& t : report.per_task) {
    out += std::to_string(t.task_id) + ',' + num(t.r_squared) + ',' + std::to_string(t.n_points) + ',' +
           num(t.support_loss_before) + ',' + num(t.support_loss_after) + ',' + num(t.query_loss_before) + ',' +
           num(t.query_loss) + '\n';
  }
  return out;
}

std::string format_scatter_csv(const TaskEvaluation& task) {
  std::string out = "true_flow,predicted_flow\n";
  for (const auto& [a, b] : task.scatter) out += num(a) + ',' + num(b) + '\n';
  return out;
}

std::string render_scatter_svg(const TaskEvaluation& task) {
  constexpr double size = 480.0, margin = 50.0, plot = size - 2 * margin;
  double hi = 0.0;
  for (const auto& [a, b] : task.scatter) hi = std::max({hi, a, b});
  if (!(hi > 0.0)) hi = 1.0;
  auto px = [&](double v) { return margin + plot * v / hi; };
  auto py = [&](double v) { return size - margin - plot * v / hi; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" viewBox=\"0 0 480 480\">\n"
    << "<rect width=\"480\" height=\"480\" fill=\"white\"/>\n"
    << "<text x=\"240\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">task "
    << task.task_id << " (R2 = " << short_num(task.r_squared) << ", n = " << task.n_points << ")</text>\n"
    << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(hi) << "\" y2=\"" << py(0)
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\"" << py(hi)
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(hi) << "\" y2=\"" << py(hi)
    << "\" stroke=\"red\" stroke-dasharray=\"6,4\"/>\n"
    << "<text x=\"240\" y=\"470\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">true flow "
       "(veh/h), max "
    << short_num(hi) << "</text>\n"
    << "<text x=\"16\" y=\"240\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
       "transform=\"rotate(-90 16 240)\">predicted flow (veh/h)</text>\n";
  for (const auto& [a, b] : task.scatter) {
    s << "<circle cx=\"" << short_num(px(a)) << "\" cy=\"" << short_num(py(std::max(0.0, b)))
      << "\" r=\"2\" fill=\"steelblue\" fill-opacity=\"0.5\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string render_history_svg(std::span<const HistoryEntry> history) {
  constexpr double width = 640.0, height = 360.0, margin = 50.0;
  double hi = 0.0;
  for (const HistoryEntry& h : history) hi = std::max(hi, h.mean_query_loss);
  if (!(hi > 0.0)) hi = 1.0;
  const double n = std::max<double>(1.0, static_cast<double>(history.size()));
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\" viewBox=\"0 0 640 360\">\n"
    << "<rect width=\"640\" height=\"360\" fill=\"white\"/>\n"
    << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">mean query "
       "loss per meta-iteration (max "
    << short_num(hi) << ")</text>\n<polyline fill=\"none\" stroke=\"steelblue\" points=\"";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const double x = margin + (width - 2 * margin) * static_cast<double>(i) / n;
    const double y = height - margin - (height - 2 * margin) * history[i].mean_query_loss / hi;
    s << short_num(x) << ',' << short_num(y) << ' ';
  }
  s << "\"/>\n</svg>\n";
  return s.str();
}

std::vector<std::string> write_report(const MetaTestReport& report, std::span<const HistoryEntry> history,
                                      const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create report directory '" + out_dir + "'");
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& content) {
    const std::string path = (fs::path(out_dir) / name).string();
    write_text_file(path, content);
    written.push_back(path);
  };
  put("summary.csv", format_summary_csv(report));
  for (const TaskEvaluation& t : report.per_task) {
    put("scatter_task_" + std::to_string(t.task_id) + ".csv", format_scatter_csv(t));
    put("scatter_task_" + std::to_string(t.task_id) + ".svg", render_scatter_svg(t));
  }
  put("meta_loss_history.csv", format_history_csv(history));
  if (!history.empty()) put("meta_loss_history.svg", render_history_svg(history));
  return written;
}

}  // namespace metassign
