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

#include "metassign/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "metassign/errors.hpp"

namespace metassign {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> tokens_of(std::string_view line) {
  std::vector<std::string> out;
  std::string current;
  for (char c : line) {
    if (c == ' ' || c == '\t' || c == '\r' || c == ';') {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else if (c == ':') {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      out.emplace_back(":");
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

double to_double(const std::string& token, std::size_t line_no) {
  double v = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("line " + std::to_string(line_no) + ": expected a number, got '" + token + "'");
  }
  return v;
}

std::int64_t to_int(const std::string& token, std::size_t line_no) {
  const double v = to_double(token, line_no);
  if (v != std::floor(v)) {
    throw ParseError("line " + std::to_string(line_no) + ": expected an integer, got '" + token + "'");
  }
  return static_cast<std::int64_t>(v);
}

struct Metadata {
  std::map<std::string, std::string> tags;
  std::size_t body_start = 0;  // index of first line after the metadata block
};

// Reads `<TAG> value` lines. The block ends at <END OF METADATA> or at the
// first line that is neither a tag, a comment nor blank.
Metadata read_metadata(const std::vector<std::string_view>& lines) {
  Metadata meta;
  std::size_t i = 0;
  for (; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    if (line.front() != '<') break;
    const auto close = line.find('>');
    if (close == std::string_view::npos) throw ParseError("line " + std::to_string(i + 1) + ": unterminated tag");
    std::string tag(line.substr(1, close - 1));
    if (tag == "END OF METADATA") {
      ++i;
      break;
    }
    meta.tags[tag] = std::string(trim(line.substr(close + 1)));
  }
  meta.body_start = i;
  return meta;
}

std::int64_t required_int_tag(const Metadata& meta, const std::string& tag) {
  const auto it = meta.tags.find(tag);
  if (it == meta.tags.end() || it->second.empty()) throw ParseError("missing <" + tag + "> in metadata header");
  return to_int(it->second, 0);
}

}  // namespace

bool RoadNetwork::has_coordinates() const {
  return !nodes.empty() && std::all_of(nodes.begin(), nodes.end(), [](const Node& n) { return n.x && n.y; });
}

void RoadNetwork::validate() const {
  const auto n = static_cast<std::int64_t>(nodes.size());
  if (n_zones < 0 || n_zones > n) {
    throw ValidationError("n_zones " + std::to_string(n_zones) + " exceeds node count " + std::to_string(n));
  }
  for (std::int64_t i = 0; i < n; ++i) {
    const Node& node = nodes[i];
    if (node.node_id != i) throw ValidationError("node ids are not dense at position " + std::to_string(i));
    const bool should_be_zone = i < n_zones;
    if (should_be_zone != node.zone_id.has_value() || (node.zone_id && *node.zone_id != i)) {
      throw ValidationError("zone id of node " + std::to_string(i) + " is inconsistent with n_zones");
    }
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Edge& edge = edges[e];
    const std::string where = "edge " + std::to_string(e);
    if (edge.edge_id != static_cast<EdgeId>(e)) throw ValidationError(where + ": edge ids are not dense");
    if (edge.from_node < 0 || edge.from_node >= n || edge.to_node < 0 || edge.to_node >= n) {
      throw ValidationError(where + ": endpoint out of range");
    }
    if (edge.from_node == edge.to_node) throw ValidationError(where + ": self loop");
    if (!(edge.capacity > 0.0)) throw ValidationError(where + ": capacity must be positive");
    if (!(edge.free_flow_time > 0.0)) throw ValidationError(where + ": free_flow_time must be positive");
    if (!(edge.bpr_b >= 0.0) || !(edge.bpr_power >= 0.0)) throw ValidationError(where + ": negative BPR parameter");
  }
}

double ODMatrix::total() const {
  double sum = 0.0;
  for (double v : demand) sum += v;
  return sum;
}

double ODMatrix::max_entry() const {
  double m = 0.0;
  for (double v : demand) m = std::max(m, v);
  return m;
}

void ODMatrix::validate() const {
  if (n_zones < 0 || demand.size() != static_cast<std::size_t>(n_zones) * n_zones) {
    throw ValidationError("OD matrix size does not match its zone count");
  }
  for (std::int32_t o = 0; o < n_zones; ++o) {
    if (at(o, o) != 0.0) throw ValidationError("OD diagonal entry " + std::to_string(o) + " is non-zero");
    for (std::int32_t d = 0; d < n_zones; ++d) {
      const double v = at(o, d);
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError("OD entry (" + std::to_string(o) + "," + std::to_string(d) + ") is negative or non-finite");
      }
    }
  }
}

RoadNetwork parse_network(std::string_view text) {
  const auto lines = split_lines(text);
  const Metadata meta = read_metadata(lines);
  const auto n_nodes = required_int_tag(meta, "NUMBER OF NODES");
  const auto n_links = required_int_tag(meta, "NUMBER OF LINKS");
  const auto n_zones = required_int_tag(meta, "NUMBER OF ZONES");
  const auto first_thru = required_int_tag(meta, "FIRST THRU NODE");
  if (n_nodes < 0 || n_links < 0 || n_zones < 0 || n_zones > n_nodes) {
    throw ParseError("inconsistent counts in metadata header");
  }

  RoadNetwork net;
  net.n_zones = static_cast<std::int32_t>(n_zones);
  net.first_thru_node = first_thru;
  net.nodes.resize(static_cast<std::size_t>(n_nodes));
  for (std::int64_t i = 0; i < n_nodes; ++i) {
    Node& node = net.nodes[i];
    node.node_id = static_cast<NodeId>(i);
    node.original_id = i + 1;
    if (i < n_zones) node.zone_id = static_cast<std::int32_t>(i);
  }

  std::size_t row = 0;
  for (std::size_t i = meta.body_start; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '~') continue;
    const auto tok = tokens_of(line);
    if (tok.empty()) continue;
    ++row;
    const std::size_t line_no = i + 1;
    const std::string where = "link row " + std::to_string(row) + " (line " + std::to_string(line_no) + ")";
    if (tok.size() < 7) throw ParseError(where + ": expected at least 7 columns");
    const auto from = to_int(tok[0], line_no);
    const auto to = to_int(tok[1], line_no);
    if (from < 1 || from > n_nodes || to < 1 || to > n_nodes) {
      throw ValidationError(where + ": node number out of range");
    }
    Edge edge;
    edge.edge_id = static_cast<EdgeId>(net.edges.size());
    edge.from_node = static_cast<NodeId>(from - 1);
    edge.to_node = static_cast<NodeId>(to - 1);
    edge.capacity = to_double(tok[2], line_no);
    edge.length = to_double(tok[3], line_no);
    edge.free_flow_time = to_double(tok[4], line_no);
    edge.bpr_b = to_double(tok[5], line_no);
    edge.bpr_power = to_double(tok[6], line_no);
    if (!(edge.capacity > 0.0)) throw ValidationError(where + ": capacity must be positive");
    if (!(edge.free_flow_time > 0.0)) throw ValidationError(where + ": free flow time must be positive");
    if (edge.bpr_b < 0.0 || edge.bpr_power < 0.0) throw ValidationError(where + ": negative BPR parameter");
    if (edge.from_node == edge.to_node) throw ValidationError(where + ": self loop");
    net.edges.push_back(edge);
  }
  if (static_cast<std::int64_t>(net.edges.size()) != n_links) {
    throw ParseError("<NUMBER OF LINKS> declares " + std::to_string(n_links) + " links but " +
                     std::to_string(net.edges.size()) + " rows were found");
  }
  net.validate();
  return net;
}

TripsFile parse_trips(std::string_view text) {
  const auto lines = split_lines(text);
  const Metadata meta = read_metadata(lines);
  const auto n_zones = required_int_tag(meta, "NUMBER OF ZONES");
  if (n_zones < 0) throw ParseError("negative <NUMBER OF ZONES>");

  TripsFile out;
  out.od = ODMatrix(0, static_cast<std::int32_t>(n_zones));
  if (const auto it = meta.tags.find("TOTAL OD FLOW"); it != meta.tags.end() && !it->second.empty()) {
    out.declared_total = to_double(it->second, 0);
  }

  std::optional<std::int64_t> origin;
  for (std::size_t i = meta.body_start; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '~') continue;
    const std::size_t line_no = i + 1;
    const auto tok = tokens_of(line);
    std::size_t k = 0;
    while (k < tok.size()) {
      if (tok[k] == "Origin") {
        if (k + 1 >= tok.size()) throw ParseError("line " + std::to_string(line_no) + ": Origin without number");
        origin = to_int(tok[k + 1], line_no);
        if (*origin < 1 || *origin > n_zones) {
          throw ValidationError("line " + std::to_string(line_no) + ": origin " + tok[k + 1] + " out of range");
        }
        k += 2;
        continue;
      }
      if (!origin) throw ParseError("line " + std::to_string(line_no) + ": destination entry before any Origin");
      if (k + 2 >= tok.size() || tok[k + 1] != ":") {
        throw ParseError("line " + std::to_string(line_no) + ": expected 'dest : flow'");
      }
      const auto dest = to_int(tok[k], line_no);
      const double flow = to_double(tok[k + 2], line_no);
      if (dest < 1 || dest > n_zones) {
        throw ValidationError("line " + std::to_string(line_no) + ": destination " + tok[k] + " out of range");
      }
      if (!(flow >= 0.0) || !std::isfinite(flow)) {
        throw ValidationError("line " + std::to_string(line_no) + ": negative or non-finite flow");
      }
      if (dest != *origin) out.od.at(static_cast<std::int32_t>(*origin - 1), static_cast<std::int32_t>(dest - 1)) = flow;
      k += 3;
    }
  }
  return out;
}

void parse_node_coordinates(std::string_view text, RoadNetwork& network) {
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '~' || line.front() == '<') continue;
    const auto tok = tokens_of(line);
    if (tok.size() < 3) continue;
    // Header line, e.g. "Node X Y ;"
    if (!std::isdigit(static_cast<unsigned char>(tok[0][0])) && tok[0][0] != '-') continue;
    const std::size_t line_no = i + 1;
    const auto id = to_int(tok[0], line_no);
    const auto it = std::find_if(network.nodes.begin(), network.nodes.end(),
                                 [id](const Node& n) { return n.original_id == id; });
    if (it == network.nodes.end()) {
      throw ValidationError("line " + std::to_string(line_no) + ": unknown node " + tok[0]);
    }
    it->x = to_double(tok[1], line_no);
    it->y = to_double(tok[2], line_no);
  }
}

std::string format_network_tntp(const RoadNetwork& network) {
  std::ostringstream out;
  out.precision(17);
  out << "<NUMBER OF ZONES> " << network.n_zones << "\n"
      << "<NUMBER OF NODES> " << network.nodes.size() << "\n"
      << "<FIRST THRU NODE> " << network.first_thru_node << "\n"
      << "<NUMBER OF LINKS> " << network.edges.size() << "\n"
      << "<END OF METADATA>\n\n\n"
      << "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n";
  for (const Edge& e : network.edges) {
    out << '\t' << network.nodes[e.from_node].original_id << '\t' << network.nodes[e.to_node].original_id << '\t'
        << e.capacity << '\t' << e.length << '\t' << e.free_flow_time << '\t' << e.bpr_b << '\t' << e.bpr_power
        << "\t0\t0\t1\t;\n";
  }
  return out.str();
}

std::string format_trips_tntp(const ODMatrix& od) {
  std::ostringstream out;
  out.precision(17);
  out << "<NUMBER OF ZONES> " << od.n_zones << "\n"
      << "<TOTAL OD FLOW> " << od.total() << "\n"
      << "<END OF METADATA>\n\n";
  for (std::int32_t o = 0; o < od.n_zones; ++o) {
    out << "\nOrigin " << (o + 1) << "\n";
    for (std::int32_t d = 0; d < od.n_zones; ++d) {
      out << "    " << (d + 1) << " : " << od.at(o, d) << ";";
      if (d % 5 == 4 || d + 1 == od.n_zones) out << "\n";
    }
  }
  return out.str();
}

std::string format_nodes_tntp(const RoadNetwork& network) {
  std::ostringstream out;
  out.precision(17);
  out << "Node\tX\tY\t;\n";
  for (const Node& n : network.nodes) {
    out << n.original_id << '\t' << n.x.value_or(0.0) << '\t' << n.y.value_or(0.0) << "\t;\n";
  }
  return out.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace metassign
