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

#include "metassign/gnn.hpp"

#include <cmath>

#include "binary_io.hpp"
#include "metassign/errors.hpp"
#include "metassign/network.hpp"
#include "metassign/rng.hpp"

namespace metassign {
namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w(fan_in, fan_out);
  for (double& v : w.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
  return w;
}

Var affine(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

}  // namespace

void GnnHyper::validate() const {
  if (hidden <= 0) throw ConfigError("hidden width must be positive");
  if (layers < 0) throw ConfigError("layer count must be non-negative");
  if (node_features <= 0 || edge_features <= 0) throw ConfigError("feature widths must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

void GraphBatch::validate() const {
  const std::size_t e = origin.size();
  if (dest.size() != e || present.size() != e || edge_features.rows() != e) {
    throw DimensionError("graph batch edge arrays disagree in length");
  }
  if (targets.size() != 0 && (targets.rows() != e || targets.cols() != 1)) {
    throw DimensionError("targets must be |E| x 1, got " + targets.shape_string());
  }
  for (std::size_t k = 0; k < e; ++k) {
    if (origin[k] < 0 || dest[k] < 0 || static_cast<std::size_t>(origin[k]) >= node_count() ||
        static_cast<std::size_t>(dest[k]) >= node_count()) {
      throw IndexError("edge " + std::to_string(k) + " endpoint out of range");
    }
  }
}

GatedGCNParams init_params(std::uint64_t seed, const GnnHyper& hyper) {
  hyper.validate();
  auto rng = make_rng(seed, {0x6e6e});
  const auto h = static_cast<std::size_t>(hyper.hidden);
  GatedGCNParams p;
  p.hyper = hyper;
  auto& w = p.weights;
  w.push_back(glorot(hyper.node_features, h, rng));
  w.emplace_back(1, h);
  w.push_back(glorot(hyper.edge_features, h, rng));
  w.emplace_back(1, h);
  for (int l = 0; l < hyper.layers; ++l) {
    w.push_back(glorot(h, h, rng));  // W_e
    w.push_back(glorot(h, h, rng));  // W_dst
    w.push_back(glorot(h, h, rng));  // W_org
    w.emplace_back(1, h);            // b_gate
    w.push_back(glorot(h, h, rng));  // W_m
    w.emplace_back(1, h);            // b_msg
    w.push_back(glorot(h, h, rng));  // W_self
    w.emplace_back(1, h);            // b_self
  }
  w.push_back(glorot(3 * h, h, rng));
  w.emplace_back(1, h);
  w.push_back(glorot(h, h, rng));
  w.emplace_back(1, h);
  w.push_back(glorot(h, 1, rng));
  w.emplace_back(1, 1);
  return p;
}

Encoded encode(const GraphBatch& batch, std::span<const Var> w, const GnnHyper& hyper) {
  if (batch.node_features.cols() != static_cast<std::size_t>(hyper.node_features) ||
      batch.edge_features.cols() != static_cast<std::size_t>(hyper.edge_features)) {
    throw DimensionError("feature widths " + batch.node_features.shape_string() + " / " +
                         batch.edge_features.shape_string() + " do not match the encoders");
  }
  Tape& tape = w[0].tape();
  const Var x = tape.constant(batch.node_features);
  const Var e = tape.constant(batch.edge_features);
  return {affine(x, w[0], w[1]), affine(e, w[2], w[3])};
}

LayerOutput mpnn_layer(Var x_h, Var e_h, const GraphBatch& batch, std::span<const Var> lw, const GnnHyper& hyper,
                       std::mt19937_64& rng, bool train) {
  // Node-level projections gathered per edge equal the per-edge products row for row.
  const Var dst_part = gather_rows(matmul(x_h, lw[kWdst]), batch.dest);
  const Var org_part = gather_rows(matmul(x_h, lw[kWorg]), batch.origin);
  const Var gate_pre = add_bias(add(add(matmul(e_h, lw[kWe]), dst_part), org_part), lw[kBgate]);
  const Var gate = mask_rows(sigmoid(gate_pre), batch.present);
  const Var msg_src = gather_rows(add_bias(matmul(x_h, lw[kWm]), lw[kBmsg]), batch.origin);
  const Var msg = mask_rows(hadamard(msg_src, gate), batch.present);

  const std::size_t n = batch.node_count();
  const Var numer = segment_sum(msg, batch.dest, n);
  const Var denom = add_scalar(segment_sum(gate, batch.dest, n), hyper.epsilon);
  const Var agg = divide(numer, denom);

  Var out = add(affine(x_h, lw[kWself], lw[kBself]), agg);
  if (hyper.relu_after_update) out = relu(out);
  out = dropout(out, hyper.dropout, rng, train);
  if (hyper.residual) out = add(x_h, out);

  Var edges = e_h;
  if (hyper.update_edges) edges = add(e_h, relu(gate_pre));
  return {out, edges};
}

Var decode(Var x_final, Var e_h, const GraphBatch& batch, std::span<const Var> dw, const GnnHyper& hyper) {
  const Var parts[] = {gather_rows(x_final, batch.origin), gather_rows(x_final, batch.dest), e_h};
  const Var z = concat(parts, 1);
  const Var h1 = relu(affine(z, dw[0], dw[1]));
  const Var h2 = relu(affine(h1, dw[2], dw[3]));
  Var out = affine(h2, dw[4], dw[5]);
  if (hyper.mask_output) out = mask_rows(out, batch.present);
  return out;
}

Var forward(const GraphBatch& batch, std::span<const Var> w, const GnnHyper& hyper, std::mt19937_64& rng,
            bool train) {
  if (w.size() != GatedGCNParams::tensor_count(hyper)) throw DimensionError("parameter list has the wrong length");
  batch.validate();
  Encoded enc = encode(batch, w, hyper);
  Var x = enc.nodes;
  Var e = enc.edges;
  for (int l = 0; l < hyper.layers; ++l) {
    const auto layer = w.subspan(GatedGCNParams::layer_offset(l), GatedGCNParams::kPerLayer);
    LayerOutput next = mpnn_layer(x, e, batch, layer, hyper, rng, train);
    x = next.nodes;
    e = next.edges;
  }
  return decode(x, e, batch, w.subspan(GatedGCNParams::layer_offset(hyper.layers), 6), hyper);
}

Var task_loss(Var predictions, Var targets) {
  if (predictions.value().size() != targets.value().size()) {
    throw DimensionError("task_loss: " + predictions.value().shape_string() + " vs " +
                         targets.value().shape_string());
  }
  return smooth_l1(predictions, targets, 1.0);
}

double batch_loss(const GnnHyper& hyper, const ParamList& weights, std::span<const GraphBatch> batches, bool train,
                  std::uint64_t stream, ParamList* grad) {
  if (batches.empty()) throw ContractError("batch_loss over zero samples");
  Tape tape;
  const auto w = tape.variables(weights);
  std::vector<Var> losses;
  losses.reserve(batches.size());
  for (std::size_t s = 0; s < batches.size(); ++s) {
    auto rng = make_rng(stream, {s});
    const Var pred = forward(batches[s], w, hyper, rng, train);
    losses.push_back(task_loss(pred, tape.constant(batches[s].targets)));
  }
  const Var total = mean(concat(losses, 0));
  if (grad) *grad = tape.gradients(total, w);
  return total.value().item();
}

std::vector<double> predict(const GatedGCNParams& params, const GraphBatch& batch) {
  Tape tape;
  std::vector<Var> w;
  w.reserve(params.weights.size());
  for (const Tensor& t : params.weights) w.push_back(tape.constant(t));
  std::mt19937_64 rng(0);
  const Var out = forward(batch, w, params.hyper, rng, false);
  const auto v = out.value().values();
  return {v.begin(), v.end()};
}

std::string serialize_params(const GatedGCNParams& params) {
  detail::ByteWriter w;
  const GnnHyper& h = params.hyper;
  w.put<std::int32_t>(h.node_features);
  w.put<std::int32_t>(h.edge_features);
  w.put<std::int32_t>(h.hidden);
  w.put<std::int32_t>(h.layers);
  w.put<double>(h.dropout);
  w.put<double>(h.epsilon);
  w.put<std::uint8_t>(h.relu_after_update);
  w.put<std::uint8_t>(h.update_edges);
  w.put<std::uint8_t>(h.residual);
  w.put<std::uint8_t>(h.mask_output);
  w.put<std::uint64_t>(params.weights.size());
  for (const Tensor& t : params.weights) {
    w.put<std::uint64_t>(t.rows());
    w.put<std::uint64_t>(t.cols());
    w.put_doubles(t.values());
  }
  return detail::frame(kCheckpointMagic, kCheckpointVersion, w.bytes());
}

GatedGCNParams deserialize_params(const std::string& bytes) {
  detail::ByteReader r(detail::unframe(kCheckpointMagic, kCheckpointVersion, bytes, "checkpoint"));
  GatedGCNParams p;
  GnnHyper& h = p.hyper;
  h.node_features = r.get<std::int32_t>();
  h.edge_features = r.get<std::int32_t>();
  h.hidden = r.get<std::int32_t>();
  h.layers = r.get<std::int32_t>();
  h.dropout = r.get<double>();
  h.epsilon = r.get<double>();
  h.relu_after_update = r.get<std::uint8_t>() != 0;
  h.update_edges = r.get<std::uint8_t>() != 0;
  h.residual = r.get<std::uint8_t>() != 0;
  h.mask_output = r.get<std::uint8_t>() != 0;
  const auto count = r.get<std::uint64_t>();
  if (count != GatedGCNParams::tensor_count(h)) throw IntegrityError("checkpoint: tensor count does not match hyper block");
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    auto values = r.get_doubles();
    if (values.size() != rows * cols) throw IntegrityError("checkpoint: tensor payload has the wrong size");
    p.weights.emplace_back(rows, cols, std::move(values));
  }
  if (!r.done()) throw IntegrityError("checkpoint: trailing bytes");
  const GatedGCNParams shape_ref = init_params(0, h);
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    if (!p.weights[i].same_shape(shape_ref.weights[i])) throw IntegrityError("checkpoint: tensor shape mismatch");
  }
  return p;
}

void write_checkpoint(const GatedGCNParams& params, const std::string& path) {
  write_text_file(path, serialize_params(params));
}

GatedGCNParams read_checkpoint(const std::string& path) { return deserialize_params(read_text_file(path)); }

}  // namespace metassign
