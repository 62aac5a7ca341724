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
#include <random>
#include <span>
#include <string>
#include <vector>

#include "metassign/tensor.hpp"

namespace metassign {

struct GnnHyper {
  int node_features = 0;  // 3 + number of zones
  int edge_features = 2;
  int hidden = 192;
  int layers = 6;
  double dropout = 0.01;
  double epsilon = 1e-6;
  bool relu_after_update = true;
  // Conventional gated-GCN edge update e <- e + relu(gate pre-activation).
  bool update_edges = false;
  bool residual = false;
  bool mask_output = true;

  void validate() const;
  bool operator==(const GnnHyper&) const = default;
};

/// Trainable weights in a fixed order:
///   0 node encoder W (F x H)     1 node encoder b (1 x H)
///   2 edge encoder W (2 x H)     3 edge encoder b (1 x H)
///   per layer l, starting at 4 + 8l:
///     W_e, W_dst, W_org, b_gate, W_m, b_msg, W_self, b_self
///   decoder: W1 (3H x H), b1, W2 (H x H), b2, W3 (H x 1), b3
/// Weights multiply row vectors from the right (x * W).
struct GatedGCNParams {
  GnnHyper hyper;
  ParamList weights;

  static constexpr std::size_t kPerLayer = 8;
  static std::size_t layer_offset(int layer) { return 4 + kPerLayer * static_cast<std::size_t>(layer); }
  std::size_t decoder_offset() const { return layer_offset(hyper.layers); }
  static std::size_t tensor_count(const GnnHyper& h) { return layer_offset(h.layers) + 6; }

  bool operator==(const GatedGCNParams&) const = default;
};

// Slot names within a message-passing layer.
enum LayerSlot : std::size_t { kWe = 0, kWdst, kWorg, kBgate, kWm, kBmsg, kWself, kBself };

/// One (task, OD) instance ready for the surrogate.
struct GraphBatch {
  Tensor node_features;  // |N| x (3 + Z)
  Tensor edge_features;  // |E| x 2
  std::vector<std::int32_t> origin;
  std::vector<std::int32_t> dest;
  std::vector<bool> present;
  Tensor targets;  // |E| x 1, normalized flows

  std::size_t node_count() const { return node_features.rows(); }
  std::size_t edge_count() const { return origin.size(); }
  void validate() const;
};

/// Glorot-uniform weights, zero biases.
GatedGCNParams init_params(std::uint64_t seed, const GnnHyper& hyper);

struct Encoded {
  Var nodes;  // |N| x H
  Var edges;  // |E| x H
};

Encoded encode(const GraphBatch& batch, std::span<const Var> w, const GnnHyper& hyper);

struct LayerOutput {
  Var nodes;
  Var edges;
};

/// Gated message passing: sigmoid edge gates, gated messages from origins,
/// gate-normalized sum at destinations, self update. Closed edges contribute
/// neither gate nor message.
LayerOutput mpnn_layer(Var x_h, Var e_h, const GraphBatch& batch, std::span<const Var> layer_weights,
                       const GnnHyper& hyper, std::mt19937_64& rng, bool train);

/// Edge-level MLP on [x_org | x_dst | e_h]; returns |E| x 1.
Var decode(Var x_final, Var e_h, const GraphBatch& batch, std::span<const Var> decoder_weights,
           const GnnHyper& hyper);

Var forward(const GraphBatch& batch, std::span<const Var> w, const GnnHyper& hyper, std::mt19937_64& rng,
            bool train);

Var task_loss(Var predictions, Var targets);

/// Mean over samples of the per-sample Smooth L1 loss. Fills `grad` (same
/// layout as weights) when non-null. Dropout streams derive from `stream`.
double batch_loss(const GnnHyper& hyper, const ParamList& weights, std::span<const GraphBatch> batches, bool train,
                  std::uint64_t stream, ParamList* grad);
inline double batch_loss(const GatedGCNParams& params, std::span<const GraphBatch> batches, bool train,
                         std::uint64_t stream, ParamList* grad) {
  return batch_loss(params.hyper, params.weights, batches, train, stream, grad);
}

/// Evaluation-mode forward pass; returns one normalized flow per edge.
std::vector<double> predict(const GatedGCNParams& params, const GraphBatch& batch);

inline constexpr char kCheckpointMagic[4] = {'M', 'A', 'W', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_params(const GatedGCNParams& params);
GatedGCNParams deserialize_params(const std::string& bytes);
void write_checkpoint(const GatedGCNParams& params, const std::string& path);
GatedGCNParams read_checkpoint(const std::string& path);

}  // namespace metassign
