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

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "metassign/errors.hpp"
#include "metassign/gnn.hpp"
#include "metassign/scenario.hpp"

using namespace metassign;

namespace {

GnnHyper small_hyper(int node_features, int hidden = 6, int layers = 2) {
  GnnHyper h;
  h.node_features = node_features;
  h.hidden = hidden;
  h.layers = layers;
  return h;
}

// Five nodes, eight edges, two of them closed.
GraphBatch toy_batch() {
  GraphBatch b;
  b.origin = {0, 1, 2, 3, 4, 0, 2, 1};
  b.dest = {1, 2, 3, 4, 0, 2, 4, 3};
  b.present = {true, true, false, true, true, true, false, true};
  b.node_features = Tensor(5, 4);
  b.edge_features = Tensor(8, 2);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 4; ++c) b.node_features(i, c) = std::sin(1.0 + i * 4 + c);
  for (std::size_t e = 0; e < 8; ++e) {
    b.edge_features(e, 0) = 0.3 + 0.1 * e;
    b.edge_features(e, 1) = b.present[e] ? 1.0 : 0.0;
  }
  b.targets = Tensor(8, 1);
  for (std::size_t e = 0; e < 8; ++e) b.targets(e, 0) = b.present[e] ? 0.2 * e : 0.0;
  return b;
}

std::vector<Var> constants(Tape& tape, const ParamList& p) {
  std::vector<Var> w;
  for (const Tensor& t : p) w.push_back(tape.constant(t));
  return w;
}

}  // namespace

TEST_CASE("parameter initialisation") {
  const GnnHyper h = small_hyper(77, 192, 6);
  const GatedGCNParams a = init_params(11, h);
  CHECK(serialize_params(a) == serialize_params(init_params(11, h)));
  CHECK(serialize_params(a) != serialize_params(init_params(12, h)));
  CHECK(a.weights.size() == GatedGCNParams::tensor_count(h));
  CHECK(a.weights[0].shape() == std::array<std::size_t, 2>{77, 192});
  CHECK(a.weights[a.decoder_offset()].shape() == std::array<std::size_t, 2>{576, 192});
  CHECK(a.weights.back().shape() == std::array<std::size_t, 2>{1, 1});
  const double bound = std::sqrt(6.0 / (77 + 192));
  for (double v : a.weights[0].values()) CHECK(std::abs(v) <= bound);
  for (double v : a.weights[1].values()) CHECK(v == 0.0);

  GnnHyper bad = h;
  bad.hidden = 0;
  CHECK_THROWS_AS(init_params(1, bad), ConfigError);
}

TEST_CASE("encoder is affine") {
  const GraphBatch b = toy_batch();
  GatedGCNParams p = init_params(3, small_hyper(4));
  Tape tape;
  GraphBatch zero = b;
  zero.node_features = Tensor(5, 4);
  zero.edge_features = Tensor(8, 2);
  const auto w = constants(tape, p.weights);
  const Encoded e = encode(zero, w, p.hyper);
  CHECK(e.nodes.value() == Tensor(5, 6));
  CHECK(e.edges.value() == Tensor(8, 6));

  GnnHyper one = small_hyper(1, 1, 0);
  one.edge_features = 1;
  GatedGCNParams q = init_params(3, one);
  q.weights[0] = Tensor::scalar(2.5);
  q.weights[1] = Tensor::scalar(0.0);
  GraphBatch scalar_batch;
  scalar_batch.node_features = Tensor::from_rows({{1.0}, {-4.0}});
  scalar_batch.edge_features = Tensor::from_rows({{1.0}});
  Tape t2;
  const Encoded s = encode(scalar_batch, constants(t2, q.weights), one);
  CHECK(s.nodes.value() == Tensor::from_rows({{2.5}, {-10.0}}));

  GraphBatch wrong = b;
  wrong.node_features = Tensor(5, 3);
  CHECK_THROWS_AS(encode(wrong, w, p.hyper), DimensionError);
}

TEST_CASE("message passing with every edge closed reduces to the self update") {
  GraphBatch b = toy_batch();
  b.present.assign(8, false);
  GnnHyper h = small_hyper(4);
  h.dropout = 0.0;
  const GatedGCNParams p = init_params(5, h);
  Tape tape;
  const auto w = constants(tape, p.weights);
  const Encoded enc = encode(b, w, h);
  std::mt19937_64 rng(0);
  const auto layer = std::span<const Var>(w).subspan(GatedGCNParams::layer_offset(0), GatedGCNParams::kPerLayer);
  const Tensor out = mpnn_layer(enc.nodes, enc.edges, b, layer, h, rng, false).nodes.value();
  const Tensor self = relu(add_bias(matmul(enc.nodes, layer[kWself]), layer[kBself])).value();
  CHECK(out == self);
}

TEST_CASE("a single incoming edge with a neutral gate") {
  // Zero gate weights give sigmoid(0) = 0.5 on the edge into node 1, so the
  // aggregate is 0.5 * m / (0.5 + eps) per channel.
  GraphBatch b;
  b.origin = {0};
  b.dest = {1};
  b.present = {true};
  b.node_features = Tensor::from_rows({{1.0, 2.0}, {0.0, 0.0}});
  b.edge_features = Tensor::from_rows({{0.4, 1.0}});
  GnnHyper h = small_hyper(2, 2, 1);
  h.dropout = 0.0;
  h.relu_after_update = false;
  GatedGCNParams p = init_params(1, h);
  const std::size_t off = GatedGCNParams::layer_offset(0);
  for (std::size_t s : {kWe, kWdst, kWorg, kBgate, kWself, kBself}) p.weights[off + s] = Tensor(p.weights[off + s].rows(), p.weights[off + s].cols());
  p.weights[off + kWm] = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  Tape tape;
  const auto w = constants(tape, p.weights);
  const Encoded enc = encode(b, w, h);
  std::mt19937_64 rng(0);
  const Tensor x = mpnn_layer(enc.nodes, enc.edges, b, std::span<const Var>(w).subspan(off, 8), h, rng, false).nodes.value();
  for (std::size_t c = 0; c < 2; ++c) {
    const double m = enc.nodes.value()(0, c) * 0.5;
    CHECK(x(1, c) == doctest::Approx(m / (0.5 + h.epsilon)).epsilon(1e-14));
    CHECK(x(0, c) == 0.0);
  }
}

TEST_CASE("decoder masks closed edges and has one output per edge") {
  const GraphBatch b = toy_batch();
  const GatedGCNParams p = init_params(9, small_hyper(4));
  const auto q = predict(p, b);
  CHECK(q.size() == 8);
  CHECK(q[2] == 0.0);
  CHECK(q[6] == 0.0);
  CHECK(q[0] != 0.0);

  GatedGCNParams zero = p;
  for (std::size_t i = zero.decoder_offset(); i < zero.weights.size(); i += 2) {
    zero.weights[i + 1] = Tensor(1, zero.weights[i + 1].cols());
  }
  Tape tape;
  const auto w = constants(tape, zero.weights);
  const Var x0 = tape.constant(Tensor(5, 6));
  const Var e0 = tape.constant(Tensor(8, 6));
  const Tensor out = decode(x0, e0, b, std::span<const Var>(w).subspan(zero.decoder_offset(), 6), zero.hyper).value();
  CHECK(out == Tensor(8, 1));
}

TEST_CASE("evaluation forward is deterministic and severed from closed edges") {
  const GraphBatch b = toy_batch();
  const GatedGCNParams p = init_params(4, small_hyper(4));
  const auto q = predict(p, b);
  CHECK(q == predict(p, b));
  GraphBatch altered = b;
  altered.edge_features(2, 0) = 123.0;
  altered.edge_features(6, 0) = -7.0;
  altered.origin[6] = 1;  // rewire the closed edge
  CHECK(predict(p, altered) == q);
}

TEST_CASE("task loss examples") {
  Tape tape;
  const Var t = tape.constant(Tensor::from_rows({{0.5}, {1.0}, {2.0}}));
  CHECK(task_loss(t, t).value().item() == 0.0);
  const Var off = tape.constant(Tensor::from_rows({{1.5}, {2.0}, {3.0}}));
  CHECK(task_loss(off, t).value().item() == doctest::Approx(0.5));
  CHECK_THROWS_AS(task_loss(t, tape.constant(Tensor(2, 1))), DimensionError);
}

TEST_CASE("batch loss is the mean of per-sample losses") {
  const Dataset& d = testing::small_dataset();
  std::vector<GraphBatch> batches;
  for (int o = 0; o < 4; ++o) batches.push_back(make_graph_batch(d, d.split.train_task_ids[0], o));
  const GnnHyper h = small_hyper(static_cast<int>(batches[0].node_features.cols()), 8, 2);
  const GatedGCNParams p = init_params(2, h);
  double sum = 0.0;
  for (const GraphBatch& b : batches) sum += batch_loss(p, std::span<const GraphBatch>(&b, 1), false, 0, nullptr);
  CHECK(batch_loss(p, batches, false, 0, nullptr) == doctest::Approx(sum / 4).epsilon(1e-14));
  CHECK(batch_loss(p, batches, false, 0, nullptr) >= 0.0);
  CHECK_THROWS_AS(batch_loss(p, std::span<const GraphBatch>{}, false, 0, nullptr), ContractError);
}

TEST_CASE("full model gradient matches finite differences") {
  const GraphBatch b = toy_batch();
  GnnHyper h = small_hyper(4, 5, 2);
  h.dropout = 0.0;
  const GatedGCNParams p = init_params(13, h);
  const ScalarFunction f = [&](Tape& tape, std::span<const Var> w) {
    std::mt19937_64 rng(0);
    return task_loss(forward(b, w, h, rng, false), tape.constant(b.targets));
  };
  CHECK(grad_check(f, p.weights) < 1e-5);
}

TEST_CASE("checkpoint round trip and corruption") {
  const GatedGCNParams p = init_params(21, small_hyper(4));
  const std::string bytes = serialize_params(p);
  CHECK(bytes.substr(0, 4) == "MAWT");
  CHECK(deserialize_params(bytes) == p);

  const auto path = std::filesystem::temp_directory_path() / "metassign_unit_ckpt.bin";
  write_checkpoint(p, path.string());
  CHECK(read_checkpoint(path.string()) == p);
  std::filesystem::remove(path);

  std::string version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(deserialize_params(version), UnsupportedVersionError);
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  CHECK_THROWS_AS(deserialize_params(flipped), IntegrityError);
  CHECK_THROWS_AS(deserialize_params(bytes.substr(0, bytes.size() - 3)), IntegrityError);
  CHECK_THROWS_AS(read_checkpoint("/nonexistent/ckpt.bin"), IoError);
}
