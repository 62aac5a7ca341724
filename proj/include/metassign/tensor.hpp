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

// Dense row-major matrices and a reverse-mode tape over them. Everything the
// surrogate needs is two dimensional: node/edge feature blocks, weights and
// 1x1 scalars.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace metassign {

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  std::array<std::size_t, 2> shape() const { return {rows_, cols_}; }
  std::string shape_string() const;

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double item() const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  bool same_shape(const Tensor& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
  bool operator==(const Tensor&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using ParamList = std::vector<Tensor>;

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(Tensor value);
  Var constant(Tensor value);
  std::vector<Var> variables(const ParamList& params);

  // Reverse sweep from a 1x1 loss. Returns d(loss)/d(v) for every v in `wrt`;
  // values not on a path to the loss get exact zeros.
  std::vector<Tensor> gradients(Var loss, std::span<const Var> wrt);

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  Var record(Tensor value, std::span<const Var> parents, Backward backward);
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
  }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Zero-initialized on first use; only valid for nodes that require grad.
  Tensor& grad_accumulator(std::size_t id);

 private:
  struct NodeRecord {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<NodeRecord> nodes_;
};

// Core ops. Shape mismatches raise DimensionError naming both shapes.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var add_bias(Var a, Var bias);  // rows x c plus 1 x c
Var sub(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double value);
Var hadamard(Var a, Var b);
Var divide(Var a, Var b);
Var sigmoid(Var a);
Var relu(Var a);
// Inverted dropout; identity when p == 0 or train is false.
Var dropout(Var a, double p, std::mt19937_64& rng, bool train);
Var concat(std::span<const Var> parts, int axis);
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
Var sum(Var a);
Var mean(Var a);

// Graph primitives. Row e of gather_rows is row index[e] of the input;
// segment_sum adds row e into output row index[e].
Var gather_rows(Var a, std::span<const std::int32_t> index);
Var segment_sum(Var a, std::span<const std::int32_t> index, std::size_t n_segments);
// Rows with keep[r] == false become exact zeros (and pass no gradient).
Var mask_rows(Var a, const std::vector<bool>& keep);

/// Mean Smooth L1 (Huber with threshold delta, divided by delta in the quadratic regime).
Var smooth_l1(Var pred, Var target, double delta = 1.0);

// Plain-value counterparts of the graph primitives, used for adjointness checks.
Tensor gather_rows(const Tensor& a, std::span<const std::int32_t> index);
Tensor segment_sum(const Tensor& a, std::span<const std::int32_t> index, std::size_t n_segments);

using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares tape gradients of `f` at `params` against central differences with
/// step h. Returns max_i |analytic_i - numeric_i| / max(|analytic|_inf, |numeric|_inf),
/// or the absolute difference when both gradients vanish (norms below 1e-12).
double grad_check(const ScalarFunction& f, const ParamList& params, double h = 1e-5);

// Helpers on parameter lists.
double global_norm(const ParamList& params);
std::size_t parameter_count(const ParamList& params);
std::vector<double> flatten(const ParamList& params);
void unflatten(std::span<const double> flat, ParamList& params);

}  // namespace metassign
