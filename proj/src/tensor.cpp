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

#include "metassign/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "metassign/errors.hpp"
#include "metassign/rng.hpp"

namespace metassign {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) throw ContractError(std::string(op) + " produced a non-finite value");
  }
}

void check_index(std::span<const std::int32_t> index, std::size_t limit, const char* op) {
  for (std::int32_t i : index) {
    if (i < 0 || static_cast<std::size_t>(i) >= limit) {
      throw IndexError(std::string(op) + ": index " + std::to_string(i) + " out of range [0," +
                       std::to_string(limit) + ")");
    }
  }
}

// Elementwise op with a unary local derivative computed from input and output.
template <typename Fn, typename Deriv>
Var unary(Var a, const char* name, Fn fn, Deriv deriv) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  auto xs = x.values();
  auto ys = y.values();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = fn(xs[i]);
  check_finite(y, name);
  const std::size_t pa = a.id();
  return a.tape().record(std::move(y), {a}, [pa, deriv](Tape& t, std::size_t self) {
    if (!t.requires_grad(pa)) return;
    auto g = t.grad(self).values();
    auto xin = t.value(pa).values();
    auto yout = t.value(self).values();
    auto acc = t.grad_accumulator(pa).values();
    for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] * deriv(xin[i], yout[i]);
  });
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("value count " + std::to_string(data_.size()) + " does not match shape " + shape_string());
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  Tensor t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged initializer");
    std::size_t j = 0;
    for (double v : row) t(i, j++) = v;
    ++i;
  }
  return t;
}

std::string Tensor::shape_string() const { return "(" + std::to_string(rows_) + ", " + std::to_string(cols_) + ")"; }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on a tensor of shape " + shape_string());
  return data_[0];
}

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::variable(Tensor value) {
  nodes_.push_back({std::move(value), Tensor(), true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), Tensor(), false, nullptr});
  return Var(this, nodes_.size() - 1);
}

std::vector<Var> Tape::variables(const ParamList& params) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(variable(p));
  return vars;
}

Var Tape::record(Tensor value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.tape() != this) throw ContractError("op mixes values from different tapes");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back({std::move(value), Tensor(), needs, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_accumulator(std::size_t id) {
  NodeRecord& n = nodes_[id];
  if (!n.grad.same_shape(n.value)) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

std::vector<Tensor> Tape::gradients(Var loss, std::span<const Var> wrt) {
  if (&loss.tape() != this) throw ContractError("loss belongs to a different tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + loss.value().shape_string());
  }
  for (NodeRecord& n : nodes_) n.grad = Tensor();
  if (nodes_[loss.id()].requires_grad) {
    grad_accumulator(loss.id()).values()[0] = 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      NodeRecord& n = nodes_[id];
      if (n.backward && n.grad.size() != 0) n.backward(*this, id);
    }
  }
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const Var& v : wrt) {
    const NodeRecord& n = nodes_[v.id()];
    out.push_back(n.grad.same_shape(n.value) ? n.grad : Tensor(n.value.rows(), n.value.cols()));
  }
  return out;
}

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) {
    throw DimensionError("matmul: shape mismatch " + A.shape_string() + " vs " + B.shape_string());
  }
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor C(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* c = C.row(i);
    const double* arow = A.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = B.row(p);
      for (std::size_t j = 0; j < m; ++j) c[j] += av * brow[j];
    }
  }
  const std::size_t pa = a.id(), pb = b.id();
  return a.tape().record(std::move(C), {a, b}, [pa, pb](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& A = t.value(pa);
    const Tensor& B = t.value(pb);
    const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    if (t.requires_grad(pa)) {
      Tensor& dA = t.grad_accumulator(pa);
      for (std::size_t i = 0; i < n; ++i) {
        const double* g = G.row(i);
        double* da = dA.row(i);
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B.row(p);
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += g[j] * brow[j];
          da[p] += s;
        }
      }
    }
    if (t.requires_grad(pb)) {
      Tensor& dB = t.grad_accumulator(pb);
      for (std::size_t i = 0; i < n; ++i) {
        const double* g = G.row(i);
        const double* arow = A.row(i);
        for (std::size_t p = 0; p < k; ++p) {
          const double av = arow[p];
          if (av == 0.0) continue;
          double* db = dB.row(p);
          for (std::size_t j = 0; j < m; ++j) db[j] += av * g[j];
        }
      }
    }
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  auto ys = y.values();
  auto bs = b.value().values();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] += bs[i];
  const std::size_t pa = a.id(), pb = b.id();
  return a.tape().record(std::move(y), {a, b}, [pa, pb](Tape& t, std::size_t self) {
    auto g = t.grad(self).values();
    for (std::size_t p : {pa, pb}) {
      if (!t.requires_grad(p)) continue;
      auto acc = t.grad_accumulator(p).values();
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
  });
}

Var add_bias(Var a, Var bias) {
  const Tensor& A = a.value();
  const Tensor& B = bias.value();
  if (B.rows() != 1 || B.cols() != A.cols()) {
    throw DimensionError("add_bias: shape mismatch " + A.shape_string() + " vs " + B.shape_string());
  }
  Tensor y = A;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double* row = y.row(r);
    for (std::size_t c = 0; c < y.cols(); ++c) row[c] += B(0, c);
  }
  const std::size_t pa = a.id(), pb = bias.id();
  return a.tape().record(std::move(y), {a, bias}, [pa, pb](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    if (t.requires_grad(pa)) {
      auto acc = t.grad_accumulator(pa).values();
      auto g = G.values();
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
    if (t.requires_grad(pb)) {
      Tensor& acc = t.grad_accumulator(pb);
      for (std::size_t r = 0; r < G.rows(); ++r) {
        const double* g = G.row(r);
        for (std::size_t c = 0; c < G.cols(); ++c) acc(0, c) += g[c];
      }
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  auto ys = y.values();
  auto bs = b.value().values();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] -= bs[i];
  const std::size_t pa = a.id(), pb = b.id();
  return a.tape().record(std::move(y), {a, b}, [pa, pb](Tape& t, std::size_t self) {
    auto g = t.grad(self).values();
    if (t.requires_grad(pa)) {
      auto acc = t.grad_accumulator(pa).values();
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
    if (t.requires_grad(pb)) {
      auto acc = t.grad_accumulator(pb).values();
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] -= g[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double value) {
  return unary(
      a, "add_scalar", [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Var hadamard(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "hadamard");
  Tensor y = a.value();
  auto ys = y.values();
  auto bs = b.value().values();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] *= bs[i];
  const std::size_t pa = a.id(), pb = b.id();
  return a.tape().record(std::move(y), {a, b}, [pa, pb](Tape& t, std::size_t self) {
    auto g = t.grad(self).values();
    auto av = t.value(pa).values();
    auto bv = t.value(pb).values();
    if (t.requires_grad(pa)) {
      auto acc = t.grad_accumulator(pa).values();
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] * bv[i];
    }
    if (t.requires_grad(pb)) {
      auto acc = t.grad_accumulator(pb).values();
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] * av[i];
    }
  });
}

Var divide(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "divide");
  Tensor y = a.value();
  auto ys = y.values();
  auto bs = b.value().values();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] /= bs[i];
  check_finite(y, "divide");
  const std::size_t pa = a.id(), pb = b.id();
  return a.tape().record(std::move(y), {a, b}, [pa, pb](Tape& t, std::size_t self) {
    auto g = t.grad(self).values();
    auto bv = t.value(pb).values();
    auto yv = t.value(self).values();
    if (t.requires_grad(pa)) {
      auto acc = t.grad_accumulator(pa).values();
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] / bv[i];
    }
    if (t.requires_grad(pb)) {
      auto acc = t.grad_accumulator(pb).values();
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] -= g[i] * yv[i] / bv[i];
    }
  });
}

Var sigmoid(Var a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var dropout(Var a, double p, std::mt19937_64& rng, bool train) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout probability must lie in [0, 1)");
  if (!train || p == 0.0) return a;
  const Tensor& x = a.value();
  std::vector<double> keep(x.size());
  const double inv = 1.0 / (1.0 - p);
  for (double& k : keep) k = uniform01(rng) < p ? 0.0 : inv;
  Tensor y = x;
  auto ys = y.values();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] *= keep[i];
  const std::size_t pa = a.id();
  return a.tape().record(std::move(y), {a}, [pa, keep = std::move(keep)](Tape& t, std::size_t self) {
    if (!t.requires_grad(pa)) return;
    auto g = t.grad(self).values();
    auto acc = t.grad_accumulator(pa).values();
    for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] * keep[i];
  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  if (axis != 0 && axis != 1) throw ContractError("concat axis must be 0 or 1");
  Tape& tape = parts.front().tape();
  const Tensor& first = parts.front().value();
  std::size_t rows = 0, cols = 0;
  for (const Var& v : parts) {
    const Tensor& t = v.value();
    if (axis == 1 && t.rows() != first.rows()) {
      throw DimensionError("concat: shape mismatch " + first.shape_string() + " vs " + t.shape_string());
    }
    if (axis == 0 && t.cols() != first.cols()) {
      throw DimensionError("concat: shape mismatch " + first.shape_string() + " vs " + t.shape_string());
    }
    rows = axis == 0 ? rows + t.rows() : t.rows();
    cols = axis == 1 ? cols + t.cols() : t.cols();
  }
  Tensor y(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t offset = 0;
  for (const Var& v : parts) {
    const Tensor& t = v.value();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t c = 0; c < t.cols(); ++c) {
        if (axis == 1) {
          y(r, offset + c) = t(r, c);
        } else {
          y(offset + r, c) = t(r, c);
        }
      }
    }
    ids.push_back(v.id());
    offsets.push_back(offset);
    offset += axis == 1 ? t.cols() : t.rows();
  }
  return tape.record(std::move(y), parts, [ids, offsets, axis](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      Tensor& acc = t.grad_accumulator(ids[k]);
      for (std::size_t r = 0; r < acc.rows(); ++r) {
        for (std::size_t c = 0; c < acc.cols(); ++c) {
          acc(r, c) += axis == 1 ? G(r, offsets[k] + c) : G(offsets[k] + r, c);
        }
      }
    }
  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  const std::size_t extent = axis == 0 ? x.rows() : x.cols();
  if ((axis != 0 && axis != 1) || begin > end || end > extent) {
    throw IndexError("slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range for shape " +
                     x.shape_string());
  }
  const std::size_t rows = axis == 0 ? end - begin : x.rows();
  const std::size_t cols = axis == 1 ? end - begin : x.cols();
  Tensor y(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y(r, c) = axis == 0 ? x(begin + r, c) : x(r, begin + c);
  }
  const std::size_t pa = a.id();
  return a.tape().record(std::move(y), {a}, [pa, axis, begin](Tape& t, std::size_t self) {
    if (!t.requires_grad(pa)) return;
    const Tensor& G = t.grad(self);
    Tensor& acc = t.grad_accumulator(pa);
    for (std::size_t r = 0; r < G.rows(); ++r) {
      for (std::size_t c = 0; c < G.cols(); ++c) {
        if (axis == 0) {
          acc(begin + r, c) += G(r, c);
        } else {
          acc(r, begin + c) += G(r, c);
        }
      }
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t pa = a.id();
  return a.tape().record(Tensor::scalar(s), {a}, [pa](Tape& t, std::size_t self) {
    if (!t.requires_grad(pa)) return;
    const double g = t.grad(self).values()[0];
    for (double& v : t.grad_accumulator(pa).values()) v += g;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Tensor gather_rows(const Tensor& a, std::span<const std::int32_t> index) {
  check_index(index, a.rows(), "gather_rows");
  Tensor y(index.size(), a.cols());
  for (std::size_t e = 0; e < index.size(); ++e) std::copy_n(a.row(index[e]), a.cols(), y.row(e));
  return y;
}

Tensor segment_sum(const Tensor& a, std::span<const std::int32_t> index, std::size_t n_segments) {
  if (index.size() != a.rows()) {
    throw DimensionError("segment_sum: " + std::to_string(index.size()) + " indices for shape " + a.shape_string());
  }
  check_index(index, n_segments, "segment_sum");
  Tensor y(n_segments, a.cols());
  for (std::size_t e = 0; e < index.size(); ++e) {
    const double* src = a.row(e);
    double* dst = y.row(index[e]);
    for (std::size_t c = 0; c < a.cols(); ++c) dst[c] += src[c];
  }
  return y;
}

Var gather_rows(Var a, std::span<const std::int32_t> index) {
  Tensor y = gather_rows(a.value(), index);
  const std::size_t pa = a.id();
  std::vector<std::int32_t> idx(index.begin(), index.end());
  return a.tape().record(std::move(y), {a}, [pa, idx = std::move(idx)](Tape& t, std::size_t self) {
    if (!t.requires_grad(pa)) return;
    const Tensor& G = t.grad(self);
    Tensor& acc = t.grad_accumulator(pa);
    for (std::size_t e = 0; e < idx.size(); ++e) {
      const double* g = G.row(e);
      double* dst = acc.row(idx[e]);
      for (std::size_t c = 0; c < G.cols(); ++c) dst[c] += g[c];
    }
  });
}

Var segment_sum(Var a, std::span<const std::int32_t> index, std::size_t n_segments) {
  Tensor y = segment_sum(a.value(), index, n_segments);
  const std::size_t pa = a.id();
  std::vector<std::int32_t> idx(index.begin(), index.end());
  return a.tape().record(std::move(y), {a}, [pa, idx = std::move(idx)](Tape& t, std::size_t self) {
    if (!t.requires_grad(pa)) return;
    const Tensor& G = t.grad(self);
    Tensor& acc = t.grad_accumulator(pa);
    for (std::size_t e = 0; e < idx.size(); ++e) {
      const double* g = G.row(idx[e]);
      double* dst = acc.row(e);
      for (std::size_t c = 0; c < G.cols(); ++c) dst[c] += g[c];
    }
  });
}

Var mask_rows(Var a, const std::vector<bool>& keep) {
  const Tensor& x = a.value();
  if (keep.size() != x.rows()) {
    throw DimensionError("mask_rows: mask of length " + std::to_string(keep.size()) + " for shape " +
                         x.shape_string());
  }
  Tensor y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (keep[r]) std::copy_n(x.row(r), x.cols(), y.row(r));
  }
  const std::size_t pa = a.id();
  return a.tape().record(std::move(y), {a}, [pa, keep](Tape& t, std::size_t self) {
    if (!t.requires_grad(pa)) return;
    const Tensor& G = t.grad(self);
    Tensor& acc = t.grad_accumulator(pa);
    for (std::size_t r = 0; r < G.rows(); ++r) {
      if (!keep[r]) continue;
      const double* g = G.row(r);
      double* dst = acc.row(r);
      for (std::size_t c = 0; c < G.cols(); ++c) dst[c] += g[c];
    }
  });
}

Var smooth_l1(Var pred, Var target, double delta) {
  require_same_shape(pred.value(), target.value(), "smooth_l1");
  if (!(delta > 0.0)) throw ContractError("smooth_l1 delta must be positive");
  const std::size_t n = pred.value().size();
  if (n == 0) throw ContractError("smooth_l1 of empty tensors");
  auto p = pred.value().values();
  auto q = target.value().values();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = p[i] - q[i];
    const double ad = std::abs(d);
    total += ad < delta ? 0.5 * d * d / delta : ad - 0.5 * delta;
  }
  const std::size_t pp = pred.id(), pt = target.id();
  return pred.tape().record(Tensor::scalar(total / static_cast<double>(n)), {pred, target},
                            [pp, pt, delta, n](Tape& t, std::size_t self) {
                              const double g = t.grad(self).values()[0] / static_cast<double>(n);
                              auto p = t.value(pp).values();
                              auto q = t.value(pt).values();
                              for (std::size_t k : {pp, pt}) {
                                if (!t.requires_grad(k)) continue;
                                const double sign = k == pp ? 1.0 : -1.0;
                                auto acc = t.grad_accumulator(k).values();
                                for (std::size_t i = 0; i < n; ++i) {
                                  const double d = p[i] - q[i];
                                  const double local = std::abs(d) < delta ? d / delta : (d > 0.0 ? 1.0 : -1.0);
                                  acc[i] += sign * g * local;
                                }
                              }
                            });
}

double grad_check(const ScalarFunction& f, const ParamList& params, double h) {
  std::vector<double> analytic;
  {
    Tape tape;
    const auto vars = tape.variables(params);
    const Var loss = f(tape, vars);
    for (const Tensor& g : tape.gradients(loss, vars)) analytic.insert(analytic.end(), g.values().begin(), g.values().end());
  }
  auto evaluate = [&](const ParamList& p) {
    Tape tape;
    const auto vars = tape.variables(p);
    return f(tape, vars).value().item();
  };
  std::vector<double> numeric;
  numeric.reserve(analytic.size());
  ParamList work = params;
  for (Tensor& t : work) {
    for (double& v : t.values()) {
      const double saved = v;
      v = saved + h;
      const double up = evaluate(work);
      v = saved - h;
      const double down = evaluate(work);
      v = saved;
      numeric.push_back((up - down) / (2.0 * h));
    }
  }
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    na = std::max(na, std::abs(analytic[i]));
    nn = std::max(nn, std::abs(numeric[i]));
  }
  const double scale_ = std::max(na, nn);
  return scale_ < 1e-12 ? diff : diff / scale_;
}

double global_norm(const ParamList& params) {
  double s = 0.0;
  for (const Tensor& t : params) {
    for (double v : t.values()) s += v * v;
  }
  return std::sqrt(s);
}

std::size_t parameter_count(const ParamList& params) {
  std::size_t n = 0;
  for (const Tensor& t : params) n += t.size();
  return n;
}

std::vector<double> flatten(const ParamList& params) {
  std::vector<double> flat;
  flat.reserve(parameter_count(params));
  for (const Tensor& t : params) flat.insert(flat.end(), t.values().begin(), t.values().end());
  return flat;
}

void unflatten(std::span<const double> flat, ParamList& params) {
  if (flat.size() != parameter_count(params)) throw DimensionError("flat parameter vector has the wrong length");
  std::size_t k = 0;
  for (Tensor& t : params) {
    for (double& v : t.values()) v = flat[k++];
  }
}

}  // namespace metassign
