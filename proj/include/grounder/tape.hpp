// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grounder/error.hpp"
#include "grounder/tensor.hpp"

namespace grounder::ag {

/// Handle to a node on a Tape.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff over dense rank-<=3 arrays.
///
/// Every operation appends one node holding its value and a backward closure;
/// backward(loss) seeds d(loss)/d(loss) = 1 and walks the tape once in reverse
/// creation order, so each node's closure runs exactly once. Gradients of
/// bound parameters (see leaf()) are accumulated into the owning Parameter.
///
/// A tape is single-writer; build and differentiate it from one thread.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves ----

  Var constant(Shape shape, std::vector<T> data) {
    if (data.size() != shape_numel(shape)) {
      throw Error(ErrorCategory::Config,
                  "constant: data length " + std::to_string(data.size()) +
                      " does not match shape " + shape_str(shape));
    }
    return push(std::move(shape), std::move(data), nullptr);
  }

  Var constant_scalar(T v) { return constant({1}, {v}); }

  /// Binds an external parameter as a differentiable leaf. On backward the
  /// node's gradient is added into p.grad.
  Var leaf(Parameter<T>& p) {
    Var out = push(p.shape, p.value, nullptr);
    Parameter<T>* bound = &p;
    const std::int32_t id = out.id;
    nodes_[id].back = [this, id, bound]() {
      const auto& g = nodes_[id].grad;
      for (std::size_t i = 0; i < g.size(); ++i) bound->grad[i] += g[i];
    };
    return out;
  }

  // ---- elementwise (same shape) ----

  Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    std::vector<T> out = val(a);
    const auto& vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    return binary_ew(a, b, std::move(out), [](T, T, T g) { return std::pair<T, T>{g, g}; });
  }

  Var sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    std::vector<T> out = val(a);
    const auto& vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    return binary_ew(a, b, std::move(out), [](T, T, T g) { return std::pair<T, T>{g, -g}; });
  }

  Var mul(Var a, Var b) {
    require_same_shape(a, b, "mul");
    const auto& va = val(a);
    const auto& vb = val(b);
    std::vector<T> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
    return binary_ew(a, b, std::move(out),
                     [](T x, T y, T g) { return std::pair<T, T>{g * y, g * x}; });
  }

  Var div(Var a, Var b) {
    require_same_shape(a, b, "div");
    const auto& va = val(a);
    const auto& vb = val(b);
    std::vector<T> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] / vb[i];
    return binary_ew(a, b, std::move(out), [](T x, T y, T g) {
      return std::pair<T, T>{g / y, -g * x / (y * y)};
    });
  }

  // Ties take the first argument's gradient.
  Var vmin(Var a, Var b) {
    require_same_shape(a, b, "vmin");
    const auto& va = val(a);
    const auto& vb = val(b);
    std::vector<T> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] <= vb[i] ? va[i] : vb[i];
    return binary_ew(a, b, std::move(out), [](T x, T y, T g) {
      return x <= y ? std::pair<T, T>{g, T(0)} : std::pair<T, T>{T(0), g};
    });
  }

  Var vmax(Var a, Var b) {
    require_same_shape(a, b, "vmax");
    const auto& va = val(a);
    const auto& vb = val(b);
    std::vector<T> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] >= vb[i] ? va[i] : vb[i];
    return binary_ew(a, b, std::move(out), [](T x, T y, T g) {
      return x >= y ? std::pair<T, T>{g, T(0)} : std::pair<T, T>{T(0), g};
    });
  }

  Var scale(Var a, T s) {
    std::vector<T> out = val(a);
    for (auto& x : out) x *= s;
    return unary(a, std::move(out), [s](T, T, T g) { return g * s; });
  }

  Var relu(Var a) {
    std::vector<T> out = val(a);
    for (auto& x : out) x = x > T(0) ? x : T(0);
    return unary(a, std::move(out), [](T x, T, T g) { return x > T(0) ? g : T(0); });
  }

  Var sigmoid(Var a) {
    const auto& va = val(a);
    std::vector<T> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-va[i]));
    return unary(a, std::move(out), [](T, T y, T g) { return g * y * (T(1) - y); });
  }

  Var abs(Var a) {
    std::vector<T> out = val(a);
    for (auto& x : out) x = x < T(0) ? -x : x;
    return unary(a, std::move(out),
                 [](T x, T, T g) { return x > T(0) ? g : (x < T(0) ? -g : T(0)); });
  }

  Var log(Var a) {
    const auto& va = val(a);
    std::vector<T> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(va[i]);
    return unary(a, std::move(out), [](T x, T, T g) { return g / x; });
  }

  Var clamp_min(Var a, T floor) {
    std::vector<T> out = val(a);
    for (auto& x : out) x = x < floor ? floor : x;
    return unary(a, std::move(out),
                 [floor](T x, T, T g) { return x >= floor ? g : T(0); });
  }

  // ---- shape ops ----

  Var reshape(Var a, Shape shape) {
    if (shape_numel(shape) != val(a).size()) {
      throw Error(ErrorCategory::Config, "reshape: " + shape_str(this->shape(a)) +
                                             " -> " + shape_str(shape) +
                                             " changes element count");
    }
    Var out = push(std::move(shape), val(a), nullptr);
    hook_identity(out, a);
    return out;
  }

  /// Concatenate along the last (feature) dimension: [N,a] ++ [N,b] -> [N,a+b].
  Var concat_cols(Var a, Var b) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (sa.size() != 2 || sb.size() != 2 || sa[0] != sb[0]) {
      throw Error(ErrorCategory::Config,
                  "concat_cols: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
    }
    const int n = sa[0], ca = sa[1], cb = sb[1];
    const auto& va = val(a);
    const auto& vb = val(b);
    std::vector<T> out(static_cast<std::size_t>(n) * (ca + cb));
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < ca; ++c) out[r * (ca + cb) + c] = va[r * ca + c];
      for (int c = 0; c < cb; ++c) out[r * (ca + cb) + ca + c] = vb[r * cb + c];
    }
    Var o = push({n, ca + cb}, std::move(out), nullptr);
    const std::int32_t oid = o.id, ida = a.id, idb = b.id;
    nodes_[oid].back = [this, oid, ida, idb, n, ca, cb]() {
      const auto& g = nodes_[oid].grad;
      auto& ga = nodes_[ida].grad;
      auto& gb = nodes_[idb].grad;
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
        for (int c = 0; c < cb; ++c) gb[r * cb + c] += g[r * (ca + cb) + ca + c];
      }
    };
    return o;
  }

  /// Select rows of a rank-2 tensor; indices may repeat.
  Var gather_rows(Var a, std::vector<int> rows) {
    const Shape& sa = shape(a);
    if (sa.size() != 2) {
      throw Error(ErrorCategory::Config, "gather_rows: expected rank-2, got " + shape_str(sa));
    }
    const int cols = sa[1];
    const auto& va = val(a);
    std::vector<T> out(rows.size() * static_cast<std::size_t>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] < 0 || rows[r] >= sa[0]) {
        throw Error(ErrorCategory::Config,
                    "gather_rows: index " + std::to_string(rows[r]) + " out of range for " +
                        shape_str(sa));
      }
      for (int c = 0; c < cols; ++c) out[r * cols + c] = va[rows[r] * cols + c];
    }
    Var o = push({static_cast<int>(rows.size()), cols}, std::move(out), nullptr);
    const std::int32_t oid = o.id, ida = a.id;
    auto idx = std::make_shared<std::vector<int>>(std::move(rows));
    nodes_[oid].back = [this, oid, ida, idx, cols]() {
      const auto& g = nodes_[oid].grad;
      auto& ga = nodes_[ida].grad;
      for (std::size_t r = 0; r < idx->size(); ++r)
        for (int c = 0; c < cols; ++c) ga[(*idx)[r] * cols + c] += g[r * cols + c];
    };
    return o;
  }

  /// Extract one element (flat index) as a scalar.
  Var pick(Var a, int index) {
    const auto& va = val(a);
    if (index < 0 || static_cast<std::size_t>(index) >= va.size()) {
      throw Error(ErrorCategory::Config, "pick: index " + std::to_string(index) +
                                             " out of range for " + shape_str(shape(a)));
    }
    Var o = push({1}, {va[index]}, nullptr);
    const std::int32_t oid = o.id, ida = a.id;
    nodes_[oid].back = [this, oid, ida, index]() {
      nodes_[ida].grad[index] += nodes_[oid].grad[0];
    };
    return o;
  }

  // ---- linear algebra ----

  Var matmul(Var a, Var b) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
      throw Error(ErrorCategory::Config,
                  "matmul: incompatible shapes " + shape_str(sa) + " x " + shape_str(sb));
    }
    const int m = sa[0], k = sa[1], n = sb[1];
    const auto& va = val(a);
    const auto& vb = val(b);
    std::vector<T> out(static_cast<std::size_t>(m) * n, T(0));
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        const T aip = va[i * k + p];
        for (int j = 0; j < n; ++j) out[i * n + j] += aip * vb[p * n + j];
      }
    Var o = push({m, n}, std::move(out), nullptr);
    const std::int32_t oid = o.id, ida = a.id, idb = b.id;
    nodes_[oid].back = [this, oid, ida, idb, m, k, n]() {
      const auto& g = nodes_[oid].grad;
      const auto& va2 = nodes_[ida].val;
      const auto& vb2 = nodes_[idb].val;
      auto& ga = nodes_[ida].grad;
      auto& gb = nodes_[idb].grad;
      // dA = dC * B^T
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const T gij = g[i * n + j];
          for (int p = 0; p < k; ++p) ga[i * k + p] += gij * vb2[p * n + j];
        }
      // dB = A^T * dC
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          const T aip = va2[i * k + p];
          for (int j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
    };
    return o;
  }

  /// a [m,k] times b [n,k] transposed -> [m,n].
  Var matmul_nt(Var a, Var b) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[1]) {
      throw Error(ErrorCategory::Config,
                  "matmul_nt: incompatible shapes " + shape_str(sa) + " x " + shape_str(sb) + "^T");
    }
    const int m = sa[0], k = sa[1], n = sb[0];
    const auto& va = val(a);
    const auto& vb = val(b);
    std::vector<T> out(static_cast<std::size_t>(m) * n, T(0));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        T acc = T(0);
        for (int p = 0; p < k; ++p) acc += va[i * k + p] * vb[j * k + p];
        out[i * n + j] = acc;
      }
    Var o = push({m, n}, std::move(out), nullptr);
    const std::int32_t oid = o.id, ida = a.id, idb = b.id;
    nodes_[oid].back = [this, oid, ida, idb, m, k, n]() {
      const auto& g = nodes_[oid].grad;
      const auto& va2 = nodes_[ida].val;
      const auto& vb2 = nodes_[idb].val;
      auto& ga = nodes_[ida].grad;
      auto& gb = nodes_[idb].grad;
      // dA = dC * B ; dB = dC^T * A
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const T gij = g[i * n + j];
          for (int p = 0; p < k; ++p) {
            ga[i * k + p] += gij * vb2[j * k + p];
            gb[j * k + p] += gij * va2[i * k + p];
          }
        }
    };
    return o;
  }

  /// [N,D] plus a [D] bias broadcast over rows.
  Var add_row_bias(Var m, Var bias) {
    const Shape& sm = shape(m);
    const Shape& sb = shape(bias);
    if (sm.size() != 2 || sb.size() != 1 || sm[1] != sb[0]) {
      throw Error(ErrorCategory::Config,
                  "add_row_bias: incompatible shapes " + shape_str(sm) + " + " + shape_str(sb));
    }
    const int n = sm[0], d = sm[1];
    std::vector<T> out = val(m);
    const auto& vb = val(bias);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c) out[r * d + c] += vb[c];
    Var o = push({n, d}, std::move(out), nullptr);
    const std::int32_t oid = o.id, idm = m.id, idb = bias.id;
    nodes_[oid].back = [this, oid, idm, idb, n, d]() {
      const auto& g = nodes_[oid].grad;
      auto& gm = nodes_[idm].grad;
      auto& gb = nodes_[idb].grad;
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) {
          gm[r * d + c] += g[r * d + c];
          gb[c] += g[r * d + c];
        }
    };
    return o;
  }

  // ---- reductions and row-wise nonlinearities ----

  Var sum(Var a) {
    const auto& va = val(a);
    T acc = T(0);
    for (T x : va) acc += x;
    Var o = push({1}, {acc}, nullptr);
    const std::int32_t oid = o.id, ida = a.id;
    nodes_[oid].back = [this, oid, ida]() {
      const T g = nodes_[oid].grad[0];
      for (auto& x : nodes_[ida].grad) x += g;
    };
    return o;
  }

  /// Softmax over the last dimension (rank 1 or 2), stabilized by
  /// max-subtraction per row.
  Var softmax_rows(Var a) {
    const Shape& sa = shape(a);
    if (sa.empty() || sa.size() > 2) {
      throw Error(ErrorCategory::Config, "softmax_rows: expected rank 1 or 2, got " + shape_str(sa));
    }
    const int rows = sa.size() == 2 ? sa[0] : 1;
    const int cols = sa.back();
    const auto& va = val(a);
    std::vector<T> out(va.size());
    for (int r = 0; r < rows; ++r) {
      const T* x = va.data() + static_cast<std::size_t>(r) * cols;
      T* y = out.data() + static_cast<std::size_t>(r) * cols;
      T mx = x[0];
      for (int c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
      T denom = T(0);
      for (int c = 0; c < cols; ++c) {
        y[c] = std::exp(x[c] - mx);
        denom += y[c];
      }
      for (int c = 0; c < cols; ++c) y[c] /= denom;
    }
    Var o = push(sa, std::move(out), nullptr);
    const std::int32_t oid = o.id, ida = a.id;
    nodes_[oid].back = [this, oid, ida, rows, cols]() {
      const auto& y = nodes_[oid].val;
      const auto& g = nodes_[oid].grad;
      auto& ga = nodes_[ida].grad;
      for (int r = 0; r < rows; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * cols;
        T dot = T(0);
        for (int c = 0; c < cols; ++c) dot += g[base + c] * y[base + c];
        for (int c = 0; c < cols; ++c) ga[base + c] += y[base + c] * (g[base + c] - dot);
      }
    };
    return o;
  }

  /// Row-wise layer normalization with learnable gain/offset.
  Var layer_norm_rows(Var x, Var gamma, Var beta, T eps) {
    const Shape& sx = shape(x);
    const Shape& sg = shape(gamma);
    const Shape& sb = shape(beta);
    if (sx.size() != 2 || sg.size() != 1 || sb.size() != 1 || sg[0] != sx[1] || sb[0] != sx[1]) {
      throw Error(ErrorCategory::Config, "layer_norm_rows: incompatible shapes " + shape_str(sx) +
                                             ", " + shape_str(sg) + ", " + shape_str(sb));
    }
    const int rows = sx[0], cols = sx[1];
    const auto& vx = val(x);
    const auto& vg = val(gamma);
    const auto& vb = val(beta);
    std::vector<T> out(vx.size());
    auto xhat = std::make_shared<std::vector<T>>(vx.size());
    auto inv_std = std::make_shared<std::vector<T>>(rows);
    for (int r = 0; r < rows; ++r) {
      const std::size_t base = static_cast<std::size_t>(r) * cols;
      T mean = T(0);
      for (int c = 0; c < cols; ++c) mean += vx[base + c];
      mean /= T(cols);
      T var = T(0);
      for (int c = 0; c < cols; ++c) {
        const T d = vx[base + c] - mean;
        var += d * d;
      }
      var /= T(cols);
      const T is = T(1) / std::sqrt(var + eps);
      (*inv_std)[r] = is;
      for (int c = 0; c < cols; ++c) {
        (*xhat)[base + c] = (vx[base + c] - mean) * is;
        out[base + c] = vg[c] * (*xhat)[base + c] + vb[c];
      }
    }
    Var o = push({rows, cols}, std::move(out), nullptr);
    const std::int32_t oid = o.id, idx = x.id, idg = gamma.id, idb = beta.id;
    nodes_[oid].back = [this, oid, idx, idg, idb, rows, cols, xhat, inv_std]() {
      const auto& g = nodes_[oid].grad;
      const auto& vg2 = nodes_[idg].val;
      auto& gx = nodes_[idx].grad;
      auto& gg = nodes_[idg].grad;
      auto& gb = nodes_[idb].grad;
      for (int r = 0; r < rows; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * cols;
        const T is = (*inv_std)[r];
        T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
        for (int c = 0; c < cols; ++c) {
          const T dxhat = g[base + c] * vg2[c];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * (*xhat)[base + c];
          gg[c] += g[base + c] * (*xhat)[base + c];
          gb[c] += g[base + c];
        }
        for (int c = 0; c < cols; ++c) {
          const T dxhat = g[base + c] * vg2[c];
          gx[base + c] += is * (dxhat - (sum_dxhat + (*xhat)[base + c] * sum_dxhat_xhat) / T(cols));
        }
      }
    };
    return o;
  }

  // ---- backward ----

  /// Accumulates d(loss)/d(node) for every node and flushes bound parameter
  /// gradients. loss must be a scalar.
  void backward(Var loss) {
    if (!loss.valid() || static_cast<std::size_t>(loss.id) >= nodes_.size()) {
      throw Error(ErrorCategory::Internal, "backward: invalid loss handle");
    }
    if (val(loss).size() != 1) {
      throw Error(ErrorCategory::Config,
                  "backward: loss must be scalar, got " + shape_str(shape(loss)));
    }
    for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), T(0));
    nodes_[loss.id].grad[0] = T(1);
    visits_ = 0;
    for (std::int32_t i = loss.id; i >= 0; --i) {
      if (nodes_[i].back) {
        nodes_[i].back();
        ++visits_;
      }
    }
  }

  // ---- accessors ----

  std::span<const T> value(Var v) const { return {val(v).data(), val(v).size()}; }
  const Shape& shape(Var v) const { return nodes_.at(v.id).shape; }
  std::span<const T> grad(Var v) const { return {nodes_.at(v.id).grad.data(), nodes_.at(v.id).grad.size()}; }

  T scalar(Var v) const {
    if (val(v).size() != 1) {
      throw Error(ErrorCategory::Internal, "scalar: node is not scalar");
    }
    return val(v)[0];
  }

  std::size_t node_count() const { return nodes_.size(); }
  /// Number of backward closures executed by the last backward() call.
  std::size_t backward_visits() const { return visits_; }

 private:
  struct Node {
    Shape shape;
    std::vector<T> val;
    std::vector<T> grad;
    std::function<void()> back;  // null for constants
  };

  const std::vector<T>& val(Var v) const { return nodes_.at(v.id).val; }

  Var push(Shape shape, std::vector<T> value, std::function<void()> back) {
    Node n;
    n.shape = std::move(shape);
    n.grad.assign(value.size(), T(0));
    n.val = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  void require_same_shape(Var a, Var b, const char* op) {
    if (shape(a) != shape(b)) {
      throw Error(ErrorCategory::Config, std::string(op) + ": shape mismatch " +
                                             shape_str(shape(a)) + " vs " + shape_str(shape(b)));
    }
  }

  // out = f(a) elementwise; fn(x, y, g) -> dx given input x, output y, upstream g.
  template <typename Fn>
  Var unary(Var a, std::vector<T> out, Fn fn) {
    Var o = push(shape(a), std::move(out), nullptr);
    const std::int32_t oid = o.id, ida = a.id;
    nodes_[oid].back = [this, oid, ida, fn]() {
      const auto& x = nodes_[ida].val;
      const auto& y = nodes_[oid].val;
      const auto& g = nodes_[oid].grad;
      auto& gx = nodes_[ida].grad;
      for (std::size_t i = 0; i < x.size(); ++i) gx[i] += fn(x[i], y[i], g[i]);
    };
    return o;
  }

  // fn(x_a, x_b, g) -> (dx_a, dx_b)
  template <typename Fn>
  Var binary_ew(Var a, Var b, std::vector<T> out, Fn fn) {
    Var o = push(shape(a), std::move(out), nullptr);
    const std::int32_t oid = o.id, ida = a.id, idb = b.id;
    nodes_[oid].back = [this, oid, ida, idb, fn]() {
      const auto& xa = nodes_[ida].val;
      const auto& xb = nodes_[idb].val;
      const auto& g = nodes_[oid].grad;
      auto& ga = nodes_[ida].grad;
      auto& gb = nodes_[idb].grad;
      for (std::size_t i = 0; i < xa.size(); ++i) {
        auto [da, db] = fn(xa[i], xb[i], g[i]);
        ga[i] += da;
        gb[i] += db;
      }
    };
    return o;
  }

  void hook_identity(Var out, Var in) {
    const std::int32_t oid = out.id, iid = in.id;
    nodes_[oid].back = [this, oid, iid]() {
      const auto& g = nodes_[oid].grad;
      auto& gi = nodes_[iid].grad;
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    };
  }

  // deque keeps references to existing nodes valid while new ops are pushed
  std::deque<Node> nodes_;
  std::size_t visits_ = 0;
};

}  // namespace grounder::ag
