// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "grounder/error.hpp"
#include "grounder/rng.hpp"

namespace grounder {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

/// One named trainable tensor. `grad` is the reverse-mode accumulator,
/// `m`/`v` are the optimizer moment buffers.
template <typename T>
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  std::vector<T> m;
  std::vector<T> v;

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

/// Registry of trainable tensors with unique names and deterministic
/// (registration) iteration order. Addresses stay stable after creation.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& create(const std::string& name, Shape shape) {
    if (by_name_.count(name)) {
      throw Error(ErrorCategory::Config, "parameter registered twice: " + name);
    }
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->shape = std::move(shape);
    const std::size_t n = shape_numel(p->shape);
    p->value.assign(n, T(0));
    p->grad.assign(n, T(0));
    p->m.assign(n, T(0));
    p->v.assign(n, T(0));
    Parameter<T>* raw = p.get();
    by_name_[name] = raw;
    order_.push_back(std::move(p));
    return *raw;
  }

  Parameter<T>* find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  Parameter<T>& at(const std::string& name) {
    Parameter<T>* p = find(name);
    if (!p) throw Error(ErrorCategory::Config, "unknown parameter: " + name);
    return *p;
  }

  const std::vector<std::unique_ptr<Parameter<T>>>& items() const { return order_; }

  std::size_t count() const { return order_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : order_) n += p->size();
    return n;
  }

  void zero_grads() {
    for (auto& p : order_) p->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> order_;
  std::unordered_map<std::string, Parameter<T>*> by_name_;
};

/// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for a [fan_in, fan_out] matrix.
/// Draws are made in double then cast, so single- and double-precision models
/// built from the same seed agree up to rounding.
template <typename T>
void init_projection(Parameter<T>& p, Rng& rng) {
  const int fan_in = p.shape.empty() ? 1 : p.shape[0];
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
  for (auto& x : p.value) x = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void fill_value(Parameter<T>& p, T v) {
  std::fill(p.value.begin(), p.value.end(), v);
}

}  // namespace grounder
