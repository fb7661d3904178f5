// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

#include "grounder/error.hpp"
#include "grounder/tensor.hpp"

namespace grounder {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// AdamW with decoupled weight decay: decay is applied to the weights
/// directly, never mixed into the moment estimates. Gradients are zeroed
/// after a successful step.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  void step(ParamStore<T>& store) {
    // Validate first: a step either applies to every parameter or to none.
    for (const auto& p : store.items()) {
      for (T g : p->grad) {
        if (!std::isfinite(static_cast<double>(g))) {
          throw Error(ErrorCategory::Numeric,
                      "adamw: non-finite gradient in parameter " + p->name);
        }
      }
    }
    ++t_;
    const T lr = static_cast<T>(cfg_.lr);
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T eps = static_cast<T>(cfg_.eps);
    const T wd = static_cast<T>(cfg_.weight_decay);
    const T bc1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, static_cast<double>(t_)));
    const T bc2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, static_cast<double>(t_)));
    for (const auto& p : store.items()) {
      for (std::size_t i = 0; i < p->size(); ++i) {
        p->value[i] *= (T(1) - lr * wd);
        const T g = p->grad[i];
        p->m[i] = b1 * p->m[i] + (T(1) - b1) * g;
        p->v[i] = b2 * p->v[i] + (T(1) - b2) * g * g;
        const T mhat = p->m[i] / bc1;
        const T vhat = p->v[i] / bc2;
        p->value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      p->zero_grad();
    }
  }

  std::int64_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace grounder
