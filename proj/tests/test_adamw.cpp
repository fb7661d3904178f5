// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>

#include "grounder/adamw.hpp"
#include "grounder/error.hpp"
#include "grounder/tensor.hpp"

using namespace grounder;

TEST_CASE("zero grads and zero weight decay leave params unchanged") {
  ParamStore<double> store;
  auto& p = store.create("w", {3});
  p.value = {1.0, -2.0, 0.5};
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW<double> opt(cfg);
  opt.step(store);
  CHECK(p.value[0] == 1.0);
  CHECK(p.value[1] == -2.0);
  CHECK(p.value[2] == 0.5);
}

TEST_CASE("one step from zero moments approximates -lr*sign(g)") {
  // hand-applied update: m_hat = g, v_hat = g^2, so step = lr*g/(|g|+eps)
  ParamStore<double> store;
  auto& p = store.create("w", {1});
  p.value[0] = 0.7;
  p.grad[0] = 0.3;
  AdamWConfig cfg;
  cfg.lr = 1e-3;
  cfg.weight_decay = 0.0;
  AdamW<double> opt(cfg);
  opt.step(store);
  const double expected = 0.7 - 1e-3 * (0.3 / (std::sqrt(0.3 * 0.3) + 1e-8));
  CHECK(p.value[0] == doctest::Approx(expected).epsilon(1e-10));
  CHECK(std::abs((0.7 - p.value[0]) - 1e-3) < 1e-6);  // ~ lr * sign(g)
  CHECK(p.grad[0] == 0.0);                            // grads zeroed after the step
}

TEST_CASE("decoupled decay shrinks params by (1 - lr*wd) with zero grad") {
  ParamStore<double> store;
  auto& p = store.create("w", {2});
  p.value = {2.0, -4.0};
  AdamWConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;
  AdamW<double> opt(cfg);
  opt.step(store);
  CHECK(p.value[0] == doctest::Approx(2.0 * (1.0 - 0.01 * 0.1)).epsilon(1e-12));
  CHECK(p.value[1] == doctest::Approx(-4.0 * (1.0 - 0.01 * 0.1)).epsilon(1e-12));
}

TEST_CASE("non-finite gradient aborts the step naming the parameter") {
  ParamStore<double> store;
  auto& good = store.create("good", {1});
  auto& bad = store.create("model.bad_weight", {2});
  good.value[0] = 1.0;
  bad.value = {1.0, 1.0};
  bad.grad[1] = std::numeric_limits<double>::quiet_NaN();
  AdamW<double> opt(AdamWConfig{});
  try {
    opt.step(store);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("model.bad_weight") != std::string::npos);
  }
  // nothing mutated: the step applies to all parameters or none
  CHECK(good.value[0] == 1.0);
  CHECK(bad.value[0] == 1.0);
  CHECK(opt.steps() == 0);
}

TEST_CASE("bias correction matches a two-step hand computation") {
  ParamStore<double> store;
  auto& p = store.create("w", {1});
  p.value[0] = 0.0;
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.999;
  cfg.eps = 1e-8;
  cfg.weight_decay = 0.0;
  AdamW<double> opt(cfg);

  double m = 0.0, v = 0.0, x = 0.0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? 1.0 : -0.5;
    p.grad[0] = g;
    opt.step(store);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    x -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(p.value[0] == doctest::Approx(x).epsilon(1e-12));
  }
}
