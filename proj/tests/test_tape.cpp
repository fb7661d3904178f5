// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "grounder/error.hpp"
#include "grounder/losses.hpp"
#include "grounder/rng.hpp"
#include "grounder/tape.hpp"
#include "grounder/tensor.hpp"
#include "oracles.hpp"

using namespace grounder;

namespace {

// Central finite difference of a scalar function of one parameter entry.
template <typename Fn>
double fd(Fn&& f, Parameter<double>& p, std::size_t i, double h) {
  const double orig = p.value[i];
  p.value[i] = orig + h;
  const double up = f();
  p.value[i] = orig - h;
  const double down = f();
  p.value[i] = orig;
  return (up - down) / (2 * h);
}

}  // namespace

TEST_CASE("row_softmax of uniform logits") {
  ag::Tape<double> t;
  ag::Var x = t.constant({3}, {0.0, 0.0, 0.0});
  ag::Var y = t.softmax_rows(x);
  for (double v : t.value(y)) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("row_softmax is overflow-safe") {
  ag::Tape<double> t;
  ag::Var y = t.softmax_rows(t.constant({2}, {1000.0, 0.0}));
  auto v = t.value(y);
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(0.0));
  CHECK(std::isfinite(v[0]));
}

TEST_CASE("matmul by identity") {
  ag::Tape<double> t;
  ag::Var eye = t.constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  ag::Var x = t.constant({3, 2}, {1, 2, 3, 4, 5, 6});
  ag::Var y = t.matmul(eye, x);
  auto v = t.value(y);
  const std::vector<double> expect{1, 2, 3, 4, 5, 6};
  for (int i = 0; i < 6; ++i) CHECK(v[i] == doctest::Approx(expect[i]));
}

TEST_CASE("sigmoid at zero") {
  ag::Tape<double> t;
  CHECK(t.scalar(t.sigmoid(t.constant_scalar(0.0))) == doctest::Approx(0.5));
}

TEST_CASE("backward of sum(x*x) is 2x") {
  ParamStore<double> store;
  auto& x = store.create("x", {1});
  x.value[0] = 3.0;
  ag::Tape<double> t;
  ag::Var leaf = t.leaf(x);
  ag::Var loss = t.sum(t.mul(leaf, leaf));
  t.backward(loss);
  CHECK(x.grad[0] == doctest::Approx(6.0));
}

TEST_CASE("backward rejects non-scalar loss") {
  ag::Tape<double> t;
  ag::Var x = t.constant({2}, {1.0, 2.0});
  CHECK_THROWS_AS(t.backward(x), Error);
}

TEST_CASE("shape mismatch errors name both shapes") {
  ag::Tape<double> t;
  ag::Var a = t.constant({2, 3}, std::vector<double>(6, 0.0));
  ag::Var b = t.constant({4, 5}, std::vector<double>(20, 0.0));
  try {
    t.matmul(a, b);
    FAIL("expected throw");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,5]") != std::string::npos);
  }
  CHECK_THROWS_AS(t.add(a, b), Error);
}

TEST_CASE("softmax-then-pick gradient matches the softmax Jacobian row") {
  // finite differences: step 1e-6, double precision, rel err < 1e-6
  ParamStore<double> store;
  auto& x = store.create("x", {5});
  Rng rng(3);
  for (auto& v : x.value) v = rng.uniform(-2.0, 2.0);
  const int picked = 2;

  auto loss_value = [&]() {
    ag::Tape<double> t;
    return t.scalar(t.pick(t.softmax_rows(t.leaf(x)), picked));
  };

  ag::Tape<double> t;
  ag::Var leaf = t.leaf(x);
  ag::Var loss = t.pick(t.softmax_rows(leaf), picked);
  t.backward(loss);

  for (std::size_t i = 0; i < x.size(); ++i) {
    const double numeric = fd(loss_value, x, i, 1e-6);
    const double denom = std::max({1e-6, std::abs(numeric), std::abs(x.grad[i])});
    CHECK(std::abs(numeric - x.grad[i]) / denom < 1e-6);
  }

  // analytic Jacobian row: d p_k / d x_i = p_k (delta_ki - p_i)
  auto p = t.value(t.softmax_rows(t.leaf(x)));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double jac = p[picked] * ((static_cast<int>(i) == picked ? 1.0 : 0.0) - p[i]);
    CHECK(x.grad[i] == doctest::Approx(jac).epsilon(1e-9));
  }
}

TEST_CASE("elementwise and reduction gradients match finite differences") {
  ParamStore<double> store;
  auto& x = store.create("x", {6});
  auto& y = store.create("y", {6});
  Rng rng(5);
  for (auto& v : x.value) v = rng.uniform(0.2, 2.0);
  for (auto& v : y.value) v = rng.uniform(0.2, 2.0);

  // exercises div, vmin, vmax, abs, log, relu, sigmoid, clamp_min in one scalar
  auto build = [&](ag::Tape<double>& t) {
    ag::Var a = t.leaf(x);
    ag::Var b = t.leaf(y);
    ag::Var expr = t.add(t.div(a, b), t.vmin(a, b));
    expr = t.add(expr, t.vmax(t.sigmoid(a), t.relu(t.sub(a, b))));
    expr = t.add(expr, t.log(t.clamp_min(t.abs(t.sub(b, a)), 1e-3)));
    return t.sum(t.mul(expr, expr));
  };
  auto loss_value = [&]() {
    ag::Tape<double> t;
    return t.scalar(build(t));
  };

  ag::Tape<double> t;
  ag::Var loss = build(t);
  t.backward(loss);

  for (auto* p : {&x, &y}) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double numeric = fd(loss_value, *p, i, 1e-6);
      const double denom = std::max({1e-2, std::abs(numeric), std::abs(p->grad[i])});
      CHECK(std::abs(numeric - p->grad[i]) / denom < 1e-5);
    }
  }
}

TEST_CASE("matmul, layer_norm, gather and concat gradients match finite differences") {
  ParamStore<double> store;
  auto& a = store.create("a", {3, 4});
  auto& b = store.create("b", {4, 2});
  auto& gamma = store.create("gamma", {2});
  auto& beta = store.create("beta", {2});
  Rng rng(9);
  for (auto& v : a.value) v = rng.normal();
  for (auto& v : b.value) v = rng.normal();
  for (auto& v : gamma.value) v = rng.uniform(0.5, 1.5);
  for (auto& v : beta.value) v = rng.uniform(-0.5, 0.5);

  auto build = [&](ag::Tape<double>& t) {
    ag::Var m = t.matmul(t.leaf(a), t.leaf(b));                        // [3,2]
    ag::Var n = t.layer_norm_rows(m, t.leaf(gamma), t.leaf(beta), 1e-5);
    ag::Var g = t.gather_rows(n, {2, 0, 0});                           // repeated row
    ag::Var c = t.concat_cols(g, t.matmul_nt(g, g));                   // [3, 2+3]
    return t.sum(t.mul(c, c));
  };
  auto loss_value = [&]() {
    ag::Tape<double> t;
    return t.scalar(build(t));
  };

  ag::Tape<double> t;
  t.backward(build(t));

  for (auto* p : {&a, &b, &gamma, &beta}) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double numeric = fd(loss_value, *p, i, 1e-6);
      const double denom = std::max({1e-2, std::abs(numeric), std::abs(p->grad[i])});
      CHECK(std::abs(numeric - p->grad[i]) / denom < 1e-5);
    }
  }
}

TEST_CASE("tape walks each node exactly once on a linear graph") {
  ParamStore<double> store;
  auto& x = store.create("x", {1});
  x.value[0] = 1.5;
  ag::Tape<double> t;
  ag::Var v = t.leaf(x);
  const int chain = 17;
  for (int i = 0; i < chain; ++i) v = t.scale(v, 1.01);
  t.backward(v);
  // chain scale nodes + the leaf flush node
  CHECK(t.backward_visits() == static_cast<std::size_t>(chain + 1));
  CHECK(x.grad[0] == doctest::Approx(std::pow(1.01, chain)));
}

TEST_CASE("x + x accumulates both paths without double-visiting") {
  ParamStore<double> store;
  auto& x = store.create("x", {1});
  x.value[0] = 4.0;
  ag::Tape<double> t;
  ag::Var leaf = t.leaf(x);
  ag::Var loss = t.add(leaf, leaf);
  t.backward(loss);
  CHECK(t.backward_visits() == 2);  // add node + leaf
  CHECK(x.grad[0] == doctest::Approx(2.0));
}

TEST_CASE("unreachable parameters keep zero gradient") {
  ParamStore<double> store;
  auto& x = store.create("x", {1});
  auto& unused = store.create("unused", {3});
  x.value[0] = 2.0;
  for (auto& v : unused.value) v = 1.0;
  ag::Tape<double> t;
  ag::Var lx = t.leaf(x);
  t.leaf(unused);  // taped but not connected to the loss
  t.backward(t.mul(lx, lx));
  CHECK(x.grad[0] == doctest::Approx(4.0));
  for (double g : unused.grad) CHECK(g == 0.0);
}

TEST_CASE("identical seeds give bitwise-identical losses") {
  auto run = []() {
    ParamStore<float> store;
    auto& w = store.create("w", {8, 8});
    Rng rng(42);
    init_projection(w, rng);
    ag::Tape<float> t;
    ag::Var x = t.constant({2, 8}, std::vector<float>(16, 0.25f));
    ag::Var y = t.softmax_rows(t.matmul(x, t.leaf(w)));
    return t.scalar(t.sum(t.mul(y, y)));
  };
  const float a = run();
  const float b = run();
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("taped giou agrees with the closed form and differentiates") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const BoxCxCyWH pred = testing::random_box(rng);
    const BoxCxCyWH gt = testing::random_box(rng);
    ag::Tape<double> t;
    ag::Var p4 = t.constant({4}, {pred.cx, pred.cy, pred.w, pred.h});
    CHECK(t.scalar(giou_taped(t, p4, gt)) == doctest::Approx(giou(pred, gt)).epsilon(1e-9));
  }

  // coordinates chosen so no pred corner ties a gt corner (min/max kinks)
  ParamStore<double> store;
  auto& box = store.create("box", {4});
  box.value = {0.41, 0.47, 0.31, 0.23};
  const BoxCxCyWH gt{0.5, 0.5, 0.25, 0.3};
  auto loss_value = [&]() {
    ag::Tape<double> t;
    return t.scalar(giou_taped(t, t.leaf(box), gt));
  };
  ag::Tape<double> t;
  t.backward(giou_taped(t, t.leaf(box), gt));
  for (std::size_t i = 0; i < 4; ++i) {
    const double numeric = fd(loss_value, box, i, 1e-7);
    CHECK(box.grad[i] == doctest::Approx(numeric).epsilon(1e-5));
  }
}
