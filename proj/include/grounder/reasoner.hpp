// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "grounder/attention.hpp"
#include "grounder/tape.hpp"
#include "grounder/tensor.hpp"

namespace grounder {

struct ReasonerConfig {
  int heads = 4;
  int layers = 3;
  int ffn_mult = 4;  // decoder feed-forward hidden dim = ffn_mult * d_obj
};

/// One standard post-norm decoder layer: self-attention over proposals,
/// cross-attention to tokens, position-wise feed-forward; residuals and layer
/// norm around each sublayer.
template <typename T>
struct DecoderLayerParams {
  AttentionParams<T> self_attn;
  AttentionParams<T> cross_attn;
  Parameter<T>* ffn_w1 = nullptr;
  Parameter<T>* ffn_b1 = nullptr;
  Parameter<T>* ffn_w2 = nullptr;
  Parameter<T>* ffn_b2 = nullptr;
  Parameter<T>* ln1_gamma = nullptr;
  Parameter<T>* ln1_beta = nullptr;
  Parameter<T>* ln2_gamma = nullptr;
  Parameter<T>* ln2_beta = nullptr;
  Parameter<T>* ln3_gamma = nullptr;
  Parameter<T>* ln3_beta = nullptr;
};

template <typename T>
struct ReasonerParams {
  std::vector<DecoderLayerParams<T>> layers;
  Parameter<T>* logit_w = nullptr;  // [d_obj, 1], bias-free scalar head
};

template <typename T>
ReasonerParams<T> register_reasoner(ParamStore<T>& store, const ReasonerConfig& cfg, int d_obj,
                                    int d_t) {
  if (cfg.layers < 1) {
    throw Error(ErrorCategory::Config, "reasoner config: layers must be >= 1");
  }
  const int hidden = cfg.ffn_mult * d_obj;
  ReasonerParams<T> p;
  p.layers.resize(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string lp = "reasoner.layer" + std::to_string(l);
    auto& layer = p.layers[l];
    layer.self_attn = register_attention(store, lp + ".self", d_obj, d_obj, cfg.heads);
    layer.cross_attn = register_attention(store, lp + ".cross", d_obj, d_t, cfg.heads);
    layer.ffn_w1 = &store.create(lp + ".ffn.w1", {d_obj, hidden});
    layer.ffn_b1 = &store.create(lp + ".ffn.b1", {hidden});
    layer.ffn_w2 = &store.create(lp + ".ffn.w2", {hidden, d_obj});
    layer.ffn_b2 = &store.create(lp + ".ffn.b2", {d_obj});
    layer.ln1_gamma = &store.create(lp + ".ln1.gamma", {d_obj});
    layer.ln1_beta = &store.create(lp + ".ln1.beta", {d_obj});
    layer.ln2_gamma = &store.create(lp + ".ln2.gamma", {d_obj});
    layer.ln2_beta = &store.create(lp + ".ln2.beta", {d_obj});
    layer.ln3_gamma = &store.create(lp + ".ln3.gamma", {d_obj});
    layer.ln3_beta = &store.create(lp + ".ln3.beta", {d_obj});
  }
  p.logit_w = &store.create("reasoner.logit.w", {d_obj, 1});
  return p;
}

/// Decoder over the N proposal rows conditioned on the tokens; returns one
/// logit per proposal as a [N] vector. No positional encoding is added, so
/// the map is exactly permutation-equivariant in the proposals.
template <typename T>
ag::Var reason(ag::Tape<T>& tape, ag::Var o_star, ag::Var tokens, const ReasonerParams<T>& params,
               const ReasonerConfig& cfg, int d_obj) {
  const int head_dim = d_obj / cfg.heads;
  const T inv_scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(head_dim)));
  ag::Var x = o_star;
  for (const auto& layer : params.layers) {
    ag::Var sa = multi_head_attention(tape, x, x, layer.self_attn, inv_scale);
    x = tape.layer_norm_rows(tape.add(x, sa), tape.leaf(*layer.ln1_gamma),
                             tape.leaf(*layer.ln1_beta), T(1e-5));
    ag::Var ca = multi_head_attention(tape, x, tokens, layer.cross_attn, inv_scale);
    x = tape.layer_norm_rows(tape.add(x, ca), tape.leaf(*layer.ln2_gamma),
                             tape.leaf(*layer.ln2_beta), T(1e-5));
    ag::Var h = tape.relu(
        tape.add_row_bias(tape.matmul(x, tape.leaf(*layer.ffn_w1)), tape.leaf(*layer.ffn_b1)));
    ag::Var ff = tape.add_row_bias(tape.matmul(h, tape.leaf(*layer.ffn_w2)),
                                   tape.leaf(*layer.ffn_b2));
    x = tape.layer_norm_rows(tape.add(x, ff), tape.leaf(*layer.ln3_gamma),
                             tape.leaf(*layer.ln3_beta), T(1e-5));
  }
  ag::Var logits = tape.matmul(x, tape.leaf(*params.logit_w));  // [N,1]
  return tape.reshape(logits, {tape.shape(logits)[0]});
}

/// Softmax over the proposal logits. Rejects non-finite logits by index.
template <typename T>
ag::Var probs(ag::Tape<T>& tape, ag::Var logits) {
  auto v = tape.value(logits);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(static_cast<double>(v[i]))) {
      throw Error(ErrorCategory::Numeric, "probs: non-finite logit at index " + std::to_string(i));
    }
  }
  return tape.softmax_rows(logits);
}

/// Probability-weighted sum of the ORIGINAL object queries (the skip
/// connection): o_ref = sum_i p_i * O_i.
template <typename T>
ag::Var soft_select(ag::Tape<T>& tape, ag::Var p, ag::Var original_queries) {
  const Shape sp = tape.shape(p);
  const Shape so = tape.shape(original_queries);
  if (sp.size() != 1 || so.size() != 2 || sp[0] != so[0]) {
    throw Error(ErrorCategory::Config, "soft_select: length mismatch " + shape_str(sp) + " vs " +
                                           shape_str(so));
  }
  ag::Var row = tape.reshape(p, {1, sp[0]});
  ag::Var sel = tape.matmul(row, original_queries);  // [1, d_obj]
  return tape.reshape(sel, {so[1]});
}

/// Box refinement head: 3 linear layers (hidden dim d_obj, relu between)
/// mapping d_obj -> 4, then elementwise sigmoid to (cx, cy, w, h).
template <typename T>
struct LocalizerParams {
  Parameter<T>* w1 = nullptr;
  Parameter<T>* b1 = nullptr;
  Parameter<T>* w2 = nullptr;
  Parameter<T>* b2 = nullptr;
  Parameter<T>* w3 = nullptr;
  Parameter<T>* b3 = nullptr;
};

template <typename T>
LocalizerParams<T> register_localizer(ParamStore<T>& store, int d_obj) {
  LocalizerParams<T> p;
  p.w1 = &store.create("localizer.w1", {d_obj, d_obj});
  p.b1 = &store.create("localizer.b1", {d_obj});
  p.w2 = &store.create("localizer.w2", {d_obj, d_obj});
  p.b2 = &store.create("localizer.b2", {d_obj});
  p.w3 = &store.create("localizer.w3", {d_obj, 4});
  p.b3 = &store.create("localizer.b3", {4});
  return p;
}

template <typename T>
ag::Var localize(ag::Tape<T>& tape, ag::Var o_ref, const LocalizerParams<T>& p) {
  const Shape s = tape.shape(o_ref);
  ag::Var x = tape.reshape(o_ref, {1, s[0]});
  x = tape.relu(tape.add_row_bias(tape.matmul(x, tape.leaf(*p.w1)), tape.leaf(*p.b1)));
  x = tape.relu(tape.add_row_bias(tape.matmul(x, tape.leaf(*p.w2)), tape.leaf(*p.b2)));
  x = tape.add_row_bias(tape.matmul(x, tape.leaf(*p.w3)), tape.leaf(*p.b3));
  return tape.sigmoid(tape.reshape(x, {4}));
}

}  // namespace grounder
