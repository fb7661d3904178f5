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

struct BranchConfig {
  int heads = 4;
  int layers = 3;
  bool pre_norm = false;  // optional stabilization; off reproduces the plain residual form
};

/// One cross-attention branch: `layers` residual layers of
/// m <- m + attention(m, tokens), parameters unshared across layers.
template <typename T>
struct BranchParams {
  struct Layer {
    AttentionParams<T> attn;
    Parameter<T>* ln_gamma = nullptr;  // present only with pre_norm
    Parameter<T>* ln_beta = nullptr;
  };
  std::vector<Layer> layers;
};

/// The three independent branches (box, class, visual), the box projection
/// phi, and the fusion projection.
template <typename T>
struct MultiBranchParams {
  BranchParams<T> box;
  BranchParams<T> cls;
  BranchParams<T> vis;
  Parameter<T>* phi_w = nullptr;     // [4, d_obj]
  Parameter<T>* phi_b = nullptr;     // [d_obj]
  Parameter<T>* fusion_w = nullptr;  // [3*d_obj, d_obj], no bias
};

template <typename T>
BranchParams<T> register_branch(ParamStore<T>& store, const std::string& prefix,
                                const BranchConfig& cfg, int d_obj, int d_t) {
  BranchParams<T> p;
  p.layers.resize(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string lp = prefix + ".layer" + std::to_string(l);
    p.layers[l].attn = register_attention(store, lp + ".attn", d_obj, d_t, cfg.heads);
    if (cfg.pre_norm) {
      p.layers[l].ln_gamma = &store.create(lp + ".ln.gamma", {d_obj});
      p.layers[l].ln_beta = &store.create(lp + ".ln.beta", {d_obj});
    }
  }
  return p;
}

template <typename T>
MultiBranchParams<T> register_multibranch(ParamStore<T>& store, const BranchConfig& cfg, int d_obj,
                                          int d_t) {
  if (cfg.layers < 1) {
    throw Error(ErrorCategory::Config, "branch config: layers must be >= 1");
  }
  MultiBranchParams<T> p;
  p.phi_w = &store.create("phi.w", {4, d_obj});
  p.phi_b = &store.create("phi.b", {d_obj});
  p.box = register_branch(store, "branch.box", cfg, d_obj, d_t);
  p.cls = register_branch(store, "branch.class", cfg, d_obj, d_t);
  p.vis = register_branch(store, "branch.visual", cfg, d_obj, d_t);
  p.fusion_w = &store.create("fusion.wpsi", {3 * d_obj, d_obj});
  return p;
}

/// Linear lift of box coordinates into the object feature space: [N,4] -> [N,d_obj].
template <typename T>
ag::Var phi_project(ag::Tape<T>& tape, ag::Var boxes, const MultiBranchParams<T>& p) {
  return tape.add_row_bias(tape.matmul(boxes, tape.leaf(*p.phi_w)), tape.leaf(*p.phi_b));
}

/// k-fold composition of residual cross-attention layers. The score scaling
/// divisor is sqrt(d_obj) for every head, independent of the head count.
template <typename T>
ag::Var branch_forward(ag::Tape<T>& tape, ag::Var m, ag::Var tokens, const BranchParams<T>& branch,
                       int d_obj) {
  const T inv_scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(d_obj)));
  for (const auto& layer : branch.layers) {
    ag::Var q_src = m;
    if (layer.ln_gamma) {
      q_src = tape.layer_norm_rows(m, tape.leaf(*layer.ln_gamma), tape.leaf(*layer.ln_beta),
                                   T(1e-5));
    }
    m = tape.add(m, multi_head_attention(tape, q_src, tokens, layer.attn, inv_scale));
  }
  return m;
}

/// Concatenate (B~, C~, O~) along the feature dim, in that order, and project
/// with the bias-free fusion matrix.
template <typename T>
ag::Var fuse(ag::Tape<T>& tape, ag::Var b_tilde, ag::Var c_tilde, ag::Var o_tilde,
             const MultiBranchParams<T>& p) {
  ag::Var cat = tape.concat_cols(tape.concat_cols(b_tilde, c_tilde), o_tilde);
  return tape.matmul(cat, tape.leaf(*p.fusion_w));
}

/// Full multi-branch pass: branch the three attribute streams against the
/// tokens and fuse into task-aware proposal representations O*.
template <typename T>
ag::Var multibranch_forward(ag::Tape<T>& tape, ag::Var queries, ag::Var boxes, ag::Var class_embs,
                            ag::Var tokens, const MultiBranchParams<T>& p, int d_obj) {
  ag::Var b_tilde = branch_forward(tape, phi_project(tape, boxes, p), tokens, p.box, d_obj);
  ag::Var c_tilde = branch_forward(tape, class_embs, tokens, p.cls, d_obj);
  ag::Var o_tilde = branch_forward(tape, queries, tokens, p.vis, d_obj);
  return fuse(tape, b_tilde, c_tilde, o_tilde, p);
}

}  // namespace grounder
