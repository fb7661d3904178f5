// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "grounder/tape.hpp"
#include "grounder/tensor.hpp"

namespace grounder {

/// Per-head projection triple plus the shared output projection. Heads carry
/// independent matrices; no biases, matching a pure projection attention.
template <typename T>
struct AttentionParams {
  struct Head {
    Parameter<T>* wq = nullptr;  // [d_q, head_dim]
    Parameter<T>* wk = nullptr;  // [d_kv, head_dim]
    Parameter<T>* wv = nullptr;  // [d_kv, head_dim]
  };
  std::vector<Head> heads;
  Parameter<T>* wo = nullptr;  // [n_heads*head_dim, d_q]
};

template <typename T>
AttentionParams<T> register_attention(ParamStore<T>& store, const std::string& prefix, int d_q,
                                      int d_kv, int n_heads) {
  if (n_heads < 1 || d_q % n_heads != 0) {
    throw Error(ErrorCategory::Config,
                "attention " + prefix + ": model dim " + std::to_string(d_q) +
                    " not divisible by heads " + std::to_string(n_heads));
  }
  const int head_dim = d_q / n_heads;
  AttentionParams<T> p;
  p.heads.resize(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    p.heads[h].wq = &store.create(hp + ".wq", {d_q, head_dim});
    p.heads[h].wk = &store.create(hp + ".wk", {d_kv, head_dim});
    p.heads[h].wv = &store.create(hp + ".wv", {d_kv, head_dim});
  }
  p.wo = &store.create(prefix + ".wo", {d_q, d_q});
  return p;
}

/// Multi-head attention: queries from `q_src` [N, d_q], keys/values from
/// `kv_src` [M, d_kv]. Per head: softmax(q_src Wq (kv_src Wk)^T * inv_scale)
/// (kv_src Wv); head outputs are concatenated and passed through Wo.
template <typename T>
ag::Var multi_head_attention(ag::Tape<T>& tape, ag::Var q_src, ag::Var kv_src,
                             const AttentionParams<T>& params, T inv_scale) {
  ag::Var heads_out;
  for (std::size_t h = 0; h < params.heads.size(); ++h) {
    const auto& head = params.heads[h];
    ag::Var q = tape.matmul(q_src, tape.leaf(*head.wq));
    ag::Var k = tape.matmul(kv_src, tape.leaf(*head.wk));
    ag::Var v = tape.matmul(kv_src, tape.leaf(*head.wv));
    ag::Var scores = tape.scale(tape.matmul_nt(q, k), inv_scale);
    ag::Var attn = tape.softmax_rows(scores);
    ag::Var out = tape.matmul(attn, v);
    heads_out = h == 0 ? out : tape.concat_cols(heads_out, out);
  }
  return tape.matmul(heads_out, tape.leaf(*params.wo));
}

}  // namespace grounder
