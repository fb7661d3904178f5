// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grounder/losses.hpp"
#include "grounder/multibranch.hpp"
#include "grounder/proposal_graph.hpp"
#include "grounder/reasoner.hpp"
#include "grounder/rng.hpp"
#include "grounder/tape.hpp"
#include "grounder/tensor.hpp"

namespace grounder {

struct ModelConfig {
  int d_obj = 64;
  int d_t = 32;
  BranchConfig branch;
  ReasonerConfig reasoner;
  bool multi_branch = true;  // off bypasses branches and fusion: O* := O

  void validate() const {
    if (d_obj < 1 || d_t < 1) {
      throw Error(ErrorCategory::Config, "model config: d_obj and d_t must be >= 1");
    }
    if (d_obj % branch.heads != 0 || d_obj % reasoner.heads != 0) {
      throw Error(ErrorCategory::Config,
                  "model config: d_obj " + std::to_string(d_obj) +
                      " must be divisible by branch heads " + std::to_string(branch.heads) +
                      " and reasoner heads " + std::to_string(reasoner.heads));
    }
  }
};

/// Per-proposal grounding result: logits, the probability distribution, the
/// soft-selected query representation, and the refined box.
struct GroundingOutput {
  std::vector<double> logits;
  std::vector<double> probs;
  int argmax = 0;
  std::vector<double> o_ref;
  BoxCxCyWH refined_box;
};

template <typename T>
struct ForwardVars {
  ag::Var o_star;       // [N, d_obj] reasoner input (O* or the raw queries)
  ag::Var logits;       // [N]
  ag::Var p;            // [N]
  ag::Var o_ref;        // [d_obj]
  ag::Var refined_box;  // [4] cxcywh after sigmoid
};

struct LossParts {
  double cls = 0.0;
  double giou = 0.0;
  double l1 = 0.0;
  double total = 0.0;
  int target_index = 0;
};

/// The trainable second stage: multi-branch fusion, object reasoner, soft
/// selection over the original queries, and the box refinement head.
///
/// Parameter registration order is fixed by construction, so a given
/// (config, seed) pair always produces the same initial weights.
template <typename T>
class GroundingModel {
 public:
  GroundingModel(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.multi_branch) {
      mb_ = register_multibranch<T>(params_, cfg_.branch, cfg_.d_obj, cfg_.d_t);
    }
    reasoner_ = register_reasoner<T>(params_, cfg_.reasoner, cfg_.d_obj, cfg_.d_t);
    localizer_ = register_localizer<T>(params_, cfg_.d_obj);
    init_params(seed);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  ForwardVars<T> forward(ag::Tape<T>& tape, const ProposalGraph& g) {
    check_graph(g);
    const int n = static_cast<int>(g.nodes.size());
    ag::Var queries = tape.constant({n, cfg_.d_obj}, flatten_queries(g));
    ag::Var tokens = tape.constant({g.text.n_tokens, cfg_.d_t}, to_t(g.text.data));

    ForwardVars<T> out;
    if (cfg_.multi_branch) {
      ag::Var boxes = tape.constant({n, 4}, flatten_boxes(g));
      ag::Var class_embs = tape.constant({n, cfg_.d_obj}, flatten_class_embs(g));
      out.o_star = multibranch_forward(tape, queries, boxes, class_embs, tokens, mb_, cfg_.d_obj);
    } else {
      out.o_star = queries;
    }
    out.logits = reason(tape, out.o_star, tokens, reasoner_, cfg_.reasoner, cfg_.d_obj);
    out.p = probs(tape, out.logits);
    out.o_ref = soft_select(tape, out.p, queries);
    out.refined_box = localize(tape, out.o_ref, localizer_);
    return out;
  }

  /// Composite loss (classification + GIoU + L1) for one graph.
  ag::Var loss(ag::Tape<T>& tape, const ProposalGraph& g, const LossWeights& w,
               LossParts* parts = nullptr) {
    ForwardVars<T> fw = forward(tape, g);
    std::vector<BoxCxCyWH> boxes;
    boxes.reserve(g.nodes.size());
    for (const auto& node : g.nodes) boxes.push_back(node.box);
    const int r = cls_target(boxes, g.gt_box);
    ag::Var cls = cls_loss(tape, fw.p, r);
    const auto box = box_losses(tape, fw.refined_box, g.gt_box);
    ag::Var total = tape.add(
        tape.add(tape.scale(cls, static_cast<T>(w.lambda_cls)),
                 tape.scale(box.giou_loss, static_cast<T>(w.lambda_giou))),
        box.l1_loss);
    if (parts) {
      parts->cls = static_cast<double>(tape.scalar(cls));
      parts->giou = static_cast<double>(tape.scalar(box.giou_loss));
      parts->l1 = static_cast<double>(tape.scalar(box.l1_loss));
      parts->total = static_cast<double>(tape.scalar(total));
      parts->target_index = r;
    }
    return total;
  }

  GroundingOutput infer(const ProposalGraph& g) {
    ag::Tape<T> tape;
    ForwardVars<T> fw = forward(tape, g);
    GroundingOutput out;
    auto sv = tape.value(fw.logits);
    out.logits.assign(sv.begin(), sv.end());
    auto pv = tape.value(fw.p);
    out.probs.assign(pv.begin(), pv.end());
    out.argmax = 0;
    for (std::size_t i = 1; i < out.probs.size(); ++i) {
      if (out.probs[i] > out.probs[out.argmax]) out.argmax = static_cast<int>(i);
    }
    auto ov = tape.value(fw.o_ref);
    out.o_ref.assign(ov.begin(), ov.end());
    auto bv = tape.value(fw.refined_box);
    out.refined_box = {static_cast<double>(bv[0]), static_cast<double>(bv[1]),
                       static_cast<double>(bv[2]), static_cast<double>(bv[3])};
    return out;
  }

 private:
  void init_params(std::uint64_t seed) {
    Rng rng(substream(seed, "model-init"));
    for (const auto& p : params_.items()) {
      if (p->shape.size() == 2) {
        init_projection(*p, rng);
      } else if (p->name.size() > 6 && p->name.rfind(".gamma") == p->name.size() - 6) {
        fill_value(*p, T(1));
      } else {
        fill_value(*p, T(0));  // biases and layer-norm offsets
      }
    }
  }

  void check_graph(const ProposalGraph& g) const {
    if (g.nodes.empty()) {
      throw Error(ErrorCategory::Data, "forward: graph has no nodes");
    }
    if (static_cast<int>(g.nodes.front().query.size()) != cfg_.d_obj ||
        g.text.dim != cfg_.d_t) {
      throw Error(ErrorCategory::Config,
                  "forward: graph dims (d_obj=" + std::to_string(g.nodes.front().query.size()) +
                      ", d_t=" + std::to_string(g.text.dim) + ") do not match model (d_obj=" +
                      std::to_string(cfg_.d_obj) + ", d_t=" + std::to_string(cfg_.d_t) + ")");
    }
  }

  std::vector<T> to_t(const std::vector<double>& v) const {
    std::vector<T> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i]);
    return out;
  }

  std::vector<T> flatten_queries(const ProposalGraph& g) const {
    std::vector<T> out;
    out.reserve(g.nodes.size() * static_cast<std::size_t>(cfg_.d_obj));
    for (const auto& n : g.nodes)
      for (double v : n.query) out.push_back(static_cast<T>(v));
    return out;
  }

  std::vector<T> flatten_class_embs(const ProposalGraph& g) const {
    std::vector<T> out;
    out.reserve(g.nodes.size() * static_cast<std::size_t>(cfg_.d_obj));
    for (const auto& n : g.nodes)
      for (double v : n.class_emb) out.push_back(static_cast<T>(v));
    return out;
  }

  std::vector<T> flatten_boxes(const ProposalGraph& g) const {
    std::vector<T> out;
    out.reserve(g.nodes.size() * 4);
    for (const auto& n : g.nodes) {
      out.push_back(static_cast<T>(n.box.cx));
      out.push_back(static_cast<T>(n.box.cy));
      out.push_back(static_cast<T>(n.box.w));
      out.push_back(static_cast<T>(n.box.h));
    }
    return out;
  }

  ModelConfig cfg_;
  ParamStore<T> params_;
  MultiBranchParams<T> mb_;
  ReasonerParams<T> reasoner_;
  LocalizerParams<T> localizer_;
};

}  // namespace grounder
