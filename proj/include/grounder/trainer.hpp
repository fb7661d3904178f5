// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "grounder/adamw.hpp"
#include "grounder/checkpoint.hpp"
#include "grounder/metrics.hpp"
#include "grounder/model.hpp"
#include "grounder/proposal_graph.hpp"

namespace grounder {

struct TrainOptions {
  AdamWConfig opt;
  int batch_size = 8;
  int epochs = 40;
  int patience = 5;  // epochs without val meanIoU improvement before stopping
  LossWeights loss;
  int top_n = 32;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_path;  // best-val checkpoint; empty = keep in memory only
  std::ostream* log = nullptr;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;  // mean per-sample loss over the epoch
  MetricsReport val;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  MetricsReport best_val;
  double first_batch_loss = 0.0;
  double last_batch_loss = 0.0;
  std::int64_t steps = 0;
};

struct SamplePrediction {
  std::string image_id;
  std::vector<double> probs;
  int argmax = 0;
  BoxCxCyWH refined_box;
  BoxCxCyWH gt_box;
};

template <typename T>
MetricsReport evaluate_model(GroundingModel<T>& model, const std::vector<ProposalGraph>& graphs,
                             int eval_top_n,
                             std::vector<SamplePrediction>* dump = nullptr) {
  std::vector<std::pair<BoxCxCyWH, BoxCxCyWH>> pairs;
  pairs.reserve(graphs.size());
  for (const auto& g : graphs) {
    const ProposalGraph filtered = top_n(g, eval_top_n);
    GroundingOutput out = model.infer(filtered);
    pairs.emplace_back(out.refined_box, g.gt_box);
    if (dump) {
      SamplePrediction s;
      s.image_id = g.image_id;
      s.probs = out.probs;
      s.argmax = out.argmax;
      s.refined_box = out.refined_box;
      s.gt_box = g.gt_box;
      dump->push_back(std::move(s));
    }
  }
  return evaluate(pairs);
}

/// Minimizes the composite loss with AdamW. Batches average the per-sample
/// loss; the scene order reshuffles every epoch from (seed, epoch). Keeps the
/// best-val-meanIoU parameters (and checkpoint, when a path is given) and
/// restores them into the model before returning. A non-finite batch loss
/// aborts with ErrorCategory::Numeric after the last good checkpoint has
/// already been written.
template <typename T>
TrainResult train_model(GroundingModel<T>& model, const std::vector<ProposalGraph>& train_graphs,
                        const std::vector<ProposalGraph>& val_graphs, const TrainOptions& opts) {
  if (train_graphs.empty() || val_graphs.empty()) {
    throw Error(ErrorCategory::Data, "train: empty split");
  }
  std::vector<ProposalGraph> train_filtered;
  train_filtered.reserve(train_graphs.size());
  for (const auto& g : train_graphs) train_filtered.push_back(top_n(g, opts.top_n));

  AdamW<T> optimizer(opts.opt);
  TrainResult result;
  std::vector<T> best_values;  // flat snapshot of the best parameters
  bool first_batch = true;

  auto snapshot = [&model]() {
    std::vector<T> flat;
    for (const auto& p : model.params().items())
      flat.insert(flat.end(), p->value.begin(), p->value.end());
    return flat;
  };
  auto restore = [&model](const std::vector<T>& flat) {
    std::size_t at = 0;
    for (const auto& p : model.params().items()) {
      std::copy(flat.begin() + at, flat.begin() + at + p->size(), p->value.begin());
      at += p->size();
    }
  };

  int since_best = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::vector<int> order(train_filtered.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(substream(opts.seed, "epoch-shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      ag::Tape<T> tape;
      ag::Var batch_loss;
      for (std::size_t b = start; b < end; ++b) {
        ag::Var l = model.loss(tape, train_filtered[order[b]], opts.loss);
        batch_loss = b == start ? l : tape.add(batch_loss, l);
      }
      batch_loss = tape.scale(batch_loss, T(1) / static_cast<T>(end - start));
      const double loss_value = static_cast<double>(tape.scalar(batch_loss));
      if (!std::isfinite(loss_value)) {
        throw Error(ErrorCategory::Numeric,
                    "train: non-finite loss at epoch " + std::to_string(epoch) +
                        "; last good checkpoint retained");
      }
      if (first_batch) {
        result.first_batch_loss = loss_value;
        first_batch = false;
      }
      result.last_batch_loss = loss_value;
      epoch_loss += loss_value * static_cast<double>(end - start);
      tape.backward(batch_loss);
      optimizer.step(model.params());
      ++result.steps;
    }
    epoch_loss /= static_cast<double>(order.size());

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss;
    stats.val = evaluate_model(model, val_graphs, opts.top_n);
    result.epochs.push_back(stats);
    if (opts.log) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "epoch %3d  train_loss %10.4f  val_meanIoU %.4f  val_Pr@0.5 %.4f\n", epoch,
                    epoch_loss, stats.val.mean_iou, stats.val.pr(0.5));
      (*opts.log) << buf << std::flush;
    }

    if (result.best_epoch < 0 || stats.val.mean_iou > result.best_val.mean_iou) {
      result.best_epoch = epoch;
      result.best_val = stats.val;
      best_values = snapshot();
      if (!opts.checkpoint_path.empty()) save_checkpoint(model.params(), opts.checkpoint_path);
      since_best = 0;
    } else if (++since_best > opts.patience) {
      if (opts.log) (*opts.log) << "early stop: no val improvement for " << since_best
                                << " epochs\n";
      break;
    }
  }
  if (!best_values.empty()) restore(best_values);
  return result;
}

// ---- gradient checking ----

struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-4;
  // Test hook: adds a large offset to this parameter's analytic gradient so
  // the harness must report it as a failure.
  std::string corrupt_param;
};

struct GradCheckRow {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckResult {
  std::vector<GradCheckRow> rows;
  double max_rel_err = 0.0;
  bool all_pass = true;
};

/// Central-difference check of every scalar parameter against the
/// reverse-mode gradient of the mean composite loss over `graphs`.
/// rel_err = |ad - fd| / max(1e-2, |ad|, |fd|): the floor turns the bound
/// into an absolute tolerance for near-zero gradients, where finite
/// differences carry roundoff of order loss*eps/step.
inline GradCheckResult grad_check(GroundingModel<double>& model,
                                  const std::vector<ProposalGraph>& graphs, const LossWeights& w,
                                  const GradCheckOptions& opts = {}) {
  if (graphs.empty()) {
    throw Error(ErrorCategory::Data, "grad_check: no graphs");
  }
  auto batch_loss_value = [&]() {
    ag::Tape<double> tape;
    ag::Var total;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      ag::Var l = model.loss(tape, graphs[i], w);
      total = i == 0 ? l : tape.add(total, l);
    }
    total = tape.scale(total, 1.0 / static_cast<double>(graphs.size()));
    return tape.scalar(total);
  };

  model.params().zero_grads();
  {
    ag::Tape<double> tape;
    ag::Var total;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      ag::Var l = model.loss(tape, graphs[i], w);
      total = i == 0 ? l : tape.add(total, l);
    }
    total = tape.scale(total, 1.0 / static_cast<double>(graphs.size()));
    tape.backward(total);
  }

  bool corrupt_found = opts.corrupt_param.empty();
  GradCheckResult result;
  for (const auto& p : model.params().items()) {
    std::vector<double> analytic(p->grad.begin(), p->grad.end());
    if (p->name == opts.corrupt_param) {
      analytic[0] += 1.0 + std::abs(analytic[0]);
      corrupt_found = true;
    }
    GradCheckRow row;
    row.name = p->name;
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + opts.step;
      const double up = batch_loss_value();
      p->value[i] = orig - opts.step;
      const double down = batch_loss_value();
      p->value[i] = orig;
      const double fd = (up - down) / (2.0 * opts.step);
      const double denom = std::max({1e-2, std::abs(fd), std::abs(analytic[i])});
      row.max_rel_err = std::max(row.max_rel_err, std::abs(fd - analytic[i]) / denom);
    }
    row.pass = row.max_rel_err < opts.tol;
    result.max_rel_err = std::max(result.max_rel_err, row.max_rel_err);
    result.all_pass = result.all_pass && row.pass;
    result.rows.push_back(std::move(row));
  }
  model.params().zero_grads();
  if (!corrupt_found) {
    throw Error(ErrorCategory::Config, "grad_check: no parameter named " + opts.corrupt_param);
  }
  return result;
}

}  // namespace grounder
