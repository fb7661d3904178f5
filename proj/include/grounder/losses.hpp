// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "grounder/geometry.hpp"
#include "grounder/tape.hpp"

namespace grounder {

struct LossWeights {
  double lambda_cls = 100.0;
  double lambda_giou = 5.0;
  // lambda for the L1 term is fixed at 1

  void validate() const {
    if (lambda_cls < 0.0 || lambda_giou < 0.0) {
      throw Error(ErrorCategory::Config, "loss weights must be >= 0");
    }
  }
};

/// Classification target: index of the proposal box with the highest IoU
/// against gt (ties -> lowest index). When every IoU is zero, falls back to
/// the nearest center (L1 distance, ties -> lowest index) so the loss stays
/// informative on graphs where filtering dropped all overlapping proposals.
inline int cls_target(const std::vector<BoxCxCyWH>& proposals, const BoxCxCyWH& gt) {
  if (proposals.empty()) {
    throw Error(ErrorCategory::Data, "cls_target: no proposals");
  }
  int best = 0;
  double best_iou = iou(proposals[0], gt);
  for (std::size_t i = 1; i < proposals.size(); ++i) {
    const double v = iou(proposals[i], gt);
    if (v > best_iou) {
      best = static_cast<int>(i);
      best_iou = v;
    }
  }
  if (best_iou > 0.0) return best;
  int nearest = 0;
  double best_dist = std::abs(proposals[0].cx - gt.cx) + std::abs(proposals[0].cy - gt.cy);
  for (std::size_t i = 1; i < proposals.size(); ++i) {
    const double d = std::abs(proposals[i].cx - gt.cx) + std::abs(proposals[i].cy - gt.cy);
    if (d < best_dist) {
      nearest = static_cast<int>(i);
      best_dist = d;
    }
  }
  return nearest;
}

/// -log(p_r), with p_r floored at 1e-12 before the log.
template <typename T>
ag::Var cls_loss(ag::Tape<T>& tape, ag::Var p, int r) {
  ag::Var pr = tape.clamp_min(tape.pick(p, r), T(1e-12));
  return tape.scale(tape.log(pr), T(-1));
}

namespace detail {

// Corner coordinates of a taped [4] cxcywh box as four scalar nodes.
template <typename T>
struct TapedCorners {
  ag::Var x1, y1, x2, y2, area;
};

template <typename T>
TapedCorners<T> taped_corners(ag::Tape<T>& tape, ag::Var box4) {
  ag::Var cx = tape.pick(box4, 0);
  ag::Var cy = tape.pick(box4, 1);
  ag::Var w = tape.pick(box4, 2);
  ag::Var h = tape.pick(box4, 3);
  ag::Var hw = tape.scale(w, T(0.5));
  ag::Var hh = tape.scale(h, T(0.5));
  TapedCorners<T> c;
  c.x1 = tape.sub(cx, hw);
  c.y1 = tape.sub(cy, hh);
  c.x2 = tape.add(cx, hw);
  c.y2 = tape.add(cy, hh);
  c.area = tape.mul(w, h);
  return c;
}

}  // namespace detail

/// Differentiable GIoU of a predicted [4] cxcywh box against a constant
/// ground-truth box, assembled from scalar tape primitives so reverse-mode
/// gradients are exact at every non-tie point.
template <typename T>
ag::Var giou_taped(ag::Tape<T>& tape, ag::Var pred4, const BoxCxCyWH& gt) {
  const auto a = detail::taped_corners(tape, pred4);
  const Corners g = to_corners(gt);
  ag::Var gx1 = tape.constant_scalar(static_cast<T>(g.x1));
  ag::Var gy1 = tape.constant_scalar(static_cast<T>(g.y1));
  ag::Var gx2 = tape.constant_scalar(static_cast<T>(g.x2));
  ag::Var gy2 = tape.constant_scalar(static_cast<T>(g.y2));
  ag::Var g_area = tape.constant_scalar(static_cast<T>(box_area(gt)));

  ag::Var iw = tape.relu(tape.sub(tape.vmin(a.x2, gx2), tape.vmax(a.x1, gx1)));
  ag::Var ih = tape.relu(tape.sub(tape.vmin(a.y2, gy2), tape.vmax(a.y1, gy1)));
  ag::Var inter = tape.mul(iw, ih);
  ag::Var uni = tape.clamp_min(tape.sub(tape.add(a.area, g_area), inter), T(1e-12));
  ag::Var hull_w = tape.sub(tape.vmax(a.x2, gx2), tape.vmin(a.x1, gx1));
  ag::Var hull_h = tape.sub(tape.vmax(a.y2, gy2), tape.vmin(a.y1, gy1));
  ag::Var hull = tape.clamp_min(tape.mul(hull_w, hull_h), T(1e-12));
  ag::Var iou_v = tape.div(inter, uni);
  return tape.sub(iou_v, tape.div(tape.sub(hull, uni), hull));
}

template <typename T>
struct BoxLossVars {
  ag::Var giou_loss;  // 1 - GIoU, in [0, 2)
  ag::Var l1_loss;    // |pred - gt|_1 summed over the 4 coordinates
};

template <typename T>
BoxLossVars<T> box_losses(ag::Tape<T>& tape, ag::Var pred4, const BoxCxCyWH& gt) {
  BoxLossVars<T> out;
  out.giou_loss = tape.sub(tape.constant_scalar(T(1)), giou_taped(tape, pred4, gt));
  ag::Var gt4 = tape.constant({4}, {static_cast<T>(gt.cx), static_cast<T>(gt.cy),
                                    static_cast<T>(gt.w), static_cast<T>(gt.h)});
  out.l1_loss = tape.sum(tape.abs(tape.sub(pred4, gt4)));
  return out;
}

/// lambda_cls * L_cls + lambda_giou * L_giou + L_L1.
template <typename T>
ag::Var total_loss(ag::Tape<T>& tape, ag::Var p, int r, ag::Var pred4, const BoxCxCyWH& gt,
                   const LossWeights& w) {
  w.validate();
  ag::Var cls = cls_loss(tape, p, r);
  const auto box = box_losses(tape, pred4, gt);
  ag::Var total = tape.scale(cls, static_cast<T>(w.lambda_cls));
  total = tape.add(total, tape.scale(box.giou_loss, static_cast<T>(w.lambda_giou)));
  return tape.add(total, box.l1_loss);
}

}  // namespace grounder
