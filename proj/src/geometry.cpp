// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#include "grounder/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace grounder {

Corners to_corners(const BoxCxCyWH& b) {
  return {b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0};
}

BoxCxCyWH from_corners(const Corners& c) {
  return {(c.x1 + c.x2) / 2.0, (c.y1 + c.y2) / 2.0, c.x2 - c.x1, c.y2 - c.y1};
}

bool box_valid(const BoxCxCyWH& b) {
  return std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) &&
         std::isfinite(b.h) && b.w >= 0.0 && b.h >= 0.0;
}

double box_area(const BoxCxCyWH& b) { return b.w * b.h; }

double intersection_area(const BoxCxCyWH& a, const BoxCxCyWH& b) {
  const Corners ca = to_corners(a);
  const Corners cb = to_corners(b);
  const double iw = std::max(0.0, std::min(ca.x2, cb.x2) - std::max(ca.x1, cb.x1));
  const double ih = std::max(0.0, std::min(ca.y2, cb.y2) - std::max(ca.y1, cb.y1));
  return iw * ih;
}

double union_area(const BoxCxCyWH& a, const BoxCxCyWH& b) {
  return box_area(a) + box_area(b) - intersection_area(a, b);
}

double iou(const BoxCxCyWH& a, const BoxCxCyWH& b) {
  const double uni = union_area(a, b);
  if (uni <= 0.0) return 0.0;  // two degenerate boxes
  return intersection_area(a, b) / uni;
}

double giou(const BoxCxCyWH& a, const BoxCxCyWH& b) {
  const Corners ca = to_corners(a);
  const Corners cb = to_corners(b);
  const double hull_w = std::max(ca.x2, cb.x2) - std::min(ca.x1, cb.x1);
  const double hull_h = std::max(ca.y2, cb.y2) - std::min(ca.y1, cb.y1);
  const double hull = hull_w * hull_h;
  if (hull <= 0.0) return iou(a, b);  // both boxes degenerate to a point
  const double uni = union_area(a, b);
  return iou(a, b) - (hull - uni) / hull;
}

}  // namespace grounder
