// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

namespace grounder {

/// Center-format box in the normalized image frame: (cx, cy, w, h), all
/// fractions of the image extent. Degenerate boxes (w == 0 or h == 0) are
/// legal and have zero area.
struct BoxCxCyWH {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
};

struct Corners {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
};

Corners to_corners(const BoxCxCyWH& b);
BoxCxCyWH from_corners(const Corners& c);

bool box_valid(const BoxCxCyWH& b);  // finite, w >= 0, h >= 0
double box_area(const BoxCxCyWH& b);
double intersection_area(const BoxCxCyWH& a, const BoxCxCyWH& b);
double union_area(const BoxCxCyWH& a, const BoxCxCyWH& b);

// |a ∩ b| / |a ∪ b|; 0 when the union has zero area.
double iou(const BoxCxCyWH& a, const BoxCxCyWH& b);

// iou minus the normalized hull-minus-union penalty, in (-1, 1].
double giou(const BoxCxCyWH& a, const BoxCxCyWH& b);

inline std::array<double, 4> box_to_array(const BoxCxCyWH& b) {
  return {b.cx, b.cy, b.w, b.h};
}

}  // namespace grounder
