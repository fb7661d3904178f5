// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#include "grounder/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "grounder/error.hpp"

namespace grounder {

double MetricsReport::pr(double tau) const {
  for (const auto& [t, v] : pr_at) {
    if (t == tau) return v;
  }
  throw Error(ErrorCategory::Internal, "no Pr@ entry for requested threshold");
}

MetricsReport evaluate(const std::vector<std::pair<BoxCxCyWH, BoxCxCyWH>>& pred_gt_pairs) {
  if (pred_gt_pairs.empty()) {
    throw Error(ErrorCategory::Data, "evaluate: no samples");
  }
  MetricsReport r;
  r.n_samples = static_cast<int>(pred_gt_pairs.size());
  double iou_sum = 0.0, inter_sum = 0.0, union_sum = 0.0;
  std::vector<int> hits(std::size(kPrThresholds), 0);
  for (const auto& [pred, gt] : pred_gt_pairs) {
    const double v = iou(pred, gt);
    iou_sum += v;
    inter_sum += intersection_area(pred, gt);
    union_sum += union_area(pred, gt);
    for (std::size_t t = 0; t < std::size(kPrThresholds); ++t) {
      if (v >= kPrThresholds[t]) ++hits[t];
    }
  }
  for (std::size_t t = 0; t < std::size(kPrThresholds); ++t) {
    r.pr_at.emplace_back(kPrThresholds[t], static_cast<double>(hits[t]) / r.n_samples);
  }
  r.mean_iou = iou_sum / r.n_samples;
  r.cmu_iou = union_sum > 0.0 ? inter_sum / union_sum : 0.0;
  return r;
}

std::string format_report_table(const MetricsReport& r) {
  char buf[128];
  std::string out;
  out += "  metric      value\n";
  out += "  ----------  --------\n";
  for (const auto& [tau, v] : r.pr_at) {
    std::snprintf(buf, sizeof buf, "  Pr@%.1f      %.6f\n", tau, v);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "  meanIoU     %.6f\n", r.mean_iou);
  out += buf;
  std::snprintf(buf, sizeof buf, "  cmuIoU      %.6f\n", r.cmu_iou);
  out += buf;
  std::snprintf(buf, sizeof buf, "  samples     %d\n", r.n_samples);
  out += buf;
  return out;
}

void write_report(const MetricsReport& r, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw Error(ErrorCategory::Io, "cannot open report for writing: " + path.string());
  }
  char buf[64];
  for (const auto& [tau, v] : r.pr_at) {
    std::snprintf(buf, sizeof buf, "pr@%.1f = %.17g\n", tau, v);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "mean_iou = %.17g\n", r.mean_iou);
  os << buf;
  std::snprintf(buf, sizeof buf, "cmu_iou = %.17g\n", r.cmu_iou);
  os << buf;
  os << "n_samples = " << r.n_samples << "\n";
  if (!os) {
    throw Error(ErrorCategory::Io, "failed while writing report: " + path.string());
  }
}

}  // namespace grounder
