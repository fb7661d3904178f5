// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "grounder/geometry.hpp"

namespace grounder {

inline constexpr double kPrThresholds[] = {0.5, 0.6, 0.7, 0.8, 0.9};

struct MetricsReport {
  std::vector<std::pair<double, double>> pr_at;  // (tau, fraction with IoU >= tau)
  double mean_iou = 0.0;
  double cmu_iou = 0.0;
  int n_samples = 0;

  double pr(double tau) const;
};

/// Pr@tau (IoU >= tau, inclusive), meanIoU = mean of per-sample I/U, and
/// cmuIoU = sum(I) / sum(U) over all samples. Throws on empty input.
MetricsReport evaluate(const std::vector<std::pair<BoxCxCyWH, BoxCxCyWH>>& pred_gt_pairs);

std::string format_report_table(const MetricsReport& r);
void write_report(const MetricsReport& r, const std::filesystem::path& path);

}  // namespace grounder
