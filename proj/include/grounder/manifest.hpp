// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "grounder/config.hpp"
#include "grounder/metrics.hpp"

namespace grounder {

/// Provenance record written at the end of a run. Serialized as key = value
/// text; the created_utc line is the only field expected to differ between
/// identical runs.
struct RunManifest {
  std::string command;  // generate | train | eval
  RunConfig config;
  std::vector<std::string> deviations;  // documented departures from the reference setup
  std::vector<std::pair<std::string, std::string>> extras;  // counts, paths, metrics
};

std::string serialize_manifest(const RunManifest& m);

/// Atomic write: temp file in the target directory, then rename.
void write_manifest(const RunManifest& m, const std::filesystem::path& path);

/// Compares two manifest files ignoring created_utc lines.
bool manifests_equal_modulo_timestamp(const std::filesystem::path& a,
                                      const std::filesystem::path& b);

void append_metrics(RunManifest& m, const std::string& prefix, const MetricsReport& r);

}  // namespace grounder
