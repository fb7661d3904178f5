// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "grounder/adamw.hpp"
#include "grounder/losses.hpp"
#include "grounder/model.hpp"
#include "grounder/synth.hpp"

namespace grounder {

/// Everything a run needs, resolvable from a flat key = value config file
/// plus command-line overrides. See docs in the README for the key list.
struct RunConfig {
  SceneConfig scene;
  int train_scenes = 2000;
  int val_scenes = 500;
  int test_scenes = 500;

  ModelConfig model;
  AdamWConfig opt;
  int batch_size = 8;
  int epochs = 150;
  int patience = 5;
  LossWeights loss;

  int top_n = 32;
  std::uint64_t seed = 0;
  std::string precision = "single";  // single | double
  std::string out_dir;

  /// Desk-scale defaults (d_obj=64, d_t=32, 2000 train scenes).
  static RunConfig defaults();
  /// Small configuration for gradient checking (d_obj=16, d_t=8, N<=8).
  static RunConfig tiny();

  void validate();
  /// Canonical key = value dump; stable ordering, round-trips through parse.
  std::string serialize() const;
};

/// Parses a flat key = value file ('#' starts a comment). Unknown keys are
/// rejected so typos fail loudly.
std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& path);

/// Applies a key/value map onto a config; throws on unknown keys or
/// malformed values.
void apply_kv(RunConfig& cfg, const std::map<std::string, std::string>& kv);

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base);

}  // namespace grounder
