// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "grounder/proposal_graph.hpp"
#include "grounder/rng.hpp"

namespace grounder {

/// Configuration of the synthetic proposal-graph generator. Every scene is a
/// deterministic function of (seed, first_scene_index + i); regenerating with
/// the same config is byte-identical.
struct SceneConfig {
  int num_classes = 6;
  int objects_min = 3;
  int objects_max = 8;
  std::vector<std::string> class_names;      // defaults applied by validate()
  std::vector<std::string> relation_names;   // fixed six, see kRelationNames
  std::vector<std::string> attribute_names;  // color words
  int d_obj = 64;
  int d_t = 32;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  std::uint64_t first_scene_index = 0;  // offset so splits draw disjoint scene streams

  void validate();  // fills default vocab, throws on invariant violations
};

extern const std::vector<std::string> kDefaultClassNames;
extern const std::vector<std::string> kRelationNames;  // leftmost rightmost topmost bottommost largest smallest
extern const std::vector<std::string> kDefaultAttributeNames;

/// Seeded symbol -> fixed random vector table; stands in for a language model.
class EmbeddingTable {
 public:
  EmbeddingTable(std::vector<std::string> symbols, int dim, std::uint64_t seed);

  std::span<const double> vec(const std::string& symbol) const;
  int dim() const { return dim_; }
  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
  int dim_;
  std::vector<std::vector<double>> vectors_;
};

class SynthGenerator {
 public:
  explicit SynthGenerator(SceneConfig cfg);

  ProposalGraph scene(std::uint64_t index) const;
  std::vector<ProposalGraph> generate(int count) const;

  const SceneConfig& config() const { return cfg_; }
  const EmbeddingTable& token_table() const { return token_table_; }
  /// Clean per-class pattern vectors (d_obj), also used as class_emb.
  const std::vector<std::vector<double>>& class_patterns() const { return class_patterns_; }
  /// Fixed random projection [d_obj x 4] mixing box coordinates into queries.
  const std::vector<double>& box_projection() const { return box_projection_; }

 private:
  SceneConfig cfg_;
  EmbeddingTable token_table_;
  std::vector<std::vector<double>> class_patterns_;
  std::vector<double> box_projection_;
};

std::vector<ProposalGraph> generate(SceneConfig cfg, int count);

/// Index of the node whose box equals gt_box exactly; throws when the graph
/// was not produced by this generator (no exact match) or the match is
/// ambiguous.
int oracle_referred_index(const ProposalGraph& g);

}  // namespace grounder
