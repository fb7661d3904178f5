// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "grounder/geometry.hpp"

namespace grounder {

/// One object proposal: visual attribute (query), spatial attribute (box),
/// categorical attribute (class embedding), plus the detector score used by
/// top-N filtering.
struct ProposalNode {
  std::vector<double> query;      // length d_obj
  BoxCxCyWH box;
  std::vector<double> class_emb;  // length d_obj
  double det_score = 0.0;
};

/// Token embeddings of the referring expression, row-major [n_tokens x dim].
struct TokenSequence {
  int n_tokens = 0;
  int dim = 0;
  std::vector<double> data;

  const double* row(int t) const { return data.data() + static_cast<std::size_t>(t) * dim; }
};

/// Structured record of the expression, kept for audit.
struct ExpressionRepr {
  std::string class_term;
  std::string relation_term;
  std::string attribute_term;  // empty when the expression has no attribute
};

/// One image's worth of stage-1 output: proposal nodes, the tokenized
/// expression, and the ground-truth box of the referred object.
struct ProposalGraph {
  std::string image_id;
  std::vector<ProposalNode> nodes;
  TokenSequence text;
  BoxCxCyWH gt_box;
  ExpressionRepr expr;
};

// Interchange format: one JSON object per line. The first line is a header
// declaring {version, d_obj, d_t}; a zero-byte file is an empty stream.
inline constexpr int kGraphFormatVersion = 1;

struct GraphFileHeader {
  int version = kGraphFormatVersion;
  int d_obj = 0;
  int d_t = 0;
};

void write_graphs(const std::vector<ProposalGraph>& graphs, const std::filesystem::path& path,
                  int d_obj, int d_t);

/// Streams records to `sink`; returns the header. Throws with the offending
/// line number and field name on malformed input.
GraphFileHeader read_graphs(const std::filesystem::path& path,
                            const std::function<void(ProposalGraph&&)>& sink);

std::vector<ProposalGraph> read_graphs(const std::filesystem::path& path,
                                       GraphFileHeader* header = nullptr);

/// Validates node/token dimensions and value invariants against the header.
void validate_graph(const ProposalGraph& g, int d_obj, int d_t);

/// Keeps the min(n, |nodes|) nodes with the largest det_score. Ties break by
/// original index ascending; kept nodes preserve their original relative
/// order. Idempotent.
ProposalGraph top_n(const ProposalGraph& g, int n);

}  // namespace grounder
