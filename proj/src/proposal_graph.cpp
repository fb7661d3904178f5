// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#include "grounder/proposal_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "grounder/error.hpp"

namespace grounder {

namespace {

using nlohmann::json;

json box_to_json(const BoxCxCyWH& b) { return json::array({b.cx, b.cy, b.w, b.h}); }

const json& require_field(const json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end()) {
    throw Error(ErrorCategory::Data,
                "line " + std::to_string(line) + ": missing field \"" + key + "\"");
  }
  return *it;
}

std::vector<double> require_array(const json& rec, const char* key, std::size_t expected,
                                  std::size_t line) {
  const json& f = require_field(rec, key, line);
  if (!f.is_array()) {
    throw Error(ErrorCategory::Data,
                "line " + std::to_string(line) + ": field \"" + key + "\" is not an array");
  }
  std::vector<double> out;
  out.reserve(f.size());
  for (const auto& v : f) out.push_back(v.get<double>());
  if (expected != 0 && out.size() != expected) {
    throw Error(ErrorCategory::Data, "line " + std::to_string(line) + ": field \"" + key +
                                         "\" has length " + std::to_string(out.size()) +
                                         ", expected " + std::to_string(expected));
  }
  return out;
}

BoxCxCyWH box_from(const std::vector<double>& v) { return {v[0], v[1], v[2], v[3]}; }

}  // namespace

void write_graphs(const std::vector<ProposalGraph>& graphs, const std::filesystem::path& path,
                  int d_obj, int d_t) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw Error(ErrorCategory::Io, "cannot open for writing: " + path.string());
  }
  json header = {{"format", "proposal-graphs"},
                 {"version", kGraphFormatVersion},
                 {"d_obj", d_obj},
                 {"d_t", d_t}};
  os << header.dump() << "\n";
  for (const auto& g : graphs) {
    validate_graph(g, d_obj, d_t);
    const int n = static_cast<int>(g.nodes.size());
    json rec;
    rec["image_id"] = g.image_id;
    rec["n_nodes"] = n;
    rec["n_tokens"] = g.text.n_tokens;
    json queries = json::array(), class_embs = json::array(), boxes = json::array(),
         scores = json::array();
    for (const auto& node : g.nodes) {
      for (double v : node.query) queries.push_back(v);
      for (double v : node.class_emb) class_embs.push_back(v);
      boxes.push_back(node.box.cx);
      boxes.push_back(node.box.cy);
      boxes.push_back(node.box.w);
      boxes.push_back(node.box.h);
      scores.push_back(node.det_score);
    }
    rec["queries"] = std::move(queries);
    rec["class_embs"] = std::move(class_embs);
    rec["boxes"] = std::move(boxes);
    rec["det_scores"] = std::move(scores);
    rec["tokens"] = g.text.data;
    rec["gt_box"] = box_to_json(g.gt_box);
    rec["expr_class"] = g.expr.class_term;
    rec["expr_relation"] = g.expr.relation_term;
    rec["expr_attribute"] = g.expr.attribute_term;
    os << rec.dump() << "\n";
  }
  if (!os) {
    throw Error(ErrorCategory::Io, "failed while writing: " + path.string());
  }
}

GraphFileHeader read_graphs(const std::filesystem::path& path,
                            const std::function<void(ProposalGraph&&)>& sink) {
  std::ifstream is(path);
  if (!is) {
    throw Error(ErrorCategory::Io, "cannot open: " + path.string());
  }
  GraphFileHeader header;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCategory::Data,
                  "line " + std::to_string(line_no) + ": invalid record: " + e.what());
    }
    if (!have_header) {
      header.version = require_field(rec, "version", line_no).get<int>();
      if (header.version != kGraphFormatVersion) {
        throw Error(ErrorCategory::Data, "line 1: unsupported format version " +
                                             std::to_string(header.version));
      }
      header.d_obj = require_field(rec, "d_obj", line_no).get<int>();
      header.d_t = require_field(rec, "d_t", line_no).get<int>();
      if (header.d_obj < 1 || header.d_t < 1) {
        throw Error(ErrorCategory::Data, "line 1: non-positive d_obj or d_t");
      }
      have_header = true;
      continue;
    }
    const std::size_t d_obj = static_cast<std::size_t>(header.d_obj);
    ProposalGraph g;
    g.image_id = require_field(rec, "image_id", line_no).get<std::string>();
    const int n = require_field(rec, "n_nodes", line_no).get<int>();
    if (n < 1) {
      throw Error(ErrorCategory::Data,
                  "line " + std::to_string(line_no) + ": field \"n_nodes\" must be >= 1");
    }
    const int n_tokens = require_field(rec, "n_tokens", line_no).get<int>();
    if (n_tokens < 1) {
      throw Error(ErrorCategory::Data,
                  "line " + std::to_string(line_no) + ": field \"n_tokens\" must be >= 1");
    }
    const auto queries = require_array(rec, "queries", d_obj * n, line_no);
    const auto class_embs = require_array(rec, "class_embs", d_obj * n, line_no);
    const auto boxes = require_array(rec, "boxes", 4u * n, line_no);
    const auto scores = require_array(rec, "det_scores", static_cast<std::size_t>(n), line_no);
    g.nodes.resize(n);
    for (int i = 0; i < n; ++i) {
      auto& node = g.nodes[i];
      node.query.assign(queries.begin() + i * d_obj, queries.begin() + (i + 1) * d_obj);
      node.class_emb.assign(class_embs.begin() + i * d_obj, class_embs.begin() + (i + 1) * d_obj);
      node.box = {boxes[4 * i], boxes[4 * i + 1], boxes[4 * i + 2], boxes[4 * i + 3]};
      node.det_score = scores[i];
    }
    g.text.n_tokens = n_tokens;
    g.text.dim = header.d_t;
    g.text.data =
        require_array(rec, "tokens", static_cast<std::size_t>(n_tokens) * header.d_t, line_no);
    g.gt_box = box_from(require_array(rec, "gt_box", 4, line_no));
    g.expr.class_term = require_field(rec, "expr_class", line_no).get<std::string>();
    g.expr.relation_term = require_field(rec, "expr_relation", line_no).get<std::string>();
    g.expr.attribute_term = require_field(rec, "expr_attribute", line_no).get<std::string>();
    try {
      validate_graph(g, header.d_obj, header.d_t);
    } catch (const Error& e) {
      throw Error(ErrorCategory::Data,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    sink(std::move(g));
  }
  return header;
}

std::vector<ProposalGraph> read_graphs(const std::filesystem::path& path,
                                       GraphFileHeader* header) {
  std::vector<ProposalGraph> out;
  GraphFileHeader h = read_graphs(path, [&out](ProposalGraph&& g) { out.push_back(std::move(g)); });
  if (header) *header = h;
  return out;
}

void validate_graph(const ProposalGraph& g, int d_obj, int d_t) {
  if (g.nodes.empty()) {
    throw Error(ErrorCategory::Data, "graph \"" + g.image_id + "\": no proposal nodes");
  }
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& node = g.nodes[i];
    if (static_cast<int>(node.query.size()) != d_obj ||
        static_cast<int>(node.class_emb.size()) != d_obj) {
      throw Error(ErrorCategory::Data, "graph \"" + g.image_id + "\": node " + std::to_string(i) +
                                           " dimension mismatch vs d_obj=" + std::to_string(d_obj));
    }
    if (!box_valid(node.box)) {
      throw Error(ErrorCategory::Data,
                  "graph \"" + g.image_id + "\": node " + std::to_string(i) + " has invalid box");
    }
  }
  if (g.text.dim != d_t || g.text.n_tokens < 1 ||
      g.text.data.size() != static_cast<std::size_t>(g.text.n_tokens) * d_t) {
    throw Error(ErrorCategory::Data, "graph \"" + g.image_id + "\": token matrix mismatch vs d_t=" +
                                         std::to_string(d_t));
  }
  for (double v : g.text.data) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCategory::Data, "graph \"" + g.image_id + "\": non-finite token entry");
    }
  }
  if (!box_valid(g.gt_box)) {
    throw Error(ErrorCategory::Data, "graph \"" + g.image_id + "\": invalid gt_box");
  }
}

ProposalGraph top_n(const ProposalGraph& g, int n) {
  if (n < 1) {
    throw Error(ErrorCategory::Config, "top_n: n must be >= 1");
  }
  const int total = static_cast<int>(g.nodes.size());
  if (n >= total) return g;
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&g](int a, int b) {
    return g.nodes[a].det_score > g.nodes[b].det_score;  // ties keep lower index first
  });
  order.resize(n);
  std::sort(order.begin(), order.end());  // original relative order among kept nodes
  ProposalGraph out;
  out.image_id = g.image_id;
  out.text = g.text;
  out.gt_box = g.gt_box;
  out.expr = g.expr;
  out.nodes.reserve(order.size());
  for (int idx : order) out.nodes.push_back(g.nodes[idx]);
  return out;
}

}  // namespace grounder
