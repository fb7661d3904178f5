// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#include "grounder/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "grounder/error.hpp"

namespace grounder {

const std::vector<std::string> kDefaultClassNames = {
    "airplane", "ship", "storage-tank", "vehicle", "bridge", "windmill",
    "harbor", "stadium", "chimney", "overpass"};

const std::vector<std::string> kRelationNames = {
    "leftmost", "rightmost", "topmost", "bottommost", "largest", "smallest"};

const std::vector<std::string> kDefaultAttributeNames = {"red", "green", "blue", "white", "gray"};

void SceneConfig::validate() {
  if (num_classes < 2) {
    throw Error(ErrorCategory::Config, "scene config: num_classes must be >= 2");
  }
  if (objects_min < 2 || objects_max < objects_min) {
    throw Error(ErrorCategory::Config,
                "scene config: objects_per_scene range must satisfy 2 <= min <= max");
  }
  if (d_obj < 8 || d_t < 4) {
    throw Error(ErrorCategory::Config, "scene config: d_obj must be >= 8 and d_t >= 4");
  }
  if (noise_sigma < 0.0) {
    throw Error(ErrorCategory::Config, "scene config: noise_sigma must be >= 0");
  }
  if (class_names.empty()) {
    for (int i = 0; i < num_classes; ++i) {
      class_names.push_back(i < static_cast<int>(kDefaultClassNames.size())
                                ? kDefaultClassNames[i]
                                : "class-" + std::to_string(i));
    }
  }
  if (static_cast<int>(class_names.size()) != num_classes) {
    throw Error(ErrorCategory::Config, "scene config: class_names length != num_classes");
  }
  if (relation_names.empty()) relation_names = kRelationNames;
  if (relation_names != kRelationNames) {
    throw Error(ErrorCategory::Config, "scene config: relation vocabulary is fixed");
  }
  if (attribute_names.empty()) attribute_names = kDefaultAttributeNames;
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> symbols, int dim, std::uint64_t seed)
    : symbols_(std::move(symbols)), dim_(dim) {
  Rng rng(seed);
  vectors_.resize(symbols_.size());
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    for (std::size_t j = i + 1; j < symbols_.size(); ++j) {
      if (symbols_[i] == symbols_[j]) {
        throw Error(ErrorCategory::Config, "embedding table: duplicate symbol " + symbols_[i]);
      }
    }
    vectors_[i].resize(dim_);
    for (auto& v : vectors_[i]) v = rng.normal();
  }
}

std::span<const double> EmbeddingTable::vec(const std::string& symbol) const {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i] == symbol) return {vectors_[i].data(), vectors_[i].size()};
  }
  throw Error(ErrorCategory::Data, "embedding table: unknown symbol " + symbol);
}

namespace {

std::vector<std::string> full_vocab(const SceneConfig& cfg) {
  std::vector<std::string> v = cfg.class_names;
  v.insert(v.end(), cfg.relation_names.begin(), cfg.relation_names.end());
  v.insert(v.end(), cfg.attribute_names.begin(), cfg.attribute_names.end());
  return v;
}

double relation_key(const BoxCxCyWH& b, int relation) {
  switch (relation) {
    case 0: return b.cx;            // leftmost (min)
    case 1: return -b.cx;           // rightmost
    case 2: return b.cy;            // topmost (min)
    case 3: return -b.cy;           // bottommost
    case 4: return -box_area(b);    // largest
    default: return box_area(b);    // smallest
  }
}

// Index of the unique candidate minimizing the relation key. margin_out gets
// the gap to the runner-up.
int argext(const std::vector<BoxCxCyWH>& boxes, int relation, double* margin_out = nullptr) {
  int best = 0;
  for (std::size_t i = 1; i < boxes.size(); ++i) {
    if (relation_key(boxes[i], relation) < relation_key(boxes[best], relation)) {
      best = static_cast<int>(i);
    }
  }
  if (margin_out) {
    double runner = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (static_cast<int>(i) == best) continue;
      runner = std::min(runner, relation_key(boxes[i], relation));
    }
    *margin_out = runner - relation_key(boxes[best], relation);
  }
  return best;
}

BoxCxCyWH sample_box(Rng& rng) {
  const double w = rng.uniform(0.08, 0.30);
  const double h = rng.uniform(0.08, 0.30);
  const double cx = rng.uniform(w / 2 + 0.02, 1.0 - w / 2 - 0.02);
  const double cy = rng.uniform(h / 2 + 0.02, 1.0 - h / 2 - 0.02);
  return {cx, cy, w, h};
}

// Margin making the relation unambiguous enough to learn: an absolute gap for
// positional keys, a relative one for areas.
bool margin_ok(const std::vector<BoxCxCyWH>& boxes, int relation) {
  double margin = 0.0;
  const int best = argext(boxes, relation, &margin);
  if (margin <= 0.0) return false;  // tie
  if (relation <= 3) return margin >= 0.06;
  const double a = box_area(boxes[best]);
  double runner_area = relation == 4 ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (static_cast<int>(i) == best) continue;
    const double ai = box_area(boxes[i]);
    runner_area = relation == 4 ? std::max(runner_area, ai) : std::min(runner_area, ai);
  }
  return relation == 4 ? a >= 1.25 * runner_area : runner_area >= 1.25 * a;
}

}  // namespace

SynthGenerator::SynthGenerator(SceneConfig cfg)
    : cfg_((cfg.validate(), cfg)),
      token_table_(full_vocab(cfg_), cfg_.d_t, substream(cfg_.seed, "token-table")) {
  Rng pattern_rng(substream(cfg_.seed, "class-patterns"));
  class_patterns_.resize(cfg_.num_classes);
  for (auto& p : class_patterns_) {
    p.resize(cfg_.d_obj);
    for (auto& v : p) v = pattern_rng.normal();
  }
  Rng proj_rng(substream(cfg_.seed, "box-projection"));
  box_projection_.resize(static_cast<std::size_t>(cfg_.d_obj) * 4);
  for (auto& v : box_projection_) v = proj_rng.normal(0.0, 0.5);
}

ProposalGraph SynthGenerator::scene(std::uint64_t index) const {
  Rng rng(substream(cfg_.seed, "scene", cfg_.first_scene_index + index));

  const int k = static_cast<int>(rng.uniform_int(cfg_.objects_min, cfg_.objects_max));
  const int referred_class = static_cast<int>(rng.uniform_int(0, cfg_.num_classes - 1));
  const int relation = static_cast<int>(rng.uniform_int(0, 5));
  const int n_candidates = static_cast<int>(rng.uniform_int(2, std::min<std::int64_t>(4, k)));

  struct Obj {
    int class_id;
    BoxCxCyWH box;
    int attr_id;
  };
  std::vector<Obj> objects(k);
  for (int i = 0; i < n_candidates; ++i) objects[i].class_id = referred_class;
  for (int i = n_candidates; i < k; ++i) {
    // distractors never share the referred class, keeping the candidate set exact
    int c = static_cast<int>(rng.uniform_int(0, cfg_.num_classes - 2));
    if (c >= referred_class) ++c;
    objects[i].class_id = c;
  }
  for (int i = n_candidates; i < k; ++i) objects[i].box = sample_box(rng);

  std::vector<BoxCxCyWH> candidate_boxes(n_candidates);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (auto& b : candidate_boxes) b = sample_box(rng);
    if (margin_ok(candidate_boxes, relation)) break;
    double margin = 0.0;
    argext(candidate_boxes, relation, &margin);
    if (attempt == 999 && margin > 0.0) break;  // accept strict uniqueness as a last resort
  }
  for (int i = 0; i < n_candidates; ++i) objects[i].box = candidate_boxes[i];
  const BoxCxCyWH referred_box = candidate_boxes[argext(candidate_boxes, relation)];

  const int n_attrs = static_cast<int>(cfg_.attribute_names.size());
  for (auto& o : objects) o.attr_id = static_cast<int>(rng.uniform_int(0, n_attrs - 1));

  rng.shuffle(objects);

  ProposalGraph g;
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene-%08llu",
                static_cast<unsigned long long>(cfg_.first_scene_index + index));
  g.image_id = buf;
  g.gt_box = referred_box;

  int referent_attr = 0;
  g.nodes.resize(k);
  for (int i = 0; i < k; ++i) {
    const Obj& o = objects[i];
    auto& node = g.nodes[i];
    node.box = o.box;
    node.class_emb = class_patterns_[o.class_id];
    node.det_score = rng.uniform(0.5, 1.0);
    node.query.resize(cfg_.d_obj);
    const std::array<double, 4> bc = box_to_array(o.box);
    for (int j = 0; j < cfg_.d_obj; ++j) {
      double v = class_patterns_[o.class_id][j];
      for (int c = 0; c < 4; ++c) v += box_projection_[j * 4 + c] * bc[c];
      node.query[j] = v + cfg_.noise_sigma * rng.normal();
    }
    if (o.box.cx == referred_box.cx && o.box.cy == referred_box.cy &&
        o.box.w == referred_box.w && o.box.h == referred_box.h) {
      referent_attr = o.attr_id;
    }
  }

  const bool with_attribute = rng.uniform() < 0.5;
  std::vector<std::string> terms;
  if (with_attribute) terms.push_back(cfg_.attribute_names[referent_attr]);
  terms.push_back(cfg_.class_names[referred_class]);
  terms.push_back(cfg_.relation_names[relation]);

  g.text.n_tokens = static_cast<int>(terms.size());
  g.text.dim = cfg_.d_t;
  g.text.data.reserve(terms.size() * static_cast<std::size_t>(cfg_.d_t));
  for (const auto& term : terms) {
    auto v = token_table_.vec(term);
    g.text.data.insert(g.text.data.end(), v.begin(), v.end());
  }

  g.expr.class_term = cfg_.class_names[referred_class];
  g.expr.relation_term = cfg_.relation_names[relation];
  g.expr.attribute_term = with_attribute ? cfg_.attribute_names[referent_attr] : "";
  return g;
}

std::vector<ProposalGraph> SynthGenerator::generate(int count) const {
  if (count < 0) {
    throw Error(ErrorCategory::Config, "generate: count must be >= 0");
  }
  std::vector<ProposalGraph> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(scene(static_cast<std::uint64_t>(i)));
  return out;
}

std::vector<ProposalGraph> generate(SceneConfig cfg, int count) {
  return SynthGenerator(std::move(cfg)).generate(count);
}

int oracle_referred_index(const ProposalGraph& g) {
  int found = -1;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& b = g.nodes[i].box;
    if (b.cx == g.gt_box.cx && b.cy == g.gt_box.cy && b.w == g.gt_box.w && b.h == g.gt_box.h) {
      if (found >= 0) {
        throw Error(ErrorCategory::Data,
                    "oracle_referred_index: multiple exact matches in " + g.image_id);
      }
      found = static_cast<int>(i);
    }
  }
  if (found < 0) {
    throw Error(ErrorCategory::Data,
                "oracle_referred_index: no node matches gt_box in " + g.image_id);
  }
  return found;
}

}  // namespace grounder
