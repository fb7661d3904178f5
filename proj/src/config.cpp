// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#include "grounder/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "grounder/error.hpp"

namespace grounder {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCategory::Config, "config: bad numeric value for " + key + ": \"" + v + "\"");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(d);
  } catch (const std::exception&) {
    throw Error(ErrorCategory::Config, "config: bad integer value for " + key + ": \"" + v + "\"");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCategory::Config, "config: bad integer value for " + key + ": \"" + v + "\"");
  }
}

bool parse_on_off(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw Error(ErrorCategory::Config, "config: expected on/off for " + key + ", got \"" + v + "\"");
}

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RunConfig RunConfig::defaults() { return RunConfig{}; }

RunConfig RunConfig::tiny() {
  RunConfig c;
  c.scene.d_obj = 16;
  c.scene.d_t = 8;
  c.scene.objects_min = 3;
  c.scene.objects_max = 8;
  c.model.d_obj = 16;
  c.model.d_t = 8;
  c.model.branch.heads = 2;
  c.model.branch.layers = 1;
  c.model.reasoner.heads = 2;
  c.model.reasoner.layers = 1;
  c.train_scenes = 8;
  c.val_scenes = 4;
  c.test_scenes = 4;
  c.precision = "double";
  return c;
}

void RunConfig::validate() {
  model.d_obj = scene.d_obj;
  model.d_t = scene.d_t;
  scene.validate();
  model.validate();
  loss.validate();
  if (batch_size < 1 || epochs < 1 || patience < 0) {
    throw Error(ErrorCategory::Config, "config: batch_size/epochs/patience out of range");
  }
  if (train_scenes < 1 || val_scenes < 1 || test_scenes < 1) {
    throw Error(ErrorCategory::Config, "config: split sizes must be >= 1");
  }
  if (top_n < 1) {
    throw Error(ErrorCategory::Config, "config: top_n must be >= 1");
  }
  if (precision != "single" && precision != "double") {
    throw Error(ErrorCategory::Config, "config: precision must be single or double");
  }
  if (opt.lr <= 0.0 || opt.eps <= 0.0) {
    throw Error(ErrorCategory::Config, "config: lr and eps must be positive");
  }
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os << "# scenes\n";
  os << "num_classes = " << scene.num_classes << "\n";
  os << "objects_min = " << scene.objects_min << "\n";
  os << "objects_max = " << scene.objects_max << "\n";
  os << "noise_sigma = " << fmt_double(scene.noise_sigma) << "\n";
  os << "d_obj = " << scene.d_obj << "\n";
  os << "d_t = " << scene.d_t << "\n";
  os << "train_scenes = " << train_scenes << "\n";
  os << "val_scenes = " << val_scenes << "\n";
  os << "test_scenes = " << test_scenes << "\n";
  os << "# model\n";
  os << "branch_heads = " << model.branch.heads << "\n";
  os << "branch_layers = " << model.branch.layers << "\n";
  os << "pre_norm = " << (model.branch.pre_norm ? "on" : "off") << "\n";
  os << "reasoner_heads = " << model.reasoner.heads << "\n";
  os << "reasoner_layers = " << model.reasoner.layers << "\n";
  os << "ffn_mult = " << model.reasoner.ffn_mult << "\n";
  os << "multi_branch = " << (model.multi_branch ? "on" : "off") << "\n";
  os << "# optimization\n";
  os << "lr = " << fmt_double(opt.lr) << "\n";
  os << "beta1 = " << fmt_double(opt.beta1) << "\n";
  os << "beta2 = " << fmt_double(opt.beta2) << "\n";
  os << "eps = " << fmt_double(opt.eps) << "\n";
  os << "weight_decay = " << fmt_double(opt.weight_decay) << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "epochs = " << epochs << "\n";
  os << "patience = " << patience << "\n";
  os << "# loss\n";
  os << "lambda_cls = " << fmt_double(loss.lambda_cls) << "\n";
  os << "lambda_giou = " << fmt_double(loss.lambda_giou) << "\n";
  os << "# run\n";
  os << "top_n = " << top_n << "\n";
  os << "seed = " << seed << "\n";
  os << "precision = " << precision << "\n";
  return os.str();
}

std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw Error(ErrorCategory::Io, "cannot open config: " + path.string());
  }
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCategory::Config, "config line " + std::to_string(line_no) +
                                             ": expected key = value, got \"" + line + "\"");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw Error(ErrorCategory::Config, "config line " + std::to_string(line_no) + ": empty key");
    }
    kv[key] = value;
  }
  return kv;
}

void apply_kv(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, v] : kv) {
    if (key == "num_classes") cfg.scene.num_classes = parse_int(key, v);
    else if (key == "objects_min") cfg.scene.objects_min = parse_int(key, v);
    else if (key == "objects_max") cfg.scene.objects_max = parse_int(key, v);
    else if (key == "noise_sigma") cfg.scene.noise_sigma = parse_double(key, v);
    else if (key == "d_obj") cfg.scene.d_obj = parse_int(key, v);
    else if (key == "d_t") cfg.scene.d_t = parse_int(key, v);
    else if (key == "train_scenes") cfg.train_scenes = parse_int(key, v);
    else if (key == "val_scenes") cfg.val_scenes = parse_int(key, v);
    else if (key == "test_scenes") cfg.test_scenes = parse_int(key, v);
    else if (key == "branch_heads") cfg.model.branch.heads = parse_int(key, v);
    else if (key == "branch_layers") cfg.model.branch.layers = parse_int(key, v);
    else if (key == "pre_norm") cfg.model.branch.pre_norm = parse_on_off(key, v);
    else if (key == "reasoner_heads") cfg.model.reasoner.heads = parse_int(key, v);
    else if (key == "reasoner_layers") cfg.model.reasoner.layers = parse_int(key, v);
    else if (key == "ffn_mult") cfg.model.reasoner.ffn_mult = parse_int(key, v);
    else if (key == "multi_branch") cfg.model.multi_branch = parse_on_off(key, v);
    else if (key == "lr") cfg.opt.lr = parse_double(key, v);
    else if (key == "beta1") cfg.opt.beta1 = parse_double(key, v);
    else if (key == "beta2") cfg.opt.beta2 = parse_double(key, v);
    else if (key == "eps") cfg.opt.eps = parse_double(key, v);
    else if (key == "weight_decay") cfg.opt.weight_decay = parse_double(key, v);
    else if (key == "batch_size") cfg.batch_size = parse_int(key, v);
    else if (key == "epochs") cfg.epochs = parse_int(key, v);
    else if (key == "patience") cfg.patience = parse_int(key, v);
    else if (key == "lambda_cls") cfg.loss.lambda_cls = parse_double(key, v);
    else if (key == "lambda_giou") cfg.loss.lambda_giou = parse_double(key, v);
    else if (key == "top_n") cfg.top_n = parse_int(key, v);
    else if (key == "seed") cfg.seed = parse_u64(key, v);
    else if (key == "precision") cfg.precision = v;
    else {
      throw Error(ErrorCategory::Config, "config: unknown key \"" + key + "\"");
    }
  }
  cfg.model.d_obj = cfg.scene.d_obj;
  cfg.model.d_t = cfg.scene.d_t;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
  RunConfig cfg = base;
  apply_kv(cfg, parse_kv_file(path));
  return cfg;
}

}  // namespace grounder
