// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0
//
// grounder CLI: generate | train | eval | gradcheck over proposal-graph
// datasets. See README.md for the config file keys and file formats.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "grounder/checkpoint.hpp"
#include "grounder/config.hpp"
#include "grounder/error.hpp"
#include "grounder/manifest.hpp"
#include "grounder/metrics.hpp"
#include "grounder/model.hpp"
#include "grounder/proposal_graph.hpp"
#include "grounder/synth.hpp"
#include "grounder/trainer.hpp"
#include "grounder/version.hpp"

namespace fs = std::filesystem;
using namespace grounder;

namespace {

// Scene-index offsets keeping the split streams disjoint.
constexpr std::uint64_t kValOffset = 1ull << 20;
constexpr std::uint64_t kTestOffset = 1ull << 21;

const char* kLocalizerInitDeviation =
    "localizer head initialized from the seeded scheme; no pretrained detector "
    "regression head exists in this pipeline";

struct CliOverrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> top_n;
  std::optional<std::string> multi_branch;
  std::optional<int> epochs;
};

RunConfig resolve_config(const RunConfig& base, const CliOverrides& ov) {
  RunConfig cfg = base;
  if (!ov.config_path.empty()) cfg = load_run_config(ov.config_path, cfg);
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.top_n) cfg.top_n = *ov.top_n;
  if (ov.epochs) cfg.epochs = *ov.epochs;
  if (ov.multi_branch) {
    if (*ov.multi_branch != "on" && *ov.multi_branch != "off") {
      throw Error(ErrorCategory::Config, "--multi-branch expects on or off");
    }
    cfg.model.multi_branch = *ov.multi_branch == "on";
  }
  cfg.validate();
  return cfg;
}

SceneConfig split_scene_config(const RunConfig& cfg, std::uint64_t offset) {
  SceneConfig sc = cfg.scene;
  sc.seed = cfg.seed;
  sc.first_scene_index = offset;
  return sc;
}

void require_dims(const GraphFileHeader& h, const RunConfig& cfg, const std::string& what) {
  if (h.d_obj != cfg.scene.d_obj || h.d_t != cfg.scene.d_t) {
    throw Error(ErrorCategory::Config,
                what + ": dataset dims (d_obj=" + std::to_string(h.d_obj) +
                    ", d_t=" + std::to_string(h.d_t) + ") do not match config (d_obj=" +
                    std::to_string(cfg.scene.d_obj) + ", d_t=" + std::to_string(cfg.scene.d_t) +
                    ")");
  }
}

int cmd_generate(const CliOverrides& ov, const std::string& out, bool force) {
  RunConfig cfg = resolve_config(RunConfig::defaults(), ov);
  const fs::path dir(out);
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw Error(ErrorCategory::Io,
                "output directory " + dir.string() + " is not empty (use --force to overwrite)");
  }
  fs::create_directories(dir);

  const struct {
    const char* name;
    std::uint64_t offset;
    int count;
  } splits[] = {{"train", 0, cfg.train_scenes},
                {"val", kValOffset, cfg.val_scenes},
                {"test", kTestOffset, cfg.test_scenes}};
  RunManifest manifest;
  manifest.command = "generate";
  manifest.config = cfg;
  for (const auto& split : splits) {
    SynthGenerator gen(split_scene_config(cfg, split.offset));
    const auto graphs = gen.generate(split.count);
    const fs::path path = dir / (std::string(split.name) + ".graphs");
    write_graphs(graphs, path, cfg.scene.d_obj, cfg.scene.d_t);
    manifest.extras.emplace_back(std::string(split.name) + "_count", std::to_string(split.count));
    std::cout << "wrote " << path.string() << " (" << split.count << " scenes)\n";
  }
  write_manifest(manifest, dir / "manifest.txt");
  return 0;
}

template <typename T>
int run_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
  GraphFileHeader h_train, h_val;
  const auto train = read_graphs(data_dir / "train.graphs", &h_train);
  const auto val = read_graphs(data_dir / "val.graphs", &h_val);
  require_dims(h_train, cfg, "train split");
  require_dims(h_val, cfg, "val split");

  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "train.log", std::ios::trunc);

  GroundingModel<T> model(cfg.model, cfg.seed);
  std::cout << "model parameters: " << model.params().scalar_count() << " scalars in "
            << model.params().count() << " tensors (multi_branch="
            << (cfg.model.multi_branch ? "on" : "off") << ")\n";
  log << "# parameters: " << model.params().scalar_count() << "\n";

  TrainOptions opts;
  opts.opt = cfg.opt;
  opts.batch_size = cfg.batch_size;
  opts.epochs = cfg.epochs;
  opts.patience = cfg.patience;
  opts.loss = cfg.loss;
  opts.top_n = cfg.top_n;
  opts.seed = cfg.seed;
  opts.checkpoint_path = out_dir / "best.ckpt";
  opts.log = &log;

  const auto result = train_model(model, train, val, opts);

  {
    std::ofstream cfg_out(out_dir / "run_config.cfg", std::ios::trunc);
    cfg_out << cfg.serialize();
  }
  RunManifest manifest;
  manifest.command = "train";
  manifest.config = cfg;
  manifest.deviations.push_back(kLocalizerInitDeviation);
  manifest.extras.emplace_back("epochs_run", std::to_string(result.epochs.size()));
  manifest.extras.emplace_back("best_epoch", std::to_string(result.best_epoch));
  manifest.extras.emplace_back("train_steps", std::to_string(result.steps));
  append_metrics(manifest, "best_val", result.best_val);
  write_manifest(manifest, out_dir / "manifest.txt");

  char buf[128];
  std::snprintf(buf, sizeof buf, "best epoch %d  val meanIoU %.6f  val Pr@0.5 %.6f\n",
                result.best_epoch, result.best_val.mean_iou, result.best_val.pr(0.5));
  std::cout << buf;
  std::cout << "checkpoint: " << (out_dir / "best.ckpt").string() << "\n";
  return 0;
}

int cmd_train(const CliOverrides& ov, const std::string& data, const std::string& out) {
  RunConfig cfg = resolve_config(RunConfig::defaults(), ov);
  if (cfg.precision == "double") return run_train<double>(cfg, data, out);
  return run_train<float>(cfg, data, out);
}

template <typename T>
int run_eval(const RunConfig& cfg, const fs::path& ckpt, const fs::path& data_file,
             const fs::path& out_dir, int eval_top_n) {
  GroundingModel<T> model(cfg.model, cfg.seed);
  load_checkpoint(model.params(), ckpt);

  GraphFileHeader header;
  const auto graphs = read_graphs(data_file, &header);
  require_dims(header, cfg, "eval split");
  if (graphs.empty()) {
    throw Error(ErrorCategory::Data, "eval: dataset is empty: " + data_file.string());
  }

  std::vector<SamplePrediction> dump;
  const MetricsReport report = evaluate_model(model, graphs, eval_top_n, &dump);
  std::cout << "eval " << data_file.string() << " with top_n=" << eval_top_n << "\n"
            << format_report_table(report);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_report(report, out_dir / "report.txt");
    std::ofstream ps(out_dir / "per_sample.txt", std::ios::trunc);
    for (const auto& s : dump) {
      ps << "image_id=" << s.image_id << " argmax=" << s.argmax << " p=";
      for (std::size_t i = 0; i < s.probs.size(); ++i) {
        if (i) ps << ",";
        char b[32];
        std::snprintf(b, sizeof b, "%.9g", s.probs[i]);
        ps << b;
      }
      char b[192];
      std::snprintf(b, sizeof b, " box=%.9g,%.9g,%.9g,%.9g gt=%.9g,%.9g,%.9g,%.9g\n",
                    s.refined_box.cx, s.refined_box.cy, s.refined_box.w, s.refined_box.h,
                    s.gt_box.cx, s.gt_box.cy, s.gt_box.w, s.gt_box.h);
      ps << b;
    }
    std::cout << "report: " << (out_dir / "report.txt").string() << "\n";
  }
  return 0;
}

int cmd_eval(const CliOverrides& ov, const std::string& checkpoint, const std::string& data,
             const std::string& out) {
  const fs::path ckpt(checkpoint);
  CliOverrides ov2 = ov;
  if (ov2.config_path.empty()) {
    const fs::path sibling = ckpt.parent_path() / "run_config.cfg";
    if (!fs::exists(sibling)) {
      throw Error(ErrorCategory::Config,
                  "eval: no --config given and " + sibling.string() + " not found");
    }
    ov2.config_path = sibling.string();
  }
  RunConfig cfg = resolve_config(RunConfig::defaults(), ov2);
  const int eval_top_n = ov.top_n.value_or(cfg.top_n);
  if (cfg.precision == "double") return run_eval<double>(cfg, ckpt, data, out, eval_top_n);
  return run_eval<float>(cfg, ckpt, data, out, eval_top_n);
}

int cmd_gradcheck(const CliOverrides& ov, const std::string& corrupt) {
  RunConfig cfg = resolve_config(RunConfig::tiny(), ov);
  SynthGenerator gen(split_scene_config(cfg, 0));
  const std::vector<ProposalGraph> graphs{top_n(gen.scene(0), 8), top_n(gen.scene(1), 8)};

  GroundingModel<double> model(cfg.model, cfg.seed);
  GradCheckOptions opts;
  opts.corrupt_param = corrupt;
  const auto result = grad_check(model, graphs, cfg.loss, opts);

  std::printf("gradient check: %zu parameter tensors, step %.0e, tolerance %.0e\n",
              result.rows.size(), opts.step, opts.tol);
  std::printf("(relative error uses denominator max(1e-2, |ad|, |fd|))\n");
  std::printf("%-40s %14s  %s\n", "parameter", "max_rel_err", "status");
  for (const auto& row : result.rows) {
    std::printf("%-40s %14.3e  %s\n", row.name.c_str(), row.max_rel_err,
                row.pass ? "pass" : "FAIL");
  }
  std::printf("overall: %s (max rel err %.3e)\n", result.all_pass ? "pass" : "FAIL",
              result.max_rel_err);
  return result.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grounder: proposal-graph referring-expression grounding engine"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CliOverrides ov;
  std::string out_dir, data_path, checkpoint, corrupt_param;
  bool force = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", ov.config_path, "flat key = value config file");
    cmd->add_option("--seed", ov.seed, "run seed");
    cmd->add_option("--top-n", ov.top_n, "proposal budget after detector-score filtering");
    cmd->add_option("--multi-branch", ov.multi_branch, "on|off: toggle branches and fusion");
  };

  auto* gen = app.add_subcommand("generate", "write synthetic train/val/test proposal graphs");
  add_common(gen);
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_flag("--force", force, "overwrite a non-empty output directory");

  auto* train = app.add_subcommand("train", "train a grounding model on a generated dataset");
  add_common(train);
  train->add_option("--data", data_path, "dataset directory from generate")->required();
  train->add_option("--out", out_dir, "run output directory")->required();
  train->add_option("--epochs", ov.epochs, "override epoch budget");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a graphs file");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file from train")->required();
  eval->add_option("--data", data_path, "graphs file to evaluate")->required();
  eval->add_option("--out", out_dir, "directory for report.txt and per_sample.txt");

  auto* gc = app.add_subcommand("gradcheck",
                                "compare reverse-mode gradients against finite differences");
  add_common(gc);
  gc->add_option("--corrupt", corrupt_param, "test hook: corrupt this parameter's gradient")
      ->group("");  // hidden

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(ov, out_dir, force);
    if (train->parsed()) return cmd_train(ov, data_path, out_dir);
    if (eval->parsed()) return cmd_eval(ov, checkpoint, data_path, out_dir);
    if (gc->parsed()) return cmd_gradcheck(ov, corrupt_param);
  } catch (const Error& e) {
    std::cerr << "error: " << category_name(e.category()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
