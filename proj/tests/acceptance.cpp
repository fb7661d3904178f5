// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Criteria 5-7 train on the standard synthetic benchmark and dominate the
// runtime (~10-25 minutes total on two cores).
//
// Usage: acceptance [--cli <path-to-grounder-binary>] [--fast]
//   --fast skips the benchmark trainings (criteria 5, 6, 7) for local
//   iteration; the full run is the acceptance gate.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "grounder/config.hpp"
#include "grounder/losses.hpp"
#include "grounder/manifest.hpp"
#include "grounder/metrics.hpp"
#include "grounder/model.hpp"
#include "grounder/proposal_graph.hpp"
#include "grounder/synth.hpp"
#include "grounder/trainer.hpp"
#include "oracles.hpp"

using namespace grounder;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Pinned thresholds for criterion 5, measured on the first oracle run of the
// seed-0 standard benchmark (test split: Pr@0.5 = 0.952, meanIoU = 0.80025)
// and pinned with the agreed -0.02 tolerance. The spec floors still apply.
constexpr double kPinnedPr05 = 0.932;
constexpr double kPinnedMeanIoU = 0.780;
constexpr double kFloorPr05 = 0.90;
constexpr double kFloorMeanIoU = 0.75;

RunConfig benchmark_config(bool multi_branch) {
  RunConfig cfg = RunConfig::defaults();  // desk scale: d_obj=64, d_t=32, 2000 train scenes
  cfg.seed = 0;
  cfg.model.multi_branch = multi_branch;
  return cfg;
}

SceneConfig split_config(const RunConfig& cfg, std::uint64_t offset) {
  SceneConfig sc = cfg.scene;
  sc.seed = cfg.seed;
  sc.first_scene_index = offset;
  return sc;
}

struct Benchmark {
  std::vector<ProposalGraph> train, val, test;
};

Benchmark make_benchmark(const RunConfig& cfg) {
  Benchmark b;
  b.train = SynthGenerator(split_config(cfg, 0)).generate(cfg.train_scenes);
  b.val = SynthGenerator(split_config(cfg, 1ull << 20)).generate(cfg.val_scenes);
  b.test = SynthGenerator(split_config(cfg, 1ull << 21)).generate(cfg.test_scenes);
  return b;
}

void criterion_1_gradcheck() {
  const auto t0 = Clock::now();
  RunConfig cfg = RunConfig::tiny();
  SynthGenerator gen(split_config(cfg, 0));
  const std::vector<ProposalGraph> graphs{top_n(gen.scene(0), 8), top_n(gen.scene(1), 8)};
  GroundingModel<double> model(cfg.model, cfg.seed);
  GradCheckOptions opts;
  opts.step = 1e-5;
  opts.tol = 1e-4;
  const auto result = grad_check(model, graphs, cfg.loss, opts);
  int passed = 0;
  for (const auto& row : result.rows) passed += row.pass;
  const double secs = seconds_since(t0);
  char detail[160];
  std::snprintf(detail, sizeof detail, "%d/%zu parameters, max rel err %.3e, %.1fs", passed,
                result.rows.size(), result.max_rel_err, secs);
  report(1, result.all_pass && passed == static_cast<int>(result.rows.size()) && secs < 120.0,
         "gradient correctness on the tiny config", detail);
}

void criterion_2_geometry() {
  const auto t0 = Clock::now();
  bool ok = true;
  double max_diff = 0.0;
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const BoxCxCyWH a = testing::random_box(rng);
    const BoxCxCyWH b = testing::random_box(rng);
    const auto grid = testing::grid_overlap_oracle(a, b, 2000);
    max_diff = std::max(max_diff, std::abs(grid.iou - iou(a, b)));
    max_diff = std::max(max_diff, std::abs(grid.giou - giou(a, b)));
  }
  ok = ok && max_diff < 2e-2;

  const BoxCxCyWH qa{0.25, 0.25, 0.5, 0.5};
  const BoxCxCyWH qb{0.5, 0.5, 0.5, 0.5};
  ok = ok && std::abs(iou(qa, qb) - 1.0 / 7.0) < 1e-6;
  ok = ok && std::abs(giou(from_corners({0, 0, 1, 1}), from_corners({1, 1, 2, 2})) + 0.5) < 1e-6;
  ok = ok && std::abs(giou(qa, qb) - (1.0 / 7.0 - 0.125 / 0.5625)) < 1e-6;

  const double secs = seconds_since(t0);
  char detail[128];
  std::snprintf(detail, sizeof detail, "1000 pairs vs 2000x2000 grid, max |diff| %.4f, %.1fs",
                max_diff, secs);
  report(2, ok && secs < 60.0, "iou/giou match the rasterization oracle and hand cases", detail);
}

void criterion_3_permutation() {
  RunConfig cfg = benchmark_config(true);
  GroundingModel<double> model(cfg.model, cfg.seed);
  SynthGenerator gen(split_config(cfg, 0));
  Rng rng(555);
  double worst = 0.0;
  bool ok = true;
  for (int s = 0; s < 100; ++s) {
    const ProposalGraph g = gen.scene(static_cast<std::uint64_t>(s));
    ProposalGraph perm = g;
    std::vector<int> order(g.nodes.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i) perm.nodes[i] = g.nodes[order[i]];

    const auto a = model.infer(g);
    const auto b = model.infer(perm);
    for (std::size_t i = 0; i < order.size(); ++i) {
      worst = std::max(worst, std::abs(b.probs[i] - a.probs[order[i]]));
    }
    for (std::size_t c = 0; c < a.o_ref.size(); ++c) {
      worst = std::max(worst, std::abs(a.o_ref[c] - b.o_ref[c]));
    }
    worst = std::max({worst, std::abs(a.refined_box.cx - b.refined_box.cx),
                      std::abs(a.refined_box.cy - b.refined_box.cy),
                      std::abs(a.refined_box.w - b.refined_box.w),
                      std::abs(a.refined_box.h - b.refined_box.h)});

    // token permutation: branch outputs (O*) and the rest of the head
    ProposalGraph tperm = g;
    for (int t = 0; t < g.text.n_tokens; ++t) {
      const int src = (t + 1) % g.text.n_tokens;
      for (int c = 0; c < g.text.dim; ++c)
        tperm.text.data[t * g.text.dim + c] = g.text.data[src * g.text.dim + c];
    }
    ag::Tape<double> tape1, tape2;
    const auto f1 = model.forward(tape1, g);
    const auto f2 = model.forward(tape2, tperm);
    auto s1 = tape1.value(f1.o_star);
    auto s2 = tape2.value(f2.o_star);
    for (std::size_t i = 0; i < s1.size(); ++i) worst = std::max(worst, std::abs(s1[i] - s2[i]));
  }
  ok = worst < 1e-6;
  char detail[96];
  std::snprintf(detail, sizeof detail, "100 seeded graphs, worst component diff %.2e", worst);
  report(3, ok, "proposal/token permutation suite", detail);
}

void criterion_4_metrics() {
  Rng rng(4096);
  std::vector<std::pair<BoxCxCyWH, BoxCxCyWH>> pairs;
  for (int i = 0; i < 1000; ++i) pairs.emplace_back(testing::random_box(rng), testing::random_box(rng));
  const auto r = evaluate(pairs);
  const auto brute = testing::brute_force_metrics(pairs, {0.5, 0.6, 0.7, 0.8, 0.9});
  double worst = std::abs(r.mean_iou - brute.mean_iou);
  worst = std::max(worst, std::abs(r.cmu_iou - brute.cmu_iou));
  for (std::size_t i = 0; i < brute.pr_at.size(); ++i) {
    worst = std::max(worst, std::abs(r.pr_at[i].second - brute.pr_at[i].second));
  }
  bool ok = worst < 1e-9;

  const auto hand = evaluate({{from_corners({0, 0, 1, 1}), from_corners({0, 0, 1, 2})},
                              {{0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}}});
  ok = ok && std::abs(hand.mean_iou - 0.75) < 1e-12 && std::abs(hand.pr(0.5) - 1.0) < 1e-12;
  const auto cmu = evaluate({{from_corners({0, 0, 1, 1}), from_corners({0, 0, 1, 2})},
                             {from_corners({0, 0, 1, 2}), from_corners({0, 0, 2, 2})}});
  ok = ok && std::abs(cmu.cmu_iou - 0.5) < 1e-12 && std::abs(cmu.mean_iou - 0.5) < 1e-12;

  char detail[96];
  std::snprintf(detail, sizeof detail, "1000 samples, worst |diff| vs brute force %.1e", worst);
  report(4, ok, "metric formulas match an independent recomputation", detail);
}

struct TrainedRun {
  MetricsReport test_full;
  double train_seconds = 0.0;
  std::unique_ptr<GroundingModel<float>> model;
};

TrainedRun train_benchmark(const Benchmark& bench, bool multi_branch) {
  RunConfig cfg = benchmark_config(multi_branch);
  TrainedRun out;
  out.model = std::make_unique<GroundingModel<float>>(cfg.model, cfg.seed);
  TrainOptions opts;
  opts.opt = cfg.opt;
  opts.batch_size = cfg.batch_size;
  opts.epochs = cfg.epochs;
  opts.patience = cfg.patience;
  opts.loss = cfg.loss;
  opts.top_n = cfg.top_n;
  opts.seed = cfg.seed;
  const auto t0 = Clock::now();
  train_model(*out.model, bench.train, bench.val, opts);
  out.train_seconds = seconds_since(t0);
  out.test_full = evaluate_model(*out.model, bench.test, cfg.top_n);
  return out;
}

void criteria_5_6_7_benchmark() {
  const RunConfig cfg = benchmark_config(true);
  const Benchmark bench = make_benchmark(cfg);

  TrainedRun on = train_benchmark(bench, true);
  {
    const bool ok = on.test_full.pr(0.5) >= kFloorPr05 && on.test_full.mean_iou >= kFloorMeanIoU &&
                    on.test_full.pr(0.5) >= kPinnedPr05 && on.test_full.mean_iou >= kPinnedMeanIoU &&
                    on.train_seconds < 1800.0;
    char detail[192];
    std::snprintf(detail, sizeof detail,
                  "test Pr@0.5 %.4f (>= %.3f, pinned %.3f), meanIoU %.4f (>= %.3f, pinned %.3f), "
                  "train %.0fs",
                  on.test_full.pr(0.5), kFloorPr05, kPinnedPr05, on.test_full.mean_iou,
                  kFloorMeanIoU, kPinnedMeanIoU, on.train_seconds);
    report(5, ok, "learning capability on the standard benchmark", detail);
  }

  {
    const MetricsReport quarter = evaluate_model(*on.model, bench.test, cfg.top_n / 4);
    const double degradation = on.test_full.mean_iou - quarter.mean_iou;
    char detail[128];
    std::snprintf(detail, sizeof detail,
                  "meanIoU %.4f at top_n=%d vs %.4f at top_n=%d, degradation %.4f", quarter.mean_iou,
                  cfg.top_n / 4, on.test_full.mean_iou, cfg.top_n, degradation);
    report(7, degradation < 0.02, "top-N robustness at a quarter of the proposal budget", detail);
  }

  TrainedRun off = train_benchmark(bench, false);
  {
    const double gap = on.test_full.mean_iou - off.test_full.mean_iou;
    char detail[128];
    std::snprintf(detail, sizeof detail, "meanIoU on %.4f vs off %.4f, gap %.4f",
                  on.test_full.mean_iou, off.test_full.mean_iou, gap);
    report(6, gap >= 0.03, "removing the multi-branch network costs meanIoU", detail);
  }
}

void criterion_8_loss_units() {
  ag::Tape<double> t;
  bool ok = true;

  const double ln4 = t.scalar(cls_loss(t, t.constant({4}, {0.25, 0.25, 0.25, 0.25}), 1));
  ok = ok && std::abs(ln4 - std::log(4.0)) < 1e-9;

  // composite: 100*ln4 + 5*(1 - giou(quadrant pair)) + 0.2
  const BoxCxCyWH a{0.25, 0.25, 0.5, 0.5};
  const BoxCxCyWH b{0.5, 0.5, 0.5, 0.5};
  ag::Var p = t.constant({4}, {0.25, 0.25, 0.25, 0.25});
  ag::Var pred = t.constant({4}, {a.cx, a.cy, a.w, a.h});
  const auto parts = box_losses(t, pred, b);
  const double composite =
      100.0 * ln4 + 5.0 * t.scalar(parts.giou_loss) + 0.2;
  ok = ok && std::abs(composite - 144.2262615) < 1e-3;

  const BoxCxCyWH gt{0.5, 0.5, 0.4, 0.6};
  ag::Var perfect_p = t.constant({2}, {0.0, 1.0});
  ag::Var perfect_box = t.constant({4}, {gt.cx, gt.cy, gt.w, gt.h});
  const double zero = t.scalar(total_loss(t, perfect_p, 1, perfect_box, gt, LossWeights{}));
  ok = ok && zero == 0.0;

  char detail[128];
  std::snprintf(detail, sizeof detail, "ln4 err %.1e, composite %.4f, perfect loss %.17g",
                std::abs(ln4 - std::log(4.0)), composite, zero);
  report(8, ok, "loss unit values", detail);
}

void criterion_9_determinism(const std::string& cli) {
  if (cli.empty()) {
    report(9, false, "determinism of seeded training runs", "no --cli path given");
    return;
  }
  const fs::path root = fs::temp_directory_path() / "grounder-acceptance-determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg_path = root / "small.cfg";
  {
    std::ofstream os(cfg_path);
    os << "train_scenes = 60\nval_scenes = 20\ntest_scenes = 20\nepochs = 3\nseed = 7\n";
  }
  auto run = [&](const char* tag) {
    const fs::path data = root / (std::string("data-") + tag);
    const fs::path out = root / (std::string("run-") + tag);
    std::ostringstream cmd;
    cmd << cli << " generate --config " << cfg_path << " --out " << data << " --force"
        << " > /dev/null 2>&1 && " << cli << " train --config " << cfg_path << " --data " << data
        << " --out " << out << " > /dev/null 2>&1";
    return std::system(cmd.str().c_str()) == 0 ? out : fs::path{};
  };
  const fs::path run_a = run("a");
  const fs::path run_b = run("b");
  bool ok = !run_a.empty() && !run_b.empty();
  std::string detail = "two identical seeded cmd_train runs";
  if (ok) {
    ok = manifests_equal_modulo_timestamp(run_a / "manifest.txt", run_b / "manifest.txt");
    detail += ok ? ", manifests identical modulo timestamp" : ", manifests DIFFER";
    // the manifest embeds the final double-precision metrics at %.17g, so
    // manifest equality already pins them bitwise; double-check the files exist
    ok = ok && fs::exists(run_a / "best.ckpt") && fs::exists(run_b / "best.ckpt");
  } else {
    detail += ", CLI run failed";
  }
  report(9, ok, "determinism of seeded training runs", detail);
  fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  bool fast = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--cli" && i + 1 < argc) cli = argv[++i];
    if (arg == "--fast") fast = true;
  }

  criterion_2_geometry();
  criterion_4_metrics();
  criterion_8_loss_units();
  criterion_1_gradcheck();
  criterion_3_permutation();
  criterion_9_determinism(cli);
  if (fast) {
    std::printf("[SKIP] criteria 5, 6, 7: --fast given (benchmark training skipped)\n");
  } else {
    criteria_5_6_7_benchmark();
  }

  if (g_failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criteria FAILED\n", g_failures);
  return 1;
}
