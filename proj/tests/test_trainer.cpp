// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "grounder/config.hpp"
#include "grounder/manifest.hpp"
#include "grounder/synth.hpp"
#include "grounder/trainer.hpp"

using namespace grounder;
namespace fs = std::filesystem;

namespace {

SceneConfig tiny_scene() {
  SceneConfig cfg;
  cfg.d_obj = 16;
  cfg.d_t = 8;
  cfg.objects_min = 3;
  cfg.objects_max = 8;
  cfg.noise_sigma = 0.05;
  cfg.seed = 9;
  return cfg;
}

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.d_obj = 16;
  cfg.d_t = 8;
  cfg.branch.heads = 2;
  cfg.branch.layers = 1;
  cfg.reasoner.heads = 2;
  cfg.reasoner.layers = 1;
  return cfg;
}

}  // namespace

TEST_CASE("one epoch over 10 scenes reduces the training loss") {
  SynthGenerator gen(tiny_scene());
  const auto train = gen.generate(10);
  SceneConfig val_cfg = tiny_scene();
  val_cfg.first_scene_index = 100000;
  const auto val = SynthGenerator(val_cfg).generate(4);

  GroundingModel<double> model(tiny_model(), 0);
  TrainOptions opts;
  opts.batch_size = 2;
  opts.epochs = 1;
  opts.opt.lr = 1e-3;
  opts.seed = 0;
  const auto result = train_model(model, train, val, opts);
  CHECK(result.steps == 5);
  CHECK(result.last_batch_loss < result.first_batch_loss);
}

TEST_CASE("training is deterministic: identical runs, identical metrics") {
  SynthGenerator gen(tiny_scene());
  const auto train = gen.generate(16);
  const auto val = gen.generate(6);
  auto run = [&]() {
    GroundingModel<double> model(tiny_model(), 3);
    TrainOptions opts;
    opts.batch_size = 4;
    opts.epochs = 3;
    opts.seed = 3;
    return train_model(model, train, val, opts);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    CHECK(std::memcmp(&a.epochs[e].train_loss, &b.epochs[e].train_loss, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.epochs[e].val.mean_iou, &b.epochs[e].val.mean_iou, sizeof(double)) == 0);
  }
  CHECK(a.best_epoch == b.best_epoch);
}

TEST_CASE("resuming from a checkpoint reproduces the next-step loss bitwise") {
  SynthGenerator gen(tiny_scene());
  const auto train = gen.generate(8);
  const auto val = gen.generate(4);
  const auto ckpt = fs::temp_directory_path() / "grounder-resume.ckpt";

  {
    GroundingModel<double> model(tiny_model(), 5);
    TrainOptions opts;
    opts.batch_size = 4;
    opts.epochs = 2;
    opts.seed = 5;
    opts.checkpoint_path = ckpt;
    train_model(model, train, val, opts);
  }

  auto next_step_loss = [&]() {
    GroundingModel<double> model(tiny_model(), 5);
    load_checkpoint(model.params(), ckpt);
    ag::Tape<double> tape;
    ag::Var total;
    for (int i = 0; i < 4; ++i) {
      ag::Var l = model.loss(tape, train[i], LossWeights{});
      total = i == 0 ? l : tape.add(total, l);
    }
    return tape.scalar(tape.scale(total, 0.25));
  };
  const double l1 = next_step_loss();
  const double l2 = next_step_loss();
  CHECK(std::memcmp(&l1, &l2, sizeof(double)) == 0);
  fs::remove(ckpt);
}

TEST_CASE("evaluate_model dump rows carry normalized distributions") {
  SynthGenerator gen(tiny_scene());
  const auto graphs = gen.generate(6);
  GroundingModel<double> model(tiny_model(), 7);
  std::vector<SamplePrediction> dump;
  const auto report = evaluate_model(model, graphs, 4, &dump);
  CHECK(report.n_samples == 6);
  REQUIRE(dump.size() == 6);
  for (const auto& s : dump) {
    double sum = 0.0;
    for (double p : s.probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.probs.size() <= 4u);  // top_n filtering applied before the forward pass
  }
}

TEST_CASE("non-finite loss aborts with a numeric error") {
  SynthGenerator gen(tiny_scene());
  const auto train = gen.generate(4);
  GroundingModel<double> model(tiny_model(), 11);
  // poison one weight so the forward pass emits NaN
  model.params().at("reasoner.logit.w").value[0] = std::numeric_limits<double>::infinity();
  TrainOptions opts;
  opts.batch_size = 2;
  opts.epochs = 1;
  CHECK_THROWS_AS(train_model(model, train, train, opts), Error);
}

TEST_CASE("run config parses, overrides and serializes") {
  RunConfig cfg = RunConfig::defaults();
  apply_kv(cfg, {{"branch_heads", "8"}, {"multi_branch", "off"}, {"lr", "0.001"}, {"seed", "9"}});
  CHECK(cfg.model.branch.heads == 8);
  CHECK_FALSE(cfg.model.multi_branch);
  CHECK(cfg.opt.lr == doctest::Approx(0.001));
  CHECK(cfg.seed == 9);

  CHECK_THROWS_AS(apply_kv(cfg, {{"not_a_key", "1"}}), Error);
  CHECK_THROWS_AS(apply_kv(cfg, {{"lr", "fast"}}), Error);

  const auto path = fs::temp_directory_path() / "grounder-config.cfg";
  {
    std::ofstream os(path);
    os << "# comment\n\nbranch_layers = 2\n top_n = 16 # trailing comment\n";
  }
  const RunConfig loaded = load_run_config(path, cfg);
  CHECK(loaded.model.branch.layers == 2);
  CHECK(loaded.top_n == 16);
  CHECK(loaded.model.branch.heads == 8);  // base preserved
  fs::remove(path);

  // serialize -> parse round trip preserves every field
  RunConfig base = RunConfig::defaults();
  const auto path2 = fs::temp_directory_path() / "grounder-config2.cfg";
  {
    std::ofstream os(path2);
    os << loaded.serialize();
  }
  const RunConfig again = load_run_config(path2, base);
  CHECK(again.serialize() == loaded.serialize());
  fs::remove(path2);

  RunConfig bad = RunConfig::defaults();
  bad.scene.objects_max = 1;
  bad.scene.objects_min = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("manifests compare equal modulo the timestamp line") {
  RunManifest m;
  m.command = "train";
  m.config = RunConfig::defaults();
  m.deviations.push_back("box head seeded randomly");
  m.extras.emplace_back("final_mean_iou", "0.5");
  const auto p1 = fs::temp_directory_path() / "grounder-manifest-a.txt";
  const auto p2 = fs::temp_directory_path() / "grounder-manifest-b.txt";
  write_manifest(m, p1);
  write_manifest(m, p2);
  CHECK(manifests_equal_modulo_timestamp(p1, p2));
  m.extras.emplace_back("extra", "1");
  write_manifest(m, p2);
  CHECK_FALSE(manifests_equal_modulo_timestamp(p1, p2));
  fs::remove(p1);
  fs::remove(p2);
}
