/*
 * Copyright 2026 The mitml Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>
#include <map>
#include <vector>

#include "mitml/train.hpp"
#include "test_helpers.hpp"

using mitml::ModalClass;
using mitml::Tensor;
using mitml::TrainConfig;

namespace {

mitml::Corpus small_corpus(testutil::TempDir& dir, std::uint64_t seed = 5) {
  mitml::GenConfig cfg;
  cfg.num_ids = 8;
  cfg.tracklets_per_id_per_modality = 2;
  cfg.height = 16;
  cfg.width = 8;
  cfg.seed = seed;
  mitml::generate_corpus(dir.str(), cfg);
  return mitml::load_corpus(dir.str());
}

TrainConfig small_train_cfg() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_p = 4;
  cfg.batch_k = 2;
  cfg.frames_per_tracklet = 6;
  cfg.checkpoint_every = 0;
  return cfg;
}

std::vector<std::pair<std::string, std::vector<double>>> snapshot(
    const mitml::ModelParams& m) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (const auto& e : mitml::collect_params(m))
    out.emplace_back(e.name, e.tensor.data());
  return out;
}

bool is_discriminator(const std::string& name) {
  return name.rfind("w_m.", 0) == 0;
}

void clear_grads(const mitml::ModelParams& m) {
  for (const auto& e : mitml::collect_params(m)) {
    Tensor t = e.tensor;
    t.zero_grad();
  }
}

struct StepFixture {
  testutil::TempDir dir{"train"};
  mitml::Corpus corpus;
  std::vector<int> train_idx;
  std::map<int, int> class_of;
  mitml::ModelParams model;

  StepFixture() : corpus(small_corpus(dir)) {
    train_idx = mitml::split_indices(corpus.records, "train");
    class_of = mitml::identity_classes(corpus.records, train_idx);
    mitml::BackboneConfig bc;
    bc.stage_channels = {4, 4, 8, 8, 8};
    bc.embed_dim = 8;
    bc.se_reduction = 2;
    bc.height = corpus.height;
    bc.width = corpus.width;
    bc.seq_len = 6;
    model = mitml::init_model(bc, static_cast<int>(class_of.size()), 3, 7);
  }

  std::vector<int> one_batch(mitml::Rng& rng) const {
    mitml::PkBatchSampler sampler(corpus.records, train_idx, 4, 2);
    return sampler.next_batch(rng);
  }
};

}  // namespace

TEST_CASE("the discriminator phase never touches the encoder") {
  StepFixture fx;
  TrainConfig cfg = small_train_cfg();
  mitml::Rng rng(3);
  const auto batch = fx.one_batch(rng);
  const auto encoded = mitml::encode_batch(
      fx.corpus, batch, fx.class_of, fx.model, cfg, mitml::TrainMode::kFull,
      mitml::Pooling::kAverage, rng);

  const auto before = snapshot(fx.model);

  std::vector<Tensor> fv, fi;
  for (const auto& s : encoded)
    (s.modality == ModalClass::kRgb ? fv : fi).push_back(s.feature.detach());
  clear_grads(fx.model);
  const Tensor adv2 = mitml::adv_discriminator_loss(fv, fi, fx.model.w_m);
  adv2.backward();

  // The detached graph never reaches encoder tensors, so they hold no
  // gradient buffers at all.
  for (const auto& e : mitml::encoder_params(fx.model))
    CHECK_FALSE(e.tensor.has_grad());

  mitml::SgdOptimizer opt(cfg.momentum, cfg.weight_decay);
  opt.step(mitml::discriminator_params(fx.model),
           [](mitml::LrClass) { return 0.01; });

  const auto after = snapshot(fx.model);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (is_discriminator(before[i].first))
      CHECK(before[i].second != after[i].second);
    else
      CHECK(before[i].second == after[i].second);
  }
}

TEST_CASE("baseline steps leave the modality head untouched") {
  StepFixture fx;
  TrainConfig cfg = small_train_cfg();
  cfg.mode = "baseline";
  mitml::Rng rng(4);
  const auto batch = fx.one_batch(rng);
  const auto before = snapshot(fx.model);

  mitml::SgdOptimizer opt(cfg.momentum, cfg.weight_decay);
  const auto losses =
      mitml::train_step(fx.corpus, batch, fx.class_of, fx.model, opt, cfg,
                        mitml::LrTriple{0.01, 0.001, 0.01}, rng);
  CHECK(losses.adv1 == 0.0);
  CHECK(losses.adv2 == 0.0);
  CHECK(losses.total > 0.0);

  const auto after = snapshot(fx.model);
  bool encoder_moved = false;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (is_discriminator(before[i].first))
      CHECK(before[i].second == after[i].second);
    else
      encoder_moved = encoder_moved || before[i].second != after[i].second;
  }
  CHECK(encoder_moved);
}

TEST_CASE("a full step moves both players") {
  StepFixture fx;
  TrainConfig cfg = small_train_cfg();
  mitml::Rng rng(5);
  const auto batch = fx.one_batch(rng);
  const auto before = snapshot(fx.model);

  mitml::SgdOptimizer opt(cfg.momentum, cfg.weight_decay);
  const auto losses =
      mitml::train_step(fx.corpus, batch, fx.class_of, fx.model, opt, cfg,
                        mitml::LrTriple{0.01, 0.001, 0.01}, rng);
  CHECK(losses.adv2 > 0.0);
  CHECK(losses.total > 0.0);
  CHECK(std::isfinite(losses.adv1));

  const auto after = snapshot(fx.model);
  bool encoder_moved = false, wm_moved = false;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const bool moved = before[i].second != after[i].second;
    if (is_discriminator(before[i].first))
      wm_moved = wm_moved || moved;
    else
      encoder_moved = encoder_moved || moved;
  }
  CHECK(encoder_moved);
  CHECK(wm_moved);
}

TEST_CASE("a zero learning rate freezes every parameter bitwise") {
  StepFixture fx;
  TrainConfig cfg = small_train_cfg();
  mitml::Rng rng(6);
  const auto batch = fx.one_batch(rng);
  const auto before = snapshot(fx.model);

  mitml::SgdOptimizer opt(cfg.momentum, cfg.weight_decay);
  mitml::train_step(fx.corpus, batch, fx.class_of, fx.model, opt, cfg,
                    mitml::LrTriple{0.0, 0.0, 0.0}, rng);
  CHECK(snapshot(fx.model) == before);
}

TEST_CASE("non-finite losses abort with a parameter norm dump") {
  StepFixture fx;
  TrainConfig cfg = small_train_cfg();
  cfg.mode = "baseline";
  {
    Tensor w = fx.model.w_id.w;
    w.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
  }
  mitml::Rng rng(7);
  const auto batch = fx.one_batch(rng);
  mitml::SgdOptimizer opt(cfg.momentum, cfg.weight_decay);
  CHECK_THROWS_WITH(
      mitml::train_step(fx.corpus, batch, fx.class_of, fx.model, opt, cfg,
                        mitml::LrTriple{0.01, 0.001, 0.01}, rng),
      Catch::Matchers::ContainsSubstring("parameter l2 norms"));
}

TEST_CASE("identity classes are dense and sorted") {
  std::vector<mitml::ManifestRecord> records(3);
  records[0].identity = 9;
  records[1].identity = 3;
  records[2].identity = 7;
  const auto class_of = mitml::identity_classes(records, {0, 1, 2});
  REQUIRE(class_of.size() == 3);
  CHECK(class_of.at(3) == 0);
  CHECK(class_of.at(7) == 1);
  CHECK(class_of.at(9) == 2);
}

// ---------------------------------------------------------------------------
// Training driver
// ---------------------------------------------------------------------------

TEST_CASE("two identical training runs produce identical artifacts") {
  testutil::TempDir dir("det");
  const mitml::Corpus corpus = small_corpus(dir);
  const TrainConfig cfg = small_train_cfg();

  const auto a = mitml::train(corpus, dir.sub("a"), cfg);
  const auto b = mitml::train(corpus, dir.sub("b"), cfg);

  namespace fs = std::filesystem;
  CHECK(testutil::read_file((fs::path(dir.sub("a")) / "loss.csv").string()) ==
        testutil::read_file((fs::path(dir.sub("b")) / "loss.csv").string()));
  CHECK(testutil::read_file(a.final_checkpoint) ==
        testutil::read_file(b.final_checkpoint));
  CHECK(a.epoch_mean_total == b.epoch_mean_total);
}

TEST_CASE("resuming from a checkpoint replays the uninterrupted run") {
  testutil::TempDir dir("resume");
  const mitml::Corpus corpus = small_corpus(dir);
  TrainConfig cfg = small_train_cfg();
  cfg.epochs = 4;

  const auto full = mitml::train(corpus, dir.sub("full"), cfg);

  TrainConfig head_cfg = cfg;
  head_cfg.epochs = 2;
  const auto head = mitml::train(corpus, dir.sub("head"), head_cfg);
  const auto tail =
      mitml::train(corpus, dir.sub("tail"), cfg, head.final_checkpoint);

  namespace fs = std::filesystem;
  const std::string full_csv =
      testutil::read_file((fs::path(dir.sub("full")) / "loss.csv").string());
  const std::string head_csv =
      testutil::read_file((fs::path(dir.sub("head")) / "loss.csv").string());
  const std::string tail_csv =
      testutil::read_file((fs::path(dir.sub("tail")) / "loss.csv").string());
  CHECK(head_csv + tail_csv == full_csv);
  CHECK(testutil::read_file(full.final_checkpoint) ==
        testutil::read_file(tail.final_checkpoint));
}

TEST_CASE("zero epochs writes the initial state and an empty log") {
  testutil::TempDir dir("zero");
  const mitml::Corpus corpus = small_corpus(dir);
  TrainConfig cfg = small_train_cfg();
  cfg.epochs = 0;

  const auto out = mitml::train(corpus, dir.sub("run"), cfg);
  CHECK(out.epoch_mean_total.empty());

  namespace fs = std::filesystem;
  const std::string csv =
      testutil::read_file((fs::path(dir.sub("run")) / "loss.csv").string());
  CHECK(csv == std::string(mitml::kLossCsvHeader) + "\n");

  // The checkpoint holds the untouched seed-1 initialization.
  const mitml::Checkpoint ck = mitml::Checkpoint::load(out.final_checkpoint);
  CHECK(ck.at("meta.trained_epochs").item() == 0.0);
  const mitml::ModelParams restored = mitml::model_from_checkpoint(ck);

  mitml::BackboneConfig bc;
  bc.height = corpus.height;
  bc.width = corpus.width;
  bc.seq_len = cfg.frames_per_tracklet;
  const mitml::ModelParams fresh = mitml::init_model(bc, 4, 3, cfg.seed);
  const auto a = snapshot(restored), b = snapshot(fresh);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second == b[i].second);
  }
}

TEST_CASE("resume rejects a corpus that disagrees with the checkpoint") {
  testutil::TempDir dir("badresume");
  const mitml::Corpus corpus = small_corpus(dir);
  TrainConfig cfg = small_train_cfg();
  cfg.epochs = 1;
  const auto out = mitml::train(corpus, dir.sub("run"), cfg);

  TrainConfig other = cfg;
  other.frames_per_tracklet = 12;
  CHECK_THROWS(
      mitml::train(corpus, dir.sub("bad"), other, out.final_checkpoint));
}

TEST_CASE("periodic checkpoints appear on schedule") {
  testutil::TempDir dir("periodic");
  const mitml::Corpus corpus = small_corpus(dir);
  TrainConfig cfg = small_train_cfg();
  cfg.epochs = 3;
  cfg.checkpoint_every = 2;
  mitml::train(corpus, dir.sub("run"), cfg);

  namespace fs = std::filesystem;
  CHECK(fs::exists(fs::path(dir.sub("run")) / "model_epoch0002.mckp"));
  CHECK_FALSE(fs::exists(fs::path(dir.sub("run")) / "model_epoch0001.mckp"));
  CHECK(fs::exists(fs::path(dir.sub("run")) / "model_final.mckp"));
}

TEST_CASE("training on the desk corpus drives the loss down") {
  testutil::TempDir dir("learn");
  mitml::GenConfig gen;  // 20 identities at 32x16
  gen.seed = 1;
  mitml::generate_corpus(dir.str(), gen);
  const mitml::Corpus corpus = mitml::load_corpus(dir.str());

  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.checkpoint_every = 0;
  const auto out = mitml::train(corpus, dir.sub("run"), cfg);
  REQUIRE(out.epoch_mean_total.size() == 10);
  CHECK(out.epoch_mean_total.back() < out.epoch_mean_total.front());
  for (double v : out.epoch_mean_total) CHECK(std::isfinite(v));
}
