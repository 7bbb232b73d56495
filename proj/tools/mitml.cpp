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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mitml/config.hpp"
#include "mitml/eval.hpp"
#include "mitml/gradsuite.hpp"
#include "mitml/synthdata.hpp"
#include "mitml/train.hpp"

namespace {

struct GenArgs {
  std::string out;
  mitml::GenConfig cfg;
};

int run_gen_data(const GenArgs& a) {
  mitml::generate_corpus(a.out, a.cfg);
  const mitml::Corpus corpus = mitml::load_corpus(a.out);
  int train = 0, test = 0;
  for (const auto& r : corpus.records) (r.split == "train" ? train : test)++;
  std::cout << "wrote " << corpus.records.size() << " tracklets (" << train
            << " train, " << test << " test) for " << a.cfg.num_ids
            << " identities to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, config, out, resume;
  mitml::TrainConfig cfg;  // flag overrides merged in main
};

int run_train(const TrainArgs& a) {
  const mitml::Corpus corpus = mitml::load_corpus(a.data);
  const mitml::TrainOutputs result =
      mitml::train(corpus, a.out, a.cfg, a.resume);
  std::cout << "final checkpoint: " << result.final_checkpoint << "\n";
  if (!result.epoch_mean_total.empty())
    std::cout << "last epoch mean L_total: " << result.epoch_mean_total.back()
              << "\n";
  return 0;
}

struct EvalArgs {
  std::string data, ckpt, direction = "both", out;
  bool probe = false;
};

int run_eval(const EvalArgs& a) {
  const mitml::Corpus corpus = mitml::load_corpus(a.data);
  const mitml::Checkpoint ck = mitml::Checkpoint::load(a.ckpt);
  const mitml::ModelParams model = mitml::model_from_checkpoint(ck);
  const mitml::EvalOptions opt = mitml::eval_options_from_checkpoint(ck, model);
  const mitml::TestFeatures features =
      mitml::extract_test_features(corpus, model, opt);

  std::vector<mitml::EvalReport> reports;
  if (a.direction == "both" || a.direction == "i2v")
    reports.push_back(
        mitml::evaluate_direction(features, mitml::Direction::kIrToVis));
  if (a.direction == "both" || a.direction == "v2i")
    reports.push_back(
        mitml::evaluate_direction(features, mitml::Direction::kVisToIr));
  MITML_CHECK(!reports.empty(), "eval: direction must be both|i2v|v2i, got '",
              a.direction, "'");

  mitml::render_eval_table(std::cout, reports);
  if (a.probe) {
    const double acc =
        mitml::probe_modality_accuracy(features.rgb, features.ir);
    std::cout << "modality probe accuracy: " << acc << " (chance 0.5)\n";
  }
  if (!a.out.empty()) {
    std::ofstream os(a.out);
    MITML_CHECK(os.good(), "eval: cannot open ", a.out);
    mitml::write_eval_csv(os, reports);
    std::cout << "wrote " << a.out << "\n";
  }
  return 0;
}

struct GradcheckArgs {
  std::string module = "all";
  int seeds = 20;
};

int run_gradcheck(const GradcheckArgs& a) {
  const mitml::GradSuiteReport report =
      mitml::run_grad_suite(a.module, a.seeds);
  std::printf("%-8s %-18s %12s %8s  %s\n", "module", "case", "max_rel_err",
              "coords", "status");
  for (const auto& row : report.rows)
    std::printf("%-8s %-18s %12.3e %8zu  %s\n", row.module.c_str(),
                row.name.c_str(), row.max_rel_err, row.coords,
                row.passed ? "pass" : "FAIL");
  std::printf("worst %.3e over %d seeds per case: %s\n", report.worst, a.seeds,
              report.all_passed ? "pass" : "FAIL");
  return report.all_passed ? 0 : 1;
}

struct AblateArgs {
  std::string sweep, data, out;
  int epochs = 30;
  std::uint64_t seed = 1;
};

mitml::EvalReport train_and_eval(const mitml::Corpus& corpus,
                                 const mitml::TrainConfig& cfg,
                                 const std::string& out_dir,
                                 mitml::Direction dir) {
  const mitml::TrainOutputs t = mitml::train(corpus, out_dir, cfg);
  mitml::EvalOptions opt;
  opt.use_tmr = mitml::mode_uses_tmr(mitml::train_mode_from_string(cfg.mode));
  opt.pooling = mitml::pooling_from_string(cfg.pooling);
  opt.n_frames = cfg.frames_per_tracklet;
  return mitml::evaluate_direction(
      mitml::extract_test_features(corpus, t.model, opt), dir);
}

void write_sweep_csv(const std::string& path, const std::string& key_name,
                     const std::vector<std::pair<std::string, mitml::EvalReport>>& rows) {
  std::ofstream os(path);
  MITML_CHECK(os.good(), "ablate: cannot open ", path);
  os << key_name << ",direction,r1,r5,r10,r20,map,num_queries\n";
  char buf[160];
  for (const auto& [key, r] : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%d",
                  key.c_str(), r.direction.c_str(), r.r1, r.r5, r.r10, r.r20,
                  r.map, r.num_queries);
    os << buf << "\n";
  }
  std::cout << "wrote " << path << "\n";
}

int run_ablate(const AblateArgs& a) {
  namespace fs = std::filesystem;
  const mitml::Corpus corpus = mitml::load_corpus(a.data);
  fs::create_directories(a.out);

  mitml::TrainConfig base;
  base.epochs = a.epochs;
  base.seed = a.seed;

  std::vector<std::pair<std::string, mitml::EvalReport>> rows;
  if (a.sweep == "lambda") {
    for (double lambda : {0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0}) {
      mitml::TrainConfig cfg = base;
      cfg.mode = "full";
      cfg.lambda = lambda;
      char key[32];
      std::snprintf(key, sizeof key, "%g", lambda);
      const std::string run_dir = (fs::path(a.out) / ("lambda_" + std::string(key))).string();
      rows.emplace_back(key, train_and_eval(corpus, cfg, run_dir,
                                            mitml::Direction::kIrToVis));
      std::cout << "lambda " << key << ": mAP " << rows.back().second.map
                << "\n";
    }
    write_sweep_csv((fs::path(a.out) / "lambda.csv").string(), "lambda", rows);
  } else if (a.sweep == "pooling") {
    for (const char* pooling : {"average", "max", "softmax_weighted"}) {
      mitml::TrainConfig cfg = base;
      cfg.mode = "baseline";
      cfg.pooling = pooling;
      const std::string run_dir =
          (fs::path(a.out) / (std::string("pooling_") + pooling)).string();
      rows.emplace_back(pooling, train_and_eval(corpus, cfg, run_dir,
                                                mitml::Direction::kIrToVis));
      std::cout << "pooling " << pooling << ": mAP " << rows.back().second.map
                << "\n";
    }
    write_sweep_csv((fs::path(a.out) / "pooling.csv").string(), "pooling",
                    rows);
  } else if (a.sweep == "adv-mode") {
    for (const char* mode : {"three_class", "inverse_label", "uniform_target"}) {
      mitml::TrainConfig cfg = base;
      cfg.mode = "full";
      cfg.adv_mode = mode;
      const std::string run_dir =
          (fs::path(a.out) / (std::string("adv_") + mode)).string();
      rows.emplace_back(mode, train_and_eval(corpus, cfg, run_dir,
                                             mitml::Direction::kIrToVis));
      std::cout << "adv-mode " << mode << ": mAP " << rows.back().second.map
                << "\n";
    }
    write_sweep_csv((fs::path(a.out) / "adv_mode.csv").string(), "adv_mode",
                    rows);
  } else if (a.sweep == "n-frames") {
    // One baseline model, evaluated with per-n chunked frames (the TMR path
    // is fixed-length, so this sweep runs the pooling encoder).
    mitml::TrainConfig cfg = base;
    cfg.mode = "baseline";
    const mitml::TrainOutputs t = mitml::train(
        corpus, (fs::path(a.out) / "n_frames_model").string(), cfg);
    mitml::EvalOptions opt;
    opt.use_tmr = false;
    opt.pooling = mitml::pooling_from_string(cfg.pooling);
    const auto table =
        mitml::n_frames_sweep(corpus, t.model, opt, {1, 2, 4, 6},
                              mitml::Direction::kIrToVis);
    const std::string path = (fs::path(a.out) / "n_frames.csv").string();
    std::ofstream os(path);
    MITML_CHECK(os.good(), "ablate: cannot open ", path);
    os << "n,r1,r5,r10,r20,map,num_queries\n";
    char buf[160];
    for (const auto& [n, r] : table) {
      std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%d", n, r.r1,
                    r.r5, r.r10, r.r20, r.map, r.num_queries);
      os << buf << "\n";
      std::cout << "n " << n << ": mAP " << r.map << "\n";
    }
    std::cout << "wrote " << path << "\n";
  } else {
    MITML_CHECK(false, "ablate: sweep must be lambda|pooling|adv-mode|n-frames,",
                " got '", a.sweep, "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mitml: cross-modal video re-identification pipeline"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-data", "Generate the synthetic tracklet corpus");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--ids", gen.cfg.num_ids, "Number of identities");
  gen_cmd->add_option("--seed", gen.cfg.seed, "Corpus seed");
  gen_cmd->add_option("--tracklets", gen.cfg.tracklets_per_id_per_modality,
                      "Tracklets per identity per modality");
  gen_cmd->add_option("--confusable", gen.cfg.confusable_fraction,
                      "Fraction of identities paired as confusable");
  gen_cmd->add_option("--height", gen.cfg.height, "Frame height");
  gen_cmd->add_option("--width", gen.cfg.width, "Frame width");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", train.data, "Corpus directory")->required();
  train_cmd->add_option("--config", train.config, "key=value config file");
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  CLI::Option* mode_opt = train_cmd->add_option(
      "--mode", train.cfg.mode, "full|baseline|baseline+M|baseline+T");
  CLI::Option* shuffle_opt = train_cmd->add_flag(
      "--shuffle-frames", "Destroy temporal order inside each tracklet");
  CLI::Option* seed_opt =
      train_cmd->add_option("--seed", train.cfg.seed, "Training seed");
  CLI::Option* epochs_opt =
      train_cmd->add_option("--epochs", train.cfg.epochs, "Epoch count");
  CLI::Option* threads_opt = train_cmd->add_option(
      "--threads", train.cfg.threads, "Worker threads (1 = deterministic)");
  train_cmd->add_option("--resume", train.resume,
                        "Checkpoint to continue from");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--data", eval.data, "Corpus directory")->required();
  eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--direction", eval.direction, "both|i2v|v2i");
  eval_cmd->add_option("--out", eval.out, "Metrics CSV path");
  eval_cmd->add_flag("--probe", eval.probe,
                     "Also train a linear modality probe on the features");

  GradcheckArgs grad;
  CLI::App* grad_cmd =
      app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad_cmd->add_option("--module", grad.module, "all|tmr|lstm|conv|losses");
  grad_cmd->add_option("--seeds", grad.seeds, "Seeds per case")
      ->check(CLI::PositiveNumber);

  AblateArgs ablate;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Run an ablation sweep");
  ablate_cmd->add_option("--sweep", ablate.sweep,
                         "lambda|pooling|adv-mode|n-frames")
      ->required();
  ablate_cmd->add_option("--data", ablate.data, "Corpus directory")
      ->required();
  ablate_cmd->add_option("--out", ablate.out, "Output directory")->required();
  ablate_cmd->add_option("--epochs", ablate.epochs, "Epochs per run");
  ablate_cmd->add_option("--seed", ablate.seed, "Training seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) {
      // Config file first, then explicit flags on top.
      mitml::TrainConfig cfg;
      if (!train.config.empty()) cfg = mitml::load_train_config(train.config);
      if (*mode_opt) cfg.mode = train.cfg.mode;
      if (*seed_opt) cfg.seed = train.cfg.seed;
      if (*epochs_opt) cfg.epochs = train.cfg.epochs;
      if (*threads_opt) cfg.threads = train.cfg.threads;
      if (*shuffle_opt) cfg.shuffle_frames = true;
      train.cfg = cfg;
      return run_train(train);
    }
    if (*eval_cmd) return run_eval(eval);
    if (*grad_cmd) return run_gradcheck(grad);
    if (*ablate_cmd) return run_ablate(ablate);
    std::cerr << "no command selected\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
