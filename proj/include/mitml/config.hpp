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

#ifndef MITML_CONFIG_HPP
#define MITML_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mitml/losses.hpp"
#include "mitml/synthdata.hpp"
#include "mitml/tensor.hpp"
#include "mitml/tmr.hpp"

// Training configuration: defaults, a flat key=value file format (unknown
// keys rejected) and the learning-rate schedule.

namespace mitml {

enum class TrainMode { kFull, kBaseline, kBaselineM, kBaselineT };

inline TrainMode train_mode_from_string(const std::string& s) {
  if (s == "full") return TrainMode::kFull;
  if (s == "baseline") return TrainMode::kBaseline;
  if (s == "baseline+M") return TrainMode::kBaselineM;
  if (s == "baseline+T") return TrainMode::kBaselineT;
  MITML_CHECK(false, "unknown train mode '", s, "'");
  return TrainMode::kFull;
}

inline const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kFull: return "full";
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kBaselineM: return "baseline+M";
    case TrainMode::kBaselineT: return "baseline+T";
  }
  return "?";
}

/// TMR replaces pooling in the full and baseline+T rows.
inline bool mode_uses_tmr(TrainMode m) {
  return m == TrainMode::kFull || m == TrainMode::kBaselineT;
}

/// The adversarial game runs in the full and baseline+M rows.
inline bool mode_uses_adv(TrainMode m) {
  return m == TrainMode::kFull || m == TrainMode::kBaselineM;
}

struct TrainConfig {
  int epochs = 200;
  int batch_p = 8;              // identities per batch
  int batch_k = 2;              // tracklets per identity (half RGB, half IR)
  int frames_per_tracklet = 6;  // n, must divide 24
  double base_lr = 0.1;
  double wm_lr = 0.01;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  int warmup_epochs = 10;
  std::vector<std::pair<int, double>> lr_drops{{35, 0.01}, {80, 0.001}};
  double stem_lr_factor = 0.1;
  std::uint64_t seed = 1;

  double lambda = 0.4;
  double triplet_margin = 0.3;
  std::string adv_mode = "three_class";
  std::string mode = "full";
  std::string pooling = "average";
  bool augment = true;
  bool shuffle_frames = false;  // destroy temporal order during training
  int checkpoint_every = 10;    // epochs; 0 disables periodic checkpoints
  int threads = 1;

  void validate() const {
    MITML_CHECK(epochs >= 0, "config: epochs must be >= 0");
    MITML_CHECK(batch_p >= 2, "config: batch_p must be >= 2");
    MITML_CHECK(batch_k >= 2 && batch_k % 2 == 0,
                "config: batch_k must be even and >= 2");
    MITML_CHECK(frames_per_tracklet >= 1 &&
                    kTrackletLen % frames_per_tracklet == 0,
                "config: frames_per_tracklet must divide ", kTrackletLen,
                ", got ", frames_per_tracklet);
    MITML_CHECK(base_lr > 0 && wm_lr > 0, "config: learning rates positive");
    MITML_CHECK(weight_decay >= 0 && momentum >= 0 && momentum < 1,
                "config: bad optimizer constants");
    MITML_CHECK(warmup_epochs >= 1, "config: warmup_epochs must be >= 1");
    for (std::size_t i = 0; i < lr_drops.size(); ++i) {
      MITML_CHECK(lr_drops[i].second > 0, "config: lr drop value positive");
      MITML_CHECK(i == 0 || lr_drops[i].first > lr_drops[i - 1].first,
                  "config: lr_drops epochs must increase");
    }
    MITML_CHECK(stem_lr_factor > 0, "config: stem_lr_factor positive");
    MITML_CHECK(checkpoint_every >= 0, "config: checkpoint_every >= 0");
    MITML_CHECK(threads >= 1, "config: threads must be >= 1");
    train_mode_from_string(mode);
    adv_mode_from_string(adv_mode);
    pooling_from_string(pooling);
    LossConfig lc;
    lc.lambda = lambda;
    lc.triplet_margin = triplet_margin;
    lc.validate();
  }

  LossConfig loss_config() const {
    LossConfig lc;
    lc.lambda = lambda;
    lc.triplet_margin = triplet_margin;
    lc.adversarial_mode = adv_mode_from_string(adv_mode);
    return lc;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

inline std::vector<std::pair<int, double>> parse_lr_drops(
    const std::string& v) {
  // "35:0.01,80:0.001"
  std::vector<std::pair<int, double>> drops;
  if (trim(v).empty()) return drops;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    MITML_CHECK(colon != std::string::npos,
                "config: lr_drops entry '", item, "' wants epoch:lr");
    drops.emplace_back(std::stoi(trim(item.substr(0, colon))),
                       std::stod(trim(item.substr(colon + 1))));
  }
  return drops;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  MITML_CHECK(false, "config: key '", key, "' wants a boolean, got '", v, "'");
  return false;
}

}  // namespace detail

/// Applies one key=value assignment; unknown keys are rejected.
inline void apply_config_entry(TrainConfig& cfg, const std::string& key,
                               const std::string& value) {
  if (key == "epochs") cfg.epochs = std::stoi(value);
  else if (key == "batch_p") cfg.batch_p = std::stoi(value);
  else if (key == "batch_k") cfg.batch_k = std::stoi(value);
  else if (key == "frames_per_tracklet") cfg.frames_per_tracklet = std::stoi(value);
  else if (key == "base_lr") cfg.base_lr = std::stod(value);
  else if (key == "wm_lr") cfg.wm_lr = std::stod(value);
  else if (key == "weight_decay") cfg.weight_decay = std::stod(value);
  else if (key == "momentum") cfg.momentum = std::stod(value);
  else if (key == "warmup_epochs") cfg.warmup_epochs = std::stoi(value);
  else if (key == "lr_drops") cfg.lr_drops = detail::parse_lr_drops(value);
  else if (key == "stem_lr_factor") cfg.stem_lr_factor = std::stod(value);
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "lambda") cfg.lambda = std::stod(value);
  else if (key == "triplet_margin") cfg.triplet_margin = std::stod(value);
  else if (key == "adv_mode") cfg.adv_mode = value;
  else if (key == "mode") cfg.mode = value;
  else if (key == "pooling") cfg.pooling = value;
  else if (key == "augment") cfg.augment = detail::parse_bool(key, value);
  else if (key == "shuffle_frames") cfg.shuffle_frames = detail::parse_bool(key, value);
  else if (key == "checkpoint_every") cfg.checkpoint_every = std::stoi(value);
  else if (key == "threads") cfg.threads = std::stoi(value);
  else MITML_CHECK(false, "config: unknown key '", key, "'");
}

/// Flat UTF-8 key=value lines; blank lines and lines starting with '#' are
/// skipped.
inline TrainConfig parse_train_config(std::istream& is,
                                      TrainConfig base = TrainConfig()) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    MITML_CHECK(eq != std::string::npos, "config: line ", lineno,
                " is not key=value: '", t, "'");
    apply_config_entry(base, detail::trim(t.substr(0, eq)),
                       detail::trim(t.substr(eq + 1)));
  }
  return base;
}

inline TrainConfig load_train_config(const std::string& path,
                                     TrainConfig base = TrainConfig()) {
  std::ifstream is(path);
  MITML_CHECK(is.good(), "config: cannot open ", path);
  return parse_train_config(is, std::move(base));
}

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

struct LrTriple {
  double main = 0.0, stem = 0.0, wm = 0.0;
};

/// Linear warmup from base/warmup_epochs up to base over epochs
/// 1..warmup_epochs, then piecewise-constant drops ("after epoch E" means
/// epochs > E). The stem rate is main * stem_lr_factor; wm_lr is constant.
inline LrTriple lr_at(int epoch, const TrainConfig& cfg) {
  MITML_CHECK(epoch >= 1 && epoch <= cfg.epochs, "lr_at: epoch ", epoch,
              " outside [1,", cfg.epochs, "]");
  double main = cfg.base_lr;
  if (epoch <= cfg.warmup_epochs)
    main = cfg.base_lr * epoch / cfg.warmup_epochs;
  for (const auto& [after, value] : cfg.lr_drops)
    if (epoch > after) main = value;
  LrTriple lr;
  lr.main = main;
  lr.stem = main * cfg.stem_lr_factor;
  lr.wm = cfg.wm_lr;
  return lr;
}

}  // namespace mitml

#endif  // MITML_CONFIG_HPP
