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

#ifndef MITML_TRAIN_HPP
#define MITML_TRAIN_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mitml/config.hpp"
#include "mitml/log.hpp"
#include "mitml/losses.hpp"
#include "mitml/model.hpp"
#include "mitml/optimizer.hpp"
#include "mitml/sampler.hpp"
#include "mitml/synthdata.hpp"
#include "mitml/tmr.hpp"

// The alternating optimization loop: each step trains the modality
// discriminator on detached features first, then the encoder against the
// updated discriminator.

namespace mitml {

struct StepLosses {
  double adv1 = 0.0, adv2 = 0.0, ce = 0.0, tri = 0.0, total = 0.0;
};

inline Tensor encode_for_mode(const Tensor& frames, ModalClass modality,
                              const ModelParams& model, TrainMode mode,
                              Pooling pooling) {
  if (mode_uses_tmr(mode)) return encode_tracklet(frames, modality, model);
  return encode_tracklet_baseline(frames, modality, model, pooling);
}

/// Samples frames for each tracklet in the batch and encodes them. All rng
/// draws happen in batch order so runs are reproducible.
inline std::vector<EncodedSample> encode_batch(
    const Corpus& corpus, const std::vector<int>& batch,
    const std::map<int, int>& class_of, const ModelParams& model,
    const TrainConfig& cfg, TrainMode mode, Pooling pooling, Rng& rng) {
  std::vector<EncodedSample> out;
  out.reserve(batch.size());
  for (int ri : batch) {
    const TrackletData& td = corpus.tracklets[static_cast<std::size_t>(ri)];
    std::vector<int> idx =
        chunk_frame_sampler(td.frame_count, cfg.frames_per_tracklet, rng);
    if (cfg.shuffle_frames) rng.shuffle(idx);
    const Tensor frames = augment(frames_tensor(td, idx), rng, cfg.augment);
    EncodedSample s;
    s.modality = td.modality == 0 ? ModalClass::kRgb : ModalClass::kIr;
    s.feature = encode_for_mode(frames, s.modality, model, mode, pooling);
    s.id_class = class_of.at(td.identity);
    out.push_back(std::move(s));
  }
  return out;
}

namespace detail {

inline void check_finite_or_dump(double value, const char* label,
                                 const ModelParams& model) {
  if (std::isfinite(value)) return;
  std::ostringstream os;
  os << "train: non-finite " << label << " (" << value
     << "); parameter l2 norms:";
  for (const auto& e : collect_params(model)) {
    double s = 0.0;
    for (double v : e.tensor.data()) s += v * v;
    os << "\n  " << e.name << " = " << std::sqrt(s);
  }
  throw std::runtime_error(os.str());
}

inline void zero_all_grads(const std::vector<ParamEntry>& params) {
  for (const auto& e : params) {
    Tensor t = e.tensor;  // shares storage
    t.zero_grad();
  }
}

}  // namespace detail

/// One optimization step on one P*K batch. Phase 1 updates the modality
/// discriminator w_m on detached features; phase 2 updates the encoder
/// groups and w_id against the updated discriminator. Modes without the
/// adversarial term skip phase 1 and report L_adv1 = L_adv2 = 0.
inline StepLosses train_step(const Corpus& corpus,
                             const std::vector<int>& batch,
                             const std::map<int, int>& class_of,
                             ModelParams& model, SgdOptimizer& opt,
                             const TrainConfig& cfg, const LrTriple& lr,
                             Rng& rng) {
  const TrainMode mode = train_mode_from_string(cfg.mode);
  const Pooling pooling = pooling_from_string(cfg.pooling);
  const LossConfig loss_cfg = cfg.loss_config();
  const std::vector<ParamEntry> all_params = collect_params(model);

  const std::vector<EncodedSample> encoded =
      encode_batch(corpus, batch, class_of, model, cfg, mode, pooling, rng);

  StepLosses out;
  const auto lr_of = [&lr](LrClass c) {
    switch (c) {
      case LrClass::kStem: return lr.stem;
      case LrClass::kMain: return lr.main;
      case LrClass::kWm: return lr.wm;
    }
    return lr.main;
  };

  if (mode_uses_adv(mode)) {
    // Phase 1: discriminator on frozen features.
    std::vector<Tensor> fv, fi;
    for (const auto& s : encoded)
      (s.modality == ModalClass::kRgb ? fv : fi).push_back(s.feature.detach());
    const Tensor adv2 = adv_discriminator_loss(fv, fi, model.w_m);
    out.adv2 = adv2.item();
    detail::check_finite_or_dump(out.adv2, "L_adv2", model);
    detail::zero_all_grads(all_params);
    adv2.backward();
    opt.step(discriminator_params(model), lr_of);
  }

  // Phase 2: encoder and w_id against the (possibly updated) discriminator.
  const LossTerms terms =
      id_objective(encoded, model, loss_cfg, mode_uses_adv(mode));
  out.adv1 = terms.adv1.item();
  out.ce = terms.ce.item();
  out.tri = terms.tri.item();
  out.total = terms.total.item();
  detail::check_finite_or_dump(out.total, "L_total", model);
  detail::zero_all_grads(all_params);
  terms.total.backward();
  opt.step(encoder_params(model), lr_of);
  return out;
}

// ---------------------------------------------------------------------------
// Training driver
// ---------------------------------------------------------------------------

inline constexpr const char* kLossCsvHeader =
    "epoch,step,L_adv1,L_adv2,L_ce,L_tri,L_total";

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string checkpoint_name(int epoch, bool final) {
  if (final) return "model_final.mckp";
  char buf[40];
  std::snprintf(buf, sizeof buf, "model_epoch%04d.mckp", epoch);
  return buf;
}

}  // namespace detail

/// Dense class index per training identity, in sorted identity order.
inline std::map<int, int> identity_classes(
    const std::vector<ManifestRecord>& records,
    const std::vector<int>& record_indices) {
  std::set<int> ids;
  for (int ri : record_indices)
    ids.insert(records[static_cast<std::size_t>(ri)].identity);
  std::map<int, int> class_of;
  int next = 0;
  for (int id : ids) class_of[id] = next++;
  return class_of;
}

struct TrainOutputs {
  ModelParams model;
  std::string final_checkpoint;
  std::vector<double> epoch_mean_total;  // mean L_total per trained epoch
};

namespace detail {

inline void save_training_checkpoint(const ModelParams& model,
                                     const SgdOptimizer& opt,
                                     const TrainConfig& cfg, int epochs_done,
                                     const std::string& path) {
  Checkpoint ck = model_to_checkpoint(model);
  add_meta(ck, "trained_epochs", epochs_done);
  add_meta(ck, "use_tmr",
           mode_uses_tmr(train_mode_from_string(cfg.mode)) ? 1.0 : 0.0);
  add_meta(ck, "pooling",
           static_cast<double>(static_cast<int>(pooling_from_string(cfg.pooling))));
  add_meta(ck, "adv_mode",
           static_cast<double>(static_cast<int>(adv_mode_from_string(cfg.adv_mode))));
  opt.save_state(ck);
  ck.save(path);
}

}  // namespace detail

/// Runs the alternating training loop over the train split of `corpus`,
/// logging per-step losses to out_dir/loss.csv and writing periodic plus
/// final checkpoints. `resume` names a checkpoint written by this function;
/// training continues after its recorded epoch with identical results to an
/// uninterrupted run.
inline TrainOutputs train(const Corpus& corpus, const std::string& out_dir,
                          const TrainConfig& cfg,
                          const std::string& resume = "") {
  namespace fs = std::filesystem;
  cfg.validate();
  const std::vector<int> train_idx = split_indices(corpus.records, "train");
  const std::map<int, int> class_of =
      identity_classes(corpus.records, train_idx);

  BackboneConfig bc;
  bc.height = corpus.height;
  bc.width = corpus.width;
  bc.seq_len = cfg.frames_per_tracklet;
  const int wm_classes = wm_classes_for(adv_mode_from_string(cfg.adv_mode));

  ModelParams model;
  SgdOptimizer opt(cfg.momentum, cfg.weight_decay);
  int start_epoch = 0;
  if (!resume.empty()) {
    const Checkpoint ck = Checkpoint::load(resume);
    model = model_from_checkpoint(ck);
    MITML_CHECK(model.num_classes == static_cast<int>(class_of.size()),
                "resume: checkpoint has ", model.num_classes,
                " identity classes, corpus has ", class_of.size());
    MITML_CHECK(model.cfg.seq_len == cfg.frames_per_tracklet,
                "resume: checkpoint sequence length ", model.cfg.seq_len,
                " differs from frames_per_tracklet ", cfg.frames_per_tracklet);
    opt.load_state(ck, collect_params(model));
    start_epoch =
        static_cast<int>(ck.at(std::string(kMetaPrefix) + "trained_epochs").item());
    MITML_CHECK(start_epoch >= 0 && start_epoch <= cfg.epochs,
                "resume: recorded epoch ", start_epoch, " outside [0,",
                cfg.epochs, "]");
  } else {
    model = init_model(bc, static_cast<int>(class_of.size()), wm_classes,
                       cfg.seed);
  }

  fs::create_directories(out_dir);
  const std::string csv_path = (fs::path(out_dir) / "loss.csv").string();
  std::ofstream csv(csv_path, start_epoch > 0 ? std::ios::app : std::ios::trunc);
  MITML_CHECK(csv.good(), "train: cannot open ", csv_path);
  if (start_epoch == 0) csv << kLossCsvHeader << "\n";

  PkBatchSampler probe_sampler(corpus.records, train_idx, cfg.batch_p,
                               cfg.batch_k);
  const int tracklets_per_side = cfg.batch_p * cfg.batch_k / 2;
  const int steps_per_epoch =
      std::min(probe_sampler.rgb_pool_size(), probe_sampler.ir_pool_size()) /
      tracklets_per_side;
  MITML_CHECK(steps_per_epoch >= 1,
              "train: corpus too small for one batch per epoch");

  TrainOutputs out;
  out.model = model;
  for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
    const LrTriple lr = lr_at(epoch, cfg);
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), 101));
    PkBatchSampler sampler(corpus.records, train_idx, cfg.batch_p,
                           cfg.batch_k);
    double total_sum = 0.0;
    for (int step = 1; step <= steps_per_epoch; ++step) {
      const std::vector<int> batch = sampler.next_batch(rng);
      const StepLosses losses =
          train_step(corpus, batch, class_of, model, opt, cfg, lr, rng);
      total_sum += losses.total;
      csv << epoch << ',' << step << ',' << detail::fmt17(losses.adv1) << ','
          << detail::fmt17(losses.adv2) << ',' << detail::fmt17(losses.ce)
          << ',' << detail::fmt17(losses.tri) << ','
          << detail::fmt17(losses.total) << "\n";
      MITML_CHECK(csv.good(), "train: write to ", csv_path, " failed");
    }
    csv.flush();
    out.epoch_mean_total.push_back(total_sum / steps_per_epoch);
    MITML_LOG(kInfo, "epoch " << epoch << "/" << cfg.epochs << " mean L_total "
                              << total_sum / steps_per_epoch << " lr "
                              << lr.main);
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 &&
        epoch != cfg.epochs) {
      const std::string path =
          (fs::path(out_dir) / detail::checkpoint_name(epoch, false)).string();
      detail::save_training_checkpoint(model, opt, cfg, epoch, path);
      MITML_LOG(kDebug, "wrote " << path);
    }
  }

  out.final_checkpoint =
      (fs::path(out_dir) / detail::checkpoint_name(cfg.epochs, true)).string();
  detail::save_training_checkpoint(model, opt, cfg, cfg.epochs,
                                   out.final_checkpoint);
  return out;
}

}  // namespace mitml

#endif  // MITML_TRAIN_HPP
