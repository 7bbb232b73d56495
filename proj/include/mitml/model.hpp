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

#ifndef MITML_MODEL_HPP
#define MITML_MODEL_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mitml/io.hpp"
#include "mitml/nn.hpp"
#include "mitml/ops.hpp"
#include "mitml/rng.hpp"
#include "mitml/tensor.hpp"

// The two-stream encoder: five stride-2 conv stages where stage 1 is
// modality-specific (stem_rgb / stem_ir), stages 2-4 are shared, and stage 5
// exists twice (branch_f1 feeds attention, branch_f2 feeds aggregation).
// Each frame map is globally average-pooled into a D-vector. There is no
// batch normalization, so the forward pass is batch-independent.

namespace mitml {

enum class ModalClass : int { kRgb = 0, kIr = 1, kNeither = 2 };

inline const char* modality_name(ModalClass m) {
  switch (m) {
    case ModalClass::kRgb: return "rgb";
    case ModalClass::kIr: return "ir";
    case ModalClass::kNeither: return "neither";
  }
  return "?";
}

struct BackboneConfig {
  std::vector<int> stage_channels{8, 16, 32, 64, 64};
  int in_channels = 3;
  int height = 32;
  int width = 16;
  int embed_dim = 64;
  int seq_len = 6;
  int se_reduction = 4;

  void validate() const {
    MITML_CHECK(stage_channels.size() == 5, "backbone: exactly 5 stages, got ",
                stage_channels.size());
    for (int c : stage_channels)
      MITML_CHECK(c >= 1, "backbone: non-positive stage width ", c);
    MITML_CHECK(embed_dim == stage_channels.back(),
                "backbone: embed_dim ", embed_dim,
                " must equal last stage width ", stage_channels.back());
    MITML_CHECK(in_channels >= 1 && height >= 1 && width >= 1,
                "backbone: bad input shape");
    MITML_CHECK(seq_len >= 1, "backbone: seq_len must be positive");
    MITML_CHECK(se_reduction >= 1 && embed_dim % se_reduction == 0,
                "backbone: se_reduction ", se_reduction, " must divide D=",
                embed_dim);
  }
};

struct ModelParams {
  BackboneConfig cfg;
  int num_classes = 0;  // identity classes for w_id
  int wm_classes = 3;   // 3 for the three-class game, 2 for the alternatives
  ConvLayer stem_rgb, stem_ir;
  std::vector<ConvLayer> trunk;  // stages 2-4
  ConvLayer branch_f1, branch_f2;
  TmrParams tmr;
  AffineParams w_id, w_m;
};

inline ModelParams init_model(const BackboneConfig& cfg, int num_classes,
                              int wm_classes, std::uint64_t seed) {
  cfg.validate();
  MITML_CHECK(num_classes >= 2, "model: need at least 2 identity classes");
  MITML_CHECK(wm_classes == 2 || wm_classes == 3,
              "model: modality head must have 2 or 3 classes, got ",
              wm_classes);
  Rng rng(seed);
  ModelParams m;
  m.cfg = cfg;
  m.num_classes = num_classes;
  m.wm_classes = wm_classes;
  const auto& ch = cfg.stage_channels;
  m.stem_rgb = init_conv(rng, ch[0], cfg.in_channels, 3, 3);
  m.stem_ir = init_conv(rng, ch[0], cfg.in_channels, 3, 3);
  for (int s = 1; s <= 3; ++s)
    m.trunk.push_back(init_conv(rng, ch[s], ch[s - 1], 3, 3));
  m.branch_f1 = init_conv(rng, ch[4], ch[3], 3, 3);
  m.branch_f2 = init_conv(rng, ch[4], ch[3], 3, 3);
  m.tmr = init_tmr(rng, cfg.seq_len, cfg.embed_dim, cfg.se_reduction);
  // Both linear heads start at zero. A zero w_m makes the encoder-side
  // adversarial gradient vanish until the discriminator has learned
  // something, which lets identity structure form before the two-player
  // game applies pressure; without this the game collapses the encoder
  // from the very first steps at this scale.
  m.w_id.w = Tensor::zeros({cfg.embed_dim, num_classes}, true);
  m.w_id.b = Tensor::zeros({num_classes}, true);
  m.w_m.w = Tensor::zeros({cfg.embed_dim, wm_classes}, true);
  m.w_m.b = Tensor::zeros({wm_classes}, true);
  return m;
}

// ---------------------------------------------------------------------------
// Parameter registry
// ---------------------------------------------------------------------------

enum class LrClass { kStem, kMain, kWm };

struct ParamEntry {
  std::string name;
  Tensor tensor;  // aliases the model's storage
  LrClass lr;
};

/// Every learnable tensor with its dotted name, in a fixed order. The order
/// defines checkpoint layout and optimizer state indexing.
inline std::vector<ParamEntry> collect_params(const ModelParams& m) {
  std::vector<ParamEntry> out;
  const auto put = [&out](const std::string& name, const Tensor& t,
                          LrClass lr) { out.push_back({name, t, lr}); };
  const auto put_conv = [&](const std::string& p, const ConvLayer& c,
                            LrClass lr) {
    put(p + ".w", c.w, lr);
    put(p + ".b", c.b, lr);
  };
  const auto put_affine = [&](const std::string& p, const AffineParams& a,
                              LrClass lr) {
    put(p + ".w", a.w, lr);
    put(p + ".b", a.b, lr);
  };
  const auto put_gate = [&](const std::string& p, const LstmGate& g) {
    put(p + ".wx", g.wx, LrClass::kMain);
    put(p + ".wh", g.wh, LrClass::kMain);
    put(p + ".b", g.b, LrClass::kMain);
  };
  const auto put_lstm_layer = [&](const std::string& p, const LstmLayer& l) {
    put_gate(p + ".gi", l.gi);
    put_gate(p + ".gf", l.gf);
    put_gate(p + ".gg", l.gg);
    put_gate(p + ".go", l.go);
  };

  put_conv("stem_rgb", m.stem_rgb, LrClass::kStem);
  put_conv("stem_ir", m.stem_ir, LrClass::kStem);
  for (std::size_t i = 0; i < m.trunk.size(); ++i)
    put_conv("trunk." + std::to_string(i), m.trunk[i], LrClass::kMain);
  put_conv("branch_f1", m.branch_f1, LrClass::kMain);
  put_conv("branch_f2", m.branch_f2, LrClass::kMain);
  put_lstm_layer("tmr.lstm.0", m.tmr.lstm.l0);
  put_lstm_layer("tmr.lstm.1", m.tmr.lstm.l1);
  for (std::size_t t = 0; t < m.tmr.fc.size(); ++t)
    put_affine("tmr.fc." + std::to_string(t), m.tmr.fc[t], LrClass::kMain);
  for (std::size_t t = 0; t < m.tmr.se.size(); ++t) {
    const std::string p = "tmr.se." + std::to_string(t);
    put(p + ".w1", m.tmr.se[t].w1, LrClass::kMain);
    put(p + ".b1", m.tmr.se[t].b1, LrClass::kMain);
    put(p + ".w2", m.tmr.se[t].w2, LrClass::kMain);
    put(p + ".b2", m.tmr.se[t].b2, LrClass::kMain);
  }
  put_affine("w_id", m.w_id, LrClass::kMain);
  put_affine("w_m", m.w_m, LrClass::kWm);
  return out;
}

inline std::vector<ParamEntry> encoder_params(const ModelParams& m) {
  std::vector<ParamEntry> out;
  for (auto& e : collect_params(m))
    if (e.lr != LrClass::kWm) out.push_back(std::move(e));
  return out;
}

inline std::vector<ParamEntry> discriminator_params(const ModelParams& m) {
  std::vector<ParamEntry> out;
  for (auto& e : collect_params(m))
    if (e.lr == LrClass::kWm) out.push_back(std::move(e));
  return out;
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

namespace detail {

/// Stride-2 3x3 stage. Spatial dims are one-side zero-padded up to the
/// smallest odd extent >= 3 so the strided conv lands exactly on
/// max(floor(d/2), 1); odd inputs >= 3 need no padding at all.
inline Tensor conv_stage(const Tensor& x, const ConvLayer& layer) {
  const auto pad_for = [](int d, int& lo, int& hi) {
    const int target = d >= 2 ? d / 2 : 1;
    const int wanted = 2 * target + 1;
    const int total = wanted - d;
    lo = total / 2;
    hi = total - lo;
  };
  int top, bottom, left, right;
  pad_for(x.dim(2), top, bottom);
  pad_for(x.dim(3), left, right);
  Tensor y = x;
  if (top || bottom || left || right) y = pad2d(y, top, bottom, left, right);
  return relu(conv2d(y, layer.w, layer.b, 2, 0));
}

}  // namespace detail

/// Frame-level features of one tracklet: frames [T x C x H x W] through the
/// modality stem, the shared trunk (run once) and both stage-5 branches.
/// Returns (f1, f2), each [T x D].
inline std::pair<Tensor, Tensor> backbone_forward(const Tensor& frames,
                                                  ModalClass modality,
                                                  const ModelParams& m) {
  MITML_CHECK(modality != ModalClass::kNeither,
              "backbone_forward: modality must be rgb or ir");
  MITML_CHECK(frames.rank() == 4, "backbone_forward: frames must be TxCxHxW, ",
              "got ", shape_str(frames.shape()));
  MITML_CHECK(frames.dim(1) == m.cfg.in_channels,
              "backbone_forward: expected ", m.cfg.in_channels,
              " channels, got ", frames.dim(1));
  const ConvLayer& stem =
      modality == ModalClass::kRgb ? m.stem_rgb : m.stem_ir;
  Tensor x = detail::conv_stage(frames, stem);
  for (const auto& stage : m.trunk) x = detail::conv_stage(x, stage);
  const Tensor f1 = global_avg_pool(detail::conv_stage(x, m.branch_f1));
  const Tensor f2 = global_avg_pool(detail::conv_stage(x, m.branch_f2));
  return {f1, f2};
}

/// Affine classifier head over a sequence feature; logits, not probabilities.
inline Tensor classify(const Tensor& feature, const AffineParams& head) {
  MITML_CHECK(feature.rank() == 1 && feature.dim(0) == head.w.dim(0),
              "classify: feature ", shape_str(feature.shape()),
              " does not match head input ", head.w.dim(0));
  return affine(feature, head);
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

inline constexpr const char* kMetaPrefix = "meta.";
inline constexpr const char* kOptPrefix = "opt.";

inline void add_meta(Checkpoint& ck, const std::string& key, double value) {
  ck.add(std::string(kMetaPrefix) + key, Tensor::scalar(value));
}

inline void add_meta(Checkpoint& ck, const std::string& key,
                     const std::vector<double>& values) {
  ck.add(std::string(kMetaPrefix) + key,
         Tensor::from_data({static_cast<int>(values.size())},
                           std::vector<double>(values)));
}

/// Model weights plus self-describing meta entries. Optimizer state, when
/// present, is appended by the training loop under "opt." names.
inline Checkpoint model_to_checkpoint(const ModelParams& m) {
  Checkpoint ck;
  add_meta(ck, "format_version", 1.0);
  add_meta(ck, "num_classes", static_cast<double>(m.num_classes));
  add_meta(ck, "wm_classes", static_cast<double>(m.wm_classes));
  add_meta(ck, "in_channels", static_cast<double>(m.cfg.in_channels));
  add_meta(ck, "height", static_cast<double>(m.cfg.height));
  add_meta(ck, "width", static_cast<double>(m.cfg.width));
  add_meta(ck, "embed_dim", static_cast<double>(m.cfg.embed_dim));
  add_meta(ck, "seq_len", static_cast<double>(m.cfg.seq_len));
  add_meta(ck, "se_reduction", static_cast<double>(m.cfg.se_reduction));
  {
    std::vector<double> ch;
    for (int c : m.cfg.stage_channels) ch.push_back(static_cast<double>(c));
    add_meta(ck, "stage_channels", ch);
  }
  for (const auto& e : collect_params(m)) ck.add(e.name, e.tensor.detach());
  return ck;
}

inline ModelParams model_from_checkpoint(const Checkpoint& ck) {
  const auto meta = [&ck](const std::string& key) {
    return ck.at(std::string(kMetaPrefix) + key).item();
  };
  BackboneConfig cfg;
  cfg.in_channels = static_cast<int>(meta("in_channels"));
  cfg.height = static_cast<int>(meta("height"));
  cfg.width = static_cast<int>(meta("width"));
  cfg.embed_dim = static_cast<int>(meta("embed_dim"));
  cfg.seq_len = static_cast<int>(meta("seq_len"));
  cfg.se_reduction = static_cast<int>(meta("se_reduction"));
  {
    const Tensor& ch = ck.at(std::string(kMetaPrefix) + "stage_channels");
    cfg.stage_channels.clear();
    for (double v : ch.data()) cfg.stage_channels.push_back(static_cast<int>(v));
  }
  ModelParams m = init_model(cfg, static_cast<int>(meta("num_classes")),
                             static_cast<int>(meta("wm_classes")),
                             /*seed=*/0);
  for (auto& e : collect_params(m)) {
    const Tensor& stored = ck.at(e.name);
    MITML_CHECK(stored.shape() == e.tensor.shape(),
                "checkpoint: parameter '", e.name, "' has shape ",
                shape_str(stored.shape()), ", model expects ",
                shape_str(e.tensor.shape()));
    e.tensor.mutable_data() = stored.data();
  }
  return m;
}

}  // namespace mitml

#endif  // MITML_MODEL_HPP
