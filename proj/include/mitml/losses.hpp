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

#ifndef MITML_LOSSES_HPP
#define MITML_LOSSES_HPP

#include <cmath>
#include <string>
#include <vector>

#include "mitml/model.hpp"
#include "mitml/ops.hpp"
#include "mitml/tensor.hpp"
#include "mitml/tmr.hpp"

// Training objectives. The encoder objective is
//
//   L = lambda * L_adv1 + L_ce + L_tri
//
// where L_adv1 drives the modality head toward confusion, L_ce is identity
// cross-entropy and L_tri is a batch-hard triplet loss on L2-normalized
// sequence features. The discriminator objective L_adv2 trains the modality
// head on detached features with true modality labels; the two are optimized
// in alternation.

namespace mitml {

enum class AdvMode { kThreeClass, kInverseLabel, kUniformTarget };

inline AdvMode adv_mode_from_string(const std::string& s) {
  if (s == "three_class") return AdvMode::kThreeClass;
  if (s == "inverse_label") return AdvMode::kInverseLabel;
  if (s == "uniform_target") return AdvMode::kUniformTarget;
  MITML_CHECK(false, "unknown adversarial mode '", s, "'");
  return AdvMode::kThreeClass;
}

inline const char* adv_mode_name(AdvMode m) {
  switch (m) {
    case AdvMode::kThreeClass: return "three_class";
    case AdvMode::kInverseLabel: return "inverse_label";
    case AdvMode::kUniformTarget: return "uniform_target";
  }
  return "?";
}

/// The three-class game needs the NEITHER logit; both alternative strategies
/// work on a plain two-way modality head.
inline int wm_classes_for(AdvMode m) {
  return m == AdvMode::kThreeClass ? 3 : 2;
}

struct LossConfig {
  double lambda = 0.4;
  double triplet_margin = 0.3;
  AdvMode adversarial_mode = AdvMode::kThreeClass;

  void validate() const {
    MITML_CHECK(std::isfinite(lambda) && lambda >= 0.0,
                "loss config: lambda must be finite and >= 0, got ", lambda);
    MITML_CHECK(std::isfinite(triplet_margin) && triplet_margin >= 0.0,
                "loss config: margin must be finite and >= 0, got ",
                triplet_margin);
  }
};

// ---------------------------------------------------------------------------
// Cross-entropy
// ---------------------------------------------------------------------------

inline Tensor cross_entropy(const Tensor& logits, int target) {
  MITML_CHECK(logits.rank() == 1 && logits.dim(0) >= 2,
              "cross_entropy: logits must be [K], K >= 2, got ",
              shape_str(logits.shape()));
  MITML_CHECK(target >= 0 && target < logits.dim(0),
              "cross_entropy: target ", target, " outside [0,", logits.dim(0),
              ")");
  return scale(element(log_softmax(logits, 0), target), -1.0);
}

inline Tensor cross_entropy(const Tensor& logits, const Tensor& target_dist) {
  MITML_CHECK(logits.rank() == 1 && logits.dim(0) >= 2,
              "cross_entropy: logits must be [K], K >= 2, got ",
              shape_str(logits.shape()));
  check_same_shape("cross_entropy", logits, target_dist);
  return scale(sum_all(mul(log_softmax(logits, 0), target_dist)), -1.0);
}

// ---------------------------------------------------------------------------
// Batch-hard triplet
// ---------------------------------------------------------------------------

/// Euclidean distance between two feature vectors as a differentiable scalar.
inline Tensor feature_distance(const Tensor& a, const Tensor& b) {
  const Tensor d = sub(a, b);
  return mitml::sqrt(sum_all(mul(d, d)));
}

/// Batch-hard: per anchor, the largest same-identity distance minus the
/// smallest other-identity distance, hinged at margin, averaged over the
/// anchors that have at least one positive. Distances are taken on the
/// features exactly as given. Hard pairs are selected by value (first index
/// wins ties); gradients flow through the selected pairs only.
inline Tensor triplet_loss(const std::vector<Tensor>& features,
                           const std::vector<int>& ids, double margin) {
  const std::size_t n = features.size();
  MITML_CHECK(n == ids.size(), "triplet_loss: ", n, " features vs ",
              ids.size(), " ids");
  MITML_CHECK(n >= 2, "triplet_loss: batch of ", n, " is too small");
  bool two_ids = false;
  for (std::size_t i = 1; i < n; ++i) two_ids = two_ids || ids[i] != ids[0];
  MITML_CHECK(two_ids, "triplet_loss: batch has a single identity, ",
              "no negatives exist");

  // Plain-value distances for hard-pair selection; identical summation order
  // to feature_distance so the selected values match the graph bitwise.
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = features[i].data();
      const auto& b = features[j].data();
      double sq = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        sq += d * d;
      }
      dist[i][j] = dist[j][i] = std::sqrt(sq);
    }

  Tensor total;
  int anchors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    int hard_pos = -1, hard_neg = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (ids[j] == ids[i]) {
        if (hard_pos < 0 ||
            dist[i][j] > dist[i][static_cast<std::size_t>(hard_pos)])
          hard_pos = static_cast<int>(j);
      } else {
        if (hard_neg < 0 ||
            dist[i][j] < dist[i][static_cast<std::size_t>(hard_neg)])
          hard_neg = static_cast<int>(j);
      }
    }
    if (hard_pos < 0) continue;  // no positive for this anchor
    const Tensor dp =
        feature_distance(features[i], features[static_cast<std::size_t>(hard_pos)]);
    const Tensor dn =
        feature_distance(features[i], features[static_cast<std::size_t>(hard_neg)]);
    const Tensor term = relu(add_const(sub(dp, dn), margin));
    total = anchors == 0 ? term : add(total, term);
    ++anchors;
  }
  MITML_CHECK(anchors > 0,
              "triplet_loss: no anchor has a positive (all identities unique)");
  return scale(total, 1.0 / anchors);
}

// ---------------------------------------------------------------------------
// Adversarial terms
// ---------------------------------------------------------------------------

namespace detail {

// The modality head sees directions only. Without the normalization the
// encoder can satisfy the game by shrinking feature norms toward zero (the
// "neither" column tracks the negative mean feature), which kills training;
// retrieval is cosine-based, so directions carry all the signal anyway.
inline Tensor batch_ce_index(const std::vector<Tensor>& feats,
                             const AffineParams& head, int target) {
  Tensor total;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const Tensor ce =
        cross_entropy(classify(l2_normalize(feats[i], 0), head), target);
    total = i == 0 ? ce : add(total, ce);
  }
  return scale(total, 1.0 / static_cast<double>(feats.size()));
}

inline Tensor batch_ce_dist(const std::vector<Tensor>& feats,
                            const AffineParams& head, const Tensor& dist) {
  Tensor total;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const Tensor ce =
        cross_entropy(classify(l2_normalize(feats[i], 0), head), dist);
    total = i == 0 ? ce : add(total, ce);
  }
  return scale(total, 1.0 / static_cast<double>(feats.size()));
}

}  // namespace detail

/// Encoder-side adversarial loss over RGB and IR feature batches. Gradients
/// flow through the modality head into the features; the head itself is not
/// updated by this loss (the optimizer steps encoder groups only).
///   three_class    CE(w_m(Fv), NEITHER) + CE(w_m(Fi), NEITHER)
///   inverse_label  CE(w_m(Fv), IR) + CE(w_m(Fi), RGB)
///   uniform_target CE of both batches against the uniform 2-class target
inline Tensor adv_encoder_loss(const std::vector<Tensor>& fv,
                               const std::vector<Tensor>& fi,
                               const AffineParams& w_m, AdvMode mode) {
  MITML_CHECK(!fv.empty() && !fi.empty(),
              "adv_encoder_loss: empty feature batch");
  const int classes = w_m.w.dim(1);
  MITML_CHECK(classes == wm_classes_for(mode), "adv_encoder_loss: mode ",
              adv_mode_name(mode), " needs a ", wm_classes_for(mode),
              "-way head, got ", classes);
  switch (mode) {
    case AdvMode::kThreeClass: {
      const int neither = static_cast<int>(ModalClass::kNeither);
      return add(detail::batch_ce_index(fv, w_m, neither),
                 detail::batch_ce_index(fi, w_m, neither));
    }
    case AdvMode::kInverseLabel:
      return add(detail::batch_ce_index(fv, w_m,
                                        static_cast<int>(ModalClass::kIr)),
                 detail::batch_ce_index(fi, w_m,
                                        static_cast<int>(ModalClass::kRgb)));
    case AdvMode::kUniformTarget: {
      const Tensor uniform = Tensor::full({2}, 0.5);
      return add(detail::batch_ce_dist(fv, w_m, uniform),
                 detail::batch_ce_dist(fi, w_m, uniform));
    }
  }
  MITML_CHECK(false, "adv_encoder_loss: bad mode");
  return Tensor();
}

/// Discriminator loss: true modality labels on detached features, so only
/// the w_m head can receive gradients. Passing graph-connected features is a
/// contract violation and is rejected.
inline Tensor adv_discriminator_loss(const std::vector<Tensor>& fv,
                                     const std::vector<Tensor>& fi,
                                     const AffineParams& w_m) {
  MITML_CHECK(!fv.empty() && !fi.empty(),
              "adv_discriminator_loss: empty feature batch");
  for (const auto& batch : {&fv, &fi})
    for (const auto& f : *batch)
      MITML_CHECK(!f.tracks_grad(),
                  "adv_discriminator_loss: features must be detached");
  return add(detail::batch_ce_index(fv, w_m,
                                    static_cast<int>(ModalClass::kRgb)),
             detail::batch_ce_index(fi, w_m,
                                    static_cast<int>(ModalClass::kIr)));
}

// ---------------------------------------------------------------------------
// Combined objectives
// ---------------------------------------------------------------------------

/// One encoded tracklet inside a training batch.
struct EncodedSample {
  Tensor feature;      // [D] sequence feature, graph-connected
  int id_class = 0;    // dense identity class index
  ModalClass modality = ModalClass::kRgb;
};

struct LossTerms {
  Tensor adv1, ce, tri, total;
};

/// lambda * L_adv1 + L_ce + L_tri over a mixed-modality batch. The triplet
/// runs on L2-normalized copies of the features; the classifier heads see
/// them raw. With use_adversarial = false (baseline rows) the adv term is a
/// constant zero.
inline LossTerms id_objective(const std::vector<EncodedSample>& batch,
                              const ModelParams& model, const LossConfig& cfg,
                              bool use_adversarial = true) {
  cfg.validate();
  MITML_CHECK(batch.size() >= 2, "id_objective: batch of ", batch.size(),
              " is too small");
  LossTerms out;

  Tensor ce_total;
  std::vector<Tensor> tri_feats;
  std::vector<int> tri_ids;
  std::vector<Tensor> fv, fi;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    const Tensor ce = cross_entropy(classify(s.feature, model.w_id),
                                    s.id_class);
    ce_total = i == 0 ? ce : add(ce_total, ce);
    tri_feats.push_back(l2_normalize(s.feature, 0));
    tri_ids.push_back(s.id_class);
    (s.modality == ModalClass::kRgb ? fv : fi).push_back(s.feature);
  }
  out.ce = scale(ce_total, 1.0 / static_cast<double>(batch.size()));
  out.tri = triplet_loss(tri_feats, tri_ids, cfg.triplet_margin);

  if (use_adversarial) {
    out.adv1 = adv_encoder_loss(fv, fi, model.w_m, cfg.adversarial_mode);
    out.total = add(add(scale(out.adv1, cfg.lambda), out.ce), out.tri);
  } else {
    out.adv1 = Tensor::scalar(0.0);
    out.total = add(out.ce, out.tri);
  }
  return out;
}

/// The plain CE + triplet objective over already-pooled baseline features.
inline LossTerms baseline_objective(const std::vector<EncodedSample>& batch,
                                    const ModelParams& model,
                                    const LossConfig& cfg) {
  return id_objective(batch, model, cfg, /*use_adversarial=*/false);
}

}  // namespace mitml

#endif  // MITML_LOSSES_HPP
