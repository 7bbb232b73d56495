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

#ifndef MITML_TMR_HPP
#define MITML_TMR_HPP

#include <utility>
#include <vector>

#include "mitml/model.hpp"
#include "mitml/nn.hpp"
#include "mitml/ops.hpp"
#include "mitml/tensor.hpp"

// Temporal memory refinement. The f1 stream is read by a two-layer LSTM; for
// each frame position t the LSTM output is mapped by that position's own
// affine map, averaged with the raw frame feature and squashed by that
// position's own SE gate:
//
//   a_t = SE_t((FC_t(lstm2(f1)_t) + f1_t) / 2)
//
// The attention then refines the f2 stream with a residual inside the
// temporal mean:
//
//   F = (1/T) sum_t (a_t (.) f2_t + f2_t)

namespace mitml {

/// Per-frame channel attention over the f1 stream; result is [T x D] with
/// every entry in (0,1).
inline Tensor tmr_attention(const Tensor& f1, const TmrParams& p) {
  MITML_CHECK(f1.rank() == 2, "tmr_attention: f1 must be [T x D], got ",
              shape_str(f1.shape()));
  MITML_CHECK(f1.dim(0) == p.seq_len, "tmr_attention: sequence length ",
              f1.dim(0), " does not match the module's fixed T=", p.seq_len);
  MITML_CHECK(f1.dim(1) == p.dim, "tmr_attention: feature dim ", f1.dim(1),
              " expects ", p.dim);
  const Tensor h = lstm2_forward(f1, p.lstm);
  std::vector<Tensor> rows;
  rows.reserve(static_cast<std::size_t>(p.seq_len));
  for (int t = 0; t < p.seq_len; ++t) {
    const Tensor mixed = scale(
        add(affine(row_vec(h, t), p.fc[static_cast<std::size_t>(t)]),
            row_vec(f1, t)),
        0.5);
    rows.push_back(se_gate(mixed, p.se[static_cast<std::size_t>(t)]));
  }
  return stack_rows(rows);
}

/// F = (1/T) sum_t (a_t (.) f2_t + f2_t); the residual sits inside the mean.
inline Tensor tmr_aggregate(const Tensor& a, const Tensor& f2) {
  check_same_shape("tmr_aggregate", a, f2);
  MITML_CHECK(a.rank() == 2, "tmr_aggregate: inputs must be [T x D], got ",
              shape_str(a.shape()));
  return mean(add(mul(a, f2), f2), 0);
}

// ---------------------------------------------------------------------------
// Sequence encoders
// ---------------------------------------------------------------------------

enum class Pooling { kAverage, kMax, kSoftmaxWeighted };

inline Pooling pooling_from_string(const std::string& s) {
  if (s == "average") return Pooling::kAverage;
  if (s == "max") return Pooling::kMax;
  if (s == "softmax_weighted") return Pooling::kSoftmaxWeighted;
  MITML_CHECK(false, "unknown pooling mode '", s, "'");
  return Pooling::kAverage;
}

/// Baseline frame pooling over [T x D] -> [D]. softmax_weighted scores each
/// frame by the mean of its channels and softmaxes the scores over t.
inline Tensor pool_frames(const Tensor& f, Pooling mode) {
  MITML_CHECK(f.rank() == 2, "pool_frames: input must be [T x D], got ",
              shape_str(f.shape()));
  switch (mode) {
    case Pooling::kAverage:
      return mean(f, 0);
    case Pooling::kMax:
      return max_along(f, 0);
    case Pooling::kSoftmaxWeighted: {
      const int t = f.dim(0), d = f.dim(1);
      const Tensor w = reshape(softmax(mean(f, 1), 0), {1, t});
      return reshape(matmul(w, f), {d});
    }
  }
  MITML_CHECK(false, "pool_frames: bad mode");
  return Tensor();
}

/// Full sequence encoder: backbone, attention over f1, aggregation of f2.
inline Tensor encode_tracklet(const Tensor& frames, ModalClass modality,
                              const ModelParams& m) {
  const auto [f1, f2] = backbone_forward(frames, modality, m);
  return tmr_aggregate(tmr_attention(f1, m.tmr), f2);
}

/// Baseline sequence encoder (no TMR): pooled f2 stream.
inline Tensor encode_tracklet_baseline(const Tensor& frames,
                                       ModalClass modality,
                                       const ModelParams& m, Pooling pooling) {
  const auto [f1, f2] = backbone_forward(frames, modality, m);
  (void)f1;
  return pool_frames(f2, pooling);
}

}  // namespace mitml

#endif  // MITML_TMR_HPP
