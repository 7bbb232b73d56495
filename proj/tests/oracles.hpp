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

#ifndef MITML_TESTS_ORACLES_HPP
#define MITML_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

// Reference implementations for the test suite, written against plain
// std::vector<double> with deliberately different loop structures than the
// library, so a shared bug cannot cancel out. Nothing here touches the
// autodiff graph.

namespace oracle {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Convolution: iterate output pixels, read the input through a bounds check
// instead of materializing a padded buffer.
// ---------------------------------------------------------------------------

struct ConvShape {
  int n = 0, c = 0, h = 0, w = 0;      // input
  int o = 0, kh = 0, kw = 0;           // kernel
  int stride = 1, pad = 0;
  int oh() const { return (h + 2 * pad - kh) / stride + 1; }
  int ow() const { return (w + 2 * pad - kw) / stride + 1; }
};

inline Vec conv2d(const Vec& x, const Vec& k, const Vec& bias,
                  const ConvShape& s) {
  if ((s.h + 2 * s.pad - s.kh) % s.stride != 0 ||
      (s.w + 2 * s.pad - s.kw) % s.stride != 0)
    throw std::invalid_argument("oracle conv: fractional output");
  const int oh = s.oh(), ow = s.ow();
  Vec out(static_cast<std::size_t>(s.n) * s.o * oh * ow, 0.0);
  const auto in_at = [&](int n, int c, int y, int xx) -> double {
    if (y < 0 || y >= s.h || xx < 0 || xx >= s.w) return 0.0;
    return x[((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + xx];
  };
  for (int n = 0; n < s.n; ++n)
    for (int o = 0; o < s.o; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias[static_cast<std::size_t>(o)];
          for (int c = 0; c < s.c; ++c)
            for (int ky = 0; ky < s.kh; ++ky)
              for (int kx = 0; kx < s.kw; ++kx)
                acc += in_at(n, c, oy * s.stride + ky - s.pad,
                             ox * s.stride + kx - s.pad) *
                       k[((static_cast<std::size_t>(o) * s.c + c) * s.kh + ky) *
                             s.kw +
                         kx];
          out[((static_cast<std::size_t>(n) * s.o + o) * oh + oy) * ow + ox] =
              acc;
        }
  return out;
}

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline Vec softmax(const Vec& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  Vec p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += p[i] = std::exp(z[i] - m);
  for (double& v : p) v /= sum;
  return p;
}

/// y = x.W + b with W stored row-major as [in x out].
inline Vec affine(const Vec& x, const Vec& w, const Vec& b, int in, int out) {
  Vec y(static_cast<std::size_t>(out));
  for (int j = 0; j < out; ++j) {
    double acc = b[static_cast<std::size_t>(j)];
    for (int i = 0; i < in; ++i)
      acc += x[static_cast<std::size_t>(i)] *
             w[static_cast<std::size_t>(i) * out + j];
    y[static_cast<std::size_t>(j)] = acc;
  }
  return y;
}

inline double ce_index(const Vec& logits, int target) {
  return -std::log(softmax(logits)[static_cast<std::size_t>(target)]);
}

inline double ce_dist(const Vec& logits, const Vec& dist) {
  const Vec p = softmax(logits);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc -= dist[i] * std::log(p[i]);
  return acc;
}

// ---------------------------------------------------------------------------
// LSTM cell and two-layer sequence, scripted component by component
// ---------------------------------------------------------------------------

struct LstmGateRef {
  Vec wx, wh, b;  // wx [in x hidden], wh [hidden x hidden], both row-major
};

struct LstmLayerRef {
  int in = 0, hidden = 0;
  LstmGateRef i, f, g, o;
};

inline Vec gate_pre(const Vec& x, const Vec& h, const LstmGateRef& g, int in,
                    int hidden) {
  Vec z(static_cast<std::size_t>(hidden));
  for (int j = 0; j < hidden; ++j) {
    double acc = g.b[static_cast<std::size_t>(j)];
    for (int a = 0; a < in; ++a)
      acc += x[static_cast<std::size_t>(a)] *
             g.wx[static_cast<std::size_t>(a) * hidden + j];
    for (int a = 0; a < hidden; ++a)
      acc += h[static_cast<std::size_t>(a)] *
             g.wh[static_cast<std::size_t>(a) * hidden + j];
    z[static_cast<std::size_t>(j)] = acc;
  }
  return z;
}

inline void lstm_cell(const Vec& x, Vec& h, Vec& c, const LstmLayerRef& p) {
  const Vec zi = gate_pre(x, h, p.i, p.in, p.hidden);
  const Vec zf = gate_pre(x, h, p.f, p.in, p.hidden);
  const Vec zg = gate_pre(x, h, p.g, p.in, p.hidden);
  const Vec zo = gate_pre(x, h, p.o, p.in, p.hidden);
  Vec hc(static_cast<std::size_t>(p.hidden)), cc(hc);
  for (int j = 0; j < p.hidden; ++j) {
    const std::size_t u = static_cast<std::size_t>(j);
    cc[u] = sigmoid(zf[u]) * c[u] + sigmoid(zi[u]) * std::tanh(zg[u]);
    hc[u] = sigmoid(zo[u]) * std::tanh(cc[u]);
  }
  h = hc;
  c = cc;
}

/// Two stacked layers, zero initial states; returns the T hidden states of
/// layer 1 concatenated row by row.
inline Vec lstm2_forward(const std::vector<Vec>& seq, const LstmLayerRef& l0,
                         const LstmLayerRef& l1) {
  Vec h0(static_cast<std::size_t>(l0.hidden), 0.0), c0 = h0;
  Vec h1(static_cast<std::size_t>(l1.hidden), 0.0), c1 = h1;
  Vec out;
  for (const Vec& x : seq) {
    lstm_cell(x, h0, c0, l0);
    lstm_cell(h0, h1, c1, l1);
    out.insert(out.end(), h1.begin(), h1.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Squeeze-excitation gate
// ---------------------------------------------------------------------------

/// sigmoid(W2.relu(W1.u + b1) + b2) with W1 [d x dr], W2 [dr x d] row-major.
inline Vec se_gate(const Vec& u, const Vec& w1, const Vec& b1, const Vec& w2,
                   const Vec& b2, int d, int dr) {
  Vec hidden(static_cast<std::size_t>(dr));
  for (int j = 0; j < dr; ++j) {
    double acc = b1[static_cast<std::size_t>(j)];
    for (int i = 0; i < d; ++i)
      acc += u[static_cast<std::size_t>(i)] *
             w1[static_cast<std::size_t>(i) * dr + j];
    hidden[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : 0.0;
  }
  Vec out(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    double acc = b2[static_cast<std::size_t>(k)];
    for (int j = 0; j < dr; ++j)
      acc += hidden[static_cast<std::size_t>(j)] *
             w2[static_cast<std::size_t>(j) * d + k];
    out[static_cast<std::size_t>(k)] = sigmoid(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch-hard triplet by exhaustive pair enumeration
// ---------------------------------------------------------------------------

inline double euclidean(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

/// For every anchor, enumerates every positive and every negative pair and
/// applies the hinge to the hardest of each; anchors without a positive are
/// skipped; the mean runs over the remaining anchors.
inline double triplet_batch_hard(const std::vector<Vec>& feats,
                                 const std::vector<int>& ids, double margin) {
  double total = 0.0;
  int anchors = 0;
  for (std::size_t a = 0; a < feats.size(); ++a) {
    double worst_pos = -1.0;
    double best_neg = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < feats.size(); ++j) {
      if (j == a) continue;
      const double d = euclidean(feats[a], feats[j]);
      if (ids[j] == ids[a])
        worst_pos = std::max(worst_pos, d);
      else
        best_neg = std::min(best_neg, d);
    }
    if (worst_pos < 0.0) continue;
    total += std::max(0.0, worst_pos - best_neg + margin);
    ++anchors;
  }
  if (anchors == 0)
    throw std::invalid_argument("oracle triplet: no anchor has a positive");
  return total / anchors;
}

// ---------------------------------------------------------------------------
// Adversarial loss terms, scripted per mode
// ---------------------------------------------------------------------------

/// Mean cross-entropy of one feature batch against one fixed index target
/// under the affine head (w [d x classes], b [classes]).
inline double batch_ce(const std::vector<Vec>& feats, const Vec& w,
                       const Vec& b, int d, int classes, int target) {
  double acc = 0.0;
  for (const Vec& f : feats)
    acc += ce_index(affine(f, w, b, d, classes), target);
  return acc / static_cast<double>(feats.size());
}

inline double batch_ce_uniform(const std::vector<Vec>& feats, const Vec& w,
                               const Vec& b, int d, int classes) {
  const Vec uniform(static_cast<std::size_t>(classes),
                    1.0 / static_cast<double>(classes));
  double acc = 0.0;
  for (const Vec& f : feats)
    acc += ce_dist(affine(f, w, b, d, classes), uniform);
  return acc / static_cast<double>(feats.size());
}

/// rgb = 0, ir = 1, neither = 2; mode is the config-file spelling.
inline double adv_encoder_loss(const std::vector<Vec>& fv,
                               const std::vector<Vec>& fi, const Vec& w,
                               const Vec& b, int d, int classes,
                               const std::string& mode) {
  if (mode == "three_class")
    return batch_ce(fv, w, b, d, classes, 2) +
           batch_ce(fi, w, b, d, classes, 2);
  if (mode == "inverse_label")
    return batch_ce(fv, w, b, d, classes, 1) +
           batch_ce(fi, w, b, d, classes, 0);
  if (mode == "uniform_target")
    return batch_ce_uniform(fv, w, b, d, classes) +
           batch_ce_uniform(fi, w, b, d, classes);
  throw std::invalid_argument("oracle adv: unknown mode " + mode);
}

inline double adv_discriminator_loss(const std::vector<Vec>& fv,
                                     const std::vector<Vec>& fi, const Vec& w,
                                     const Vec& b, int d, int classes) {
  return batch_ce(fv, w, b, d, classes, 0) +
         batch_ce(fi, w, b, d, classes, 1);
}

// ---------------------------------------------------------------------------
// Average precision from its definition
// ---------------------------------------------------------------------------

/// relevance[r] = 1 when the item ranked r (0-based) is relevant.
inline double average_precision(const std::vector<int>& relevance) {
  int hits = 0;
  double acc = 0.0;
  for (std::size_t r = 0; r < relevance.size(); ++r)
    if (relevance[r]) {
      ++hits;
      acc += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  if (hits == 0) throw std::invalid_argument("oracle ap: nothing relevant");
  return acc / hits;
}

}  // namespace oracle

#endif  // MITML_TESTS_ORACLES_HPP
