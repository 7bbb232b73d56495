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

#ifndef MITML_NN_HPP
#define MITML_NN_HPP

#include <cmath>
#include <utility>
#include <vector>

#include "mitml/ops.hpp"
#include "mitml/rng.hpp"
#include "mitml/tensor.hpp"

// Learnable building blocks: affine maps, conv layers, a two-layer LSTM and
// squeeze-excitation gates. Parameter structs own their tensors; forward
// functions are free functions over them.
//
// Initialization: He-uniform (limit sqrt(6/fan_in)) for ReLU-facing conv
// kernels, Glorot-uniform (limit sqrt(6/(fan_in+fan_out))) for everything
// else, zero biases. Draw order follows declaration order, so a seed pins
// every parameter.

namespace mitml {

inline Tensor uniform_param(Rng& rng, Shape shape, double limit) {
  std::vector<double> d(static_cast<std::size_t>(numel(shape)));
  for (auto& v : d) v = rng.uniform(-limit, limit);
  return Tensor::from_data(std::move(shape), std::move(d), true);
}

// y = x.w + b with w: [in x out].
struct AffineParams {
  Tensor w, b;
};

inline AffineParams init_affine(Rng& rng, int in, int out) {
  const double limit = std::sqrt(6.0 / (in + out));
  AffineParams p;
  p.w = uniform_param(rng, {in, out}, limit);
  p.b = Tensor::zeros({out}, true);
  return p;
}

inline Tensor affine(const Tensor& x, const AffineParams& p) {
  return linear(x, p.w, p.b);
}

struct ConvLayer {
  Tensor w, b;  // w: [out x in x kh x kw], b: [out]
};

inline ConvLayer init_conv(Rng& rng, int out, int in, int kh, int kw) {
  const double limit = std::sqrt(6.0 / (in * kh * kw));
  ConvLayer p;
  p.w = uniform_param(rng, {out, in, kh, kw}, limit);
  p.b = Tensor::zeros({out}, true);
  return p;
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

struct LstmGate {
  Tensor wx, wh, b;  // wx: [in x hidden], wh: [hidden x hidden], b: [hidden]
};

struct LstmLayer {
  int in_dim = 0, hidden = 0;
  LstmGate gi, gf, gg, go;  // input, forget, cell candidate, output
};

struct Lstm2 {
  LstmLayer l0, l1;
};

inline LstmGate init_lstm_gate(Rng& rng, int in, int hidden) {
  const double lim_x = std::sqrt(6.0 / (in + hidden));
  const double lim_h = std::sqrt(6.0 / (hidden + hidden));
  LstmGate g;
  g.wx = uniform_param(rng, {in, hidden}, lim_x);
  g.wh = uniform_param(rng, {hidden, hidden}, lim_h);
  g.b = Tensor::zeros({hidden}, true);
  return g;
}

inline LstmLayer init_lstm_layer(Rng& rng, int in, int hidden) {
  LstmLayer l;
  l.in_dim = in;
  l.hidden = hidden;
  l.gi = init_lstm_gate(rng, in, hidden);
  l.gf = init_lstm_gate(rng, in, hidden);
  l.gg = init_lstm_gate(rng, in, hidden);
  l.go = init_lstm_gate(rng, in, hidden);
  // Forget gate bias starts at 1 so a fresh cell carries state across the
  // whole sequence (a zero bias halves the memory every step, which leaves
  // nothing after a handful of frames).
  l.gf.b = Tensor::full({hidden}, 1.0, true);
  return l;
}

inline Lstm2 init_lstm2(Rng& rng, int dim) {
  Lstm2 m;
  m.l0 = init_lstm_layer(rng, dim, dim);
  m.l1 = init_lstm_layer(rng, dim, dim);
  return m;
}

struct LstmState {
  Tensor h, c;
};

/// One cell step: gates from x and the previous hidden state, then the
/// standard cell/hidden update.
inline LstmState lstm_cell(const Tensor& x, const LstmState& prev,
                           const LstmLayer& p) {
  MITML_CHECK(x.rank() == 1 && x.dim(0) == p.in_dim,
              "lstm_cell: input shape ", shape_str(x.shape()), " expects [",
              p.in_dim, "]");
  const auto gate = [&](const LstmGate& g) {
    return add(linear(x, g.wx, g.b), linear(prev.h, g.wh));
  };
  const Tensor i = sigmoid(gate(p.gi));
  const Tensor f = sigmoid(gate(p.gf));
  const Tensor g = tanh(gate(p.gg));
  const Tensor o = sigmoid(gate(p.go));
  LstmState next;
  next.c = add(mul(f, prev.c), mul(i, g));
  next.h = mul(o, tanh(next.c));
  return next;
}

inline std::vector<Tensor> lstm_layer_forward(const std::vector<Tensor>& xs,
                                              const LstmLayer& p) {
  LstmState s{Tensor::zeros({p.hidden}), Tensor::zeros({p.hidden})};
  std::vector<Tensor> hs;
  hs.reserve(xs.size());
  for (const auto& x : xs) {
    s = lstm_cell(x, s, p);
    hs.push_back(s.h);
  }
  return hs;
}

/// Two stacked LSTM layers over a [T x D] sequence, zero initial states.
/// Returns the T hidden states of the second layer as [T x D].
inline Tensor lstm2_forward(const Tensor& seq, const Lstm2& p) {
  MITML_CHECK(seq.rank() == 2, "lstm2_forward: sequence must be [T x D], got ",
              shape_str(seq.shape()));
  const int t = seq.dim(0);
  MITML_CHECK(t >= 1, "lstm2_forward: empty sequence");
  MITML_CHECK(seq.dim(1) == p.l0.in_dim, "lstm2_forward: feature dim ",
              seq.dim(1), " expects ", p.l0.in_dim);
  std::vector<Tensor> xs;
  xs.reserve(static_cast<std::size_t>(t));
  for (int r = 0; r < t; ++r) xs.push_back(row_vec(seq, r));
  return stack_rows(lstm_layer_forward(lstm_layer_forward(xs, p.l0), p.l1));
}

// ---------------------------------------------------------------------------
// Squeeze-excitation gate
// ---------------------------------------------------------------------------

struct SeGateParams {
  Tensor w1, b1;  // [d x d/r], [d/r]
  Tensor w2, b2;  // [d/r x d], [d]
};

inline SeGateParams init_se_gate(Rng& rng, int d, int reduction) {
  MITML_CHECK(reduction >= 1 && d % reduction == 0,
              "se_gate: reduction ", reduction, " must divide dim ", d);
  const int dr = d / reduction;
  SeGateParams p;
  p.w1 = uniform_param(rng, {d, dr}, std::sqrt(6.0 / (d + dr)));
  p.b1 = Tensor::zeros({dr}, true);
  // The output layer starts small so fresh gates sit near 0.5 and the
  // refined aggregate begins close to a plain average; the gates then earn
  // their modulation instead of injecting noise from step one.
  p.w2 = uniform_param(rng, {dr, d}, 0.1 * std::sqrt(6.0 / (dr + d)));
  p.b2 = Tensor::zeros({d}, true);
  return p;
}

/// sigmoid(W2.relu(W1.u + b1) + b2); every output component in (0,1).
inline Tensor se_gate(const Tensor& u, const SeGateParams& p) {
  MITML_CHECK(u.rank() == 1 && u.dim(0) == p.w1.dim(0),
              "se_gate: input shape ", shape_str(u.shape()), " expects [",
              p.w1.dim(0), "]");
  return sigmoid(linear(relu(linear(u, p.w1, p.b1)), p.w2, p.b2));
}

// ---------------------------------------------------------------------------
// Temporal memory refinement parameters
// ---------------------------------------------------------------------------

// TMR owns a two-layer LSTM over the f1 stream plus one affine map and one
// SE gate per frame position (T independent copies each).
struct TmrParams {
  int seq_len = 0, dim = 0;
  Lstm2 lstm;
  std::vector<AffineParams> fc;   // T maps, D -> D, with bias
  std::vector<SeGateParams> se;   // T gates
};

inline TmrParams init_tmr(Rng& rng, int seq_len, int dim, int se_reduction) {
  MITML_CHECK(seq_len >= 1, "tmr: seq_len must be positive, got ", seq_len);
  TmrParams p;
  p.seq_len = seq_len;
  p.dim = dim;
  p.lstm = init_lstm2(rng, dim);
  p.fc.reserve(static_cast<std::size_t>(seq_len));
  p.se.reserve(static_cast<std::size_t>(seq_len));
  for (int t = 0; t < seq_len; ++t) {
    p.fc.push_back(init_affine(rng, dim, dim));
    p.se.push_back(init_se_gate(rng, dim, se_reduction));
  }
  return p;
}

}  // namespace mitml

#endif  // MITML_NN_HPP
