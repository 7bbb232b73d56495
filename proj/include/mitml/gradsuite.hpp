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

#ifndef MITML_GRADSUITE_HPP
#define MITML_GRADSUITE_HPP

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mitml/gradcheck.hpp"
#include "mitml/losses.hpp"
#include "mitml/model.hpp"
#include "mitml/nn.hpp"
#include "mitml/ops.hpp"
#include "mitml/rng.hpp"
#include "mitml/tmr.hpp"

// The shared finite-difference gradient suite. Inputs are sampled away from
// the kinks of relu, max and the triplet hinge so central differences stay
// valid at step 1e-5.

namespace mitml {

namespace detail {

inline Tensor sample_uniform(Rng& rng, Shape shape, double lo, double hi) {
  std::vector<double> d(static_cast<std::size_t>(numel(shape)));
  for (auto& v : d) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(d));
}

/// Uniform values with |v - avoid| >= margin, for relu-style kinks.
inline Tensor sample_away_from(Rng& rng, Shape shape, double lo, double hi,
                               double avoid, double margin) {
  std::vector<double> d(static_cast<std::size_t>(numel(shape)));
  for (auto& v : d) {
    do {
      v = rng.uniform(lo, hi);
    } while (std::fabs(v - avoid) < margin);
  }
  return Tensor::from_data(std::move(shape), std::move(d));
}

/// True when a batch-hard triplet on these values has every selection and
/// hinge comfortably away from a decision boundary.
inline bool triplet_kink_free(const std::vector<std::vector<double>>& feats,
                              const std::vector<int>& ids, double margin,
                              double gap) {
  const std::size_t n = feats.size();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < feats[i].size(); ++k) {
        const double d = feats[i][k] - feats[j][k];
        sq += d * d;
      }
      const double dij = std::sqrt(sq);
      if (dij < gap) return false;  // sqrt kink at coincident features
      dist[i][j] = dist[j][i] = dij;
    }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> pos, neg;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      (ids[j] == ids[i] ? pos : neg).push_back(dist[i][j]);
    }
    if (pos.empty()) continue;
    double dp = pos[0], dn = neg[0];
    for (double d : pos) dp = std::max(dp, d);
    for (double d : neg) dn = std::min(dn, d);
    int near_dp = 0, near_dn = 0;
    for (double d : pos) near_dp += std::fabs(d - dp) < gap;
    for (double d : neg) near_dn += std::fabs(d - dn) < gap;
    if (near_dp > 1 || near_dn > 1) return false;  // ambiguous hard pair
    if (std::fabs(dp - dn + margin) < gap) return false;  // hinge kink
  }
  return true;
}

inline std::vector<double> l2_normalized_values(const Tensor& t) {
  double nsq = 0.0;
  for (double v : t.data()) nsq += v * v;
  const double inv = 1.0 / std::sqrt(nsq);
  std::vector<double> out(t.data());
  for (double& v : out) v *= inv;
  return out;
}

}  // namespace detail

struct GradCase {
  std::string module;  // conv | lstm | tmr | losses | core
  std::string name;
  std::function<GradCheckResult(std::uint64_t)> run;  // seed -> result
};

inline std::vector<GradCase> grad_suite_cases() {
  using detail::sample_away_from;
  using detail::sample_uniform;
  std::vector<GradCase> cases;
  const auto msq = [](const Tensor& t) { return mean_all(mul(t, t)); };

  // --- core ops -----------------------------------------------------------
  cases.push_back({"core", "elementwise_chain", [](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 1, 29));
    std::vector<Tensor> in{sample_uniform(rng, {2, 3}, -1, 1),
                           sample_uniform(rng, {2, 3}, -1, 1)};
    return grad_check(
        [](const std::vector<Tensor>& v) {
          return sum_all(mul(add(v[0], v[1]), sub(v[0], scale(v[1], 0.5))));
        },
        in);
  }});
  cases.push_back({"core", "relu", [](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 2, 29));
    std::vector<Tensor> in{sample_away_from(rng, {3, 4}, -1, 1, 0.0, 1e-2)};
    return grad_check(
        [](const std::vector<Tensor>& v) {
          return sum_all(mul(relu(v[0]), add_const(v[0], 2.0)));
        },
        in);
  }});
  cases.push_back({"core", "sigmoid_tanh", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 3, 29));
    std::vector<Tensor> in{sample_uniform(rng, {6}, -2, 2)};
    return grad_check(
        [msq](const std::vector<Tensor>& v) {
          return msq(tanh(sigmoid(v[0])));
        },
        in);
  }});
  cases.push_back({"core", "sqrt", [](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 4, 29));
    std::vector<Tensor> in{sample_uniform(rng, {5}, 0.2, 2.0)};
    return grad_check(
        [](const std::vector<Tensor>& v) {
          return mean_all(mitml::sqrt(v[0]));
        },
        in);
  }});
  cases.push_back({"core", "matmul", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 5, 29));
    std::vector<Tensor> in{sample_uniform(rng, {3, 4}, -1, 1),
                           sample_uniform(rng, {4, 2}, -1, 1)};
    return grad_check(
        [msq](const std::vector<Tensor>& v) {
          return msq(matmul(v[0], v[1]));
        },
        in);
  }});
  cases.push_back({"core", "linear_bias", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 6, 29));
    std::vector<Tensor> in{sample_uniform(rng, {4}, -1, 1),
                           sample_uniform(rng, {4, 3}, -1, 1),
                           sample_uniform(rng, {3}, -1, 1)};
    return grad_check(
        [msq](const std::vector<Tensor>& v) {
          return msq(linear(v[0], v[1], v[2]));
        },
        in);
  }});
  cases.push_back({"core", "linear_rows", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 7, 29));
    std::vector<Tensor> in{sample_uniform(rng, {3, 4}, -1, 1),
                           sample_uniform(rng, {4, 2}, -1, 1),
                           sample_uniform(rng, {2}, -1, 1)};
    return grad_check(
        [msq](const std::vector<Tensor>& v) {
          return msq(linear(v[0], v[1], v[2]));
        },
        in);
  }});
  cases.push_back({"core", "softmax_entropy", [](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 8, 29));
    std::vector<Tensor> in{sample_uniform(rng, {3, 4}, -2, 2)};
    return grad_check(
        [](const std::vector<Tensor>& v) {
          return sum_all(mul(softmax(v[0], 1), log_softmax(v[0], 1)));
        },
        in);
  }});
  cases.push_back({"core", "reductions", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 9, 29));
    std::vector<Tensor> in{sample_uniform(rng, {3, 4}, -1, 1)};
    return grad_check(
        [msq](const std::vector<Tensor>& v) {
          return add(msq(sum(v[0], 1)), msq(mean(v[0], 0)));
        },
        in);
  }});
  cases.push_back({"core", "max_along", [msq](std::uint64_t seed) {
    // Resample until every row maximum is isolated by 1e-3.
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng rng(derive_seed(seed, 10, 29 + attempt));
      Tensor x = sample_uniform(rng, {4, 5}, -1, 1);
      bool clean = true;
      for (int r = 0; r < 4 && clean; ++r) {
        double top = -2, second = -2;
        for (int c = 0; c < 5; ++c) {
          const double v = x[r * 5 + c];
          if (v > top) {
            second = top;
            top = v;
          } else if (v > second) {
            second = v;
          }
        }
        clean = top - second > 1e-3;
      }
      MITML_CHECK(attempt < 100, "max_along case: no tie-free sample found");
      if (!clean) continue;
      std::vector<Tensor> in{x};
      return grad_check(
          [msq](const std::vector<Tensor>& v) {
            return msq(max_along(v[0], 1));
          },
          in);
    }
  }});
  cases.push_back({"core", "l2_normalize", [](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 11, 29));
    std::vector<Tensor> in{sample_away_from(rng, {4, 6}, -1, 1, 0.0, 0.2),
                           sample_uniform(rng, {4, 6}, -1, 1)};
    return grad_check(
        [](const std::vector<Tensor>& v) {
          return sum_all(mul(l2_normalize(v[0], 1), v[1]));
        },
        in);
  }});
  cases.push_back({"core", "gap", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 12, 29));
    std::vector<Tensor> in{sample_uniform(rng, {2, 3, 4, 3}, -1, 1)};
    return grad_check(
        [msq](const std::vector<Tensor>& v) {
          return msq(global_avg_pool(v[0]));
        },
        in);
  }});
  cases.push_back({"core", "stack_pick", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 13, 29));
    std::vector<Tensor> in{sample_uniform(rng, {3, 4}, -1, 1)};
    return grad_check(
        [msq](const std::vector<Tensor>& v) {
          const Tensor y = stack_rows({row_vec(v[0], 2), row_vec(v[0], 0)});
          return add(msq(y), scale(element(reshape(y, {8}), 5), 0.25));
        },
        in);
  }});

  // --- convolution ---------------------------------------------------------
  cases.push_back({"conv", "conv_s1_pad1", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 14, 29));
    std::vector<Tensor> in{sample_uniform(rng, {1, 2, 4, 4}, -1, 1),
                           sample_uniform(rng, {3, 2, 3, 3}, -0.5, 0.5),
                           sample_uniform(rng, {3}, -0.5, 0.5)};
    return grad_check(
        [msq](const std::vector<Tensor>& v) {
          return msq(conv2d(v[0], v[1], v[2], 1, 1));
        },
        in);
  }});
  cases.push_back({"conv", "conv_s2_pad0", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 15, 29));
    std::vector<Tensor> in{sample_uniform(rng, {2, 2, 5, 5}, -1, 1),
                           sample_uniform(rng, {2, 2, 3, 3}, -0.5, 0.5),
                           sample_uniform(rng, {2}, -0.5, 0.5)};
    return grad_check(
        [msq](const std::vector<Tensor>& v) {
          return msq(conv2d(v[0], v[1], v[2], 2, 0));
        },
        in);
  }});
  cases.push_back({"conv", "conv_stage", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 16, 29));
    ConvLayer layer = init_conv(rng, 4, 2, 3, 3);
    std::vector<Tensor> in{sample_uniform(rng, {1, 2, 6, 4}, -1, 1), layer.w,
                           layer.b};
    return grad_check(
        [msq, layer](const std::vector<Tensor>& v) {
          ConvLayer l = layer;
          l.w = v[1];
          l.b = v[2];
          return msq(detail::conv_stage(v[0], l));
        },
        in);
  }});

  // --- lstm -----------------------------------------------------------------
  cases.push_back({"lstm", "lstm_cell", [](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 17, 29));
    LstmLayer layer = init_lstm_layer(rng, 3, 4);
    std::vector<Tensor> in{sample_uniform(rng, {3}, -1, 1),
                           sample_uniform(rng, {4}, -1, 1),
                           sample_uniform(rng, {4}, -1, 1),
                           layer.gi.wx,
                           layer.gf.wh,
                           layer.go.b};
    return grad_check(
        [layer](const std::vector<Tensor>& v) {
          LstmLayer l = layer;
          l.gi.wx = v[3];
          l.gf.wh = v[4];
          l.go.b = v[5];
          const LstmState s = lstm_cell(v[0], {v[1], v[2]}, l);
          return add(mean_all(mul(s.h, s.h)), mean_all(mul(s.c, s.c)));
        },
        in);
  }});
  cases.push_back({"lstm", "lstm2_seq", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 18, 29));
    Lstm2 net = init_lstm2(rng, 4);
    std::vector<Tensor> in{sample_uniform(rng, {3, 4}, -1, 1), net.l0.gg.wx,
                           net.l1.go.wh};
    return grad_check(
        [msq, net](const std::vector<Tensor>& v) {
          Lstm2 n = net;
          n.l0.gg.wx = v[1];
          n.l1.go.wh = v[2];
          return msq(lstm2_forward(v[0], n));
        },
        in);
  }});

  // --- tmr ------------------------------------------------------------------
  cases.push_back({"tmr", "se_gate", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 19, 29));
    SeGateParams p = init_se_gate(rng, 8, 4);
    std::vector<Tensor> in{sample_uniform(rng, {8}, -1, 1), p.w1, p.b2};
    return grad_check(
        [msq, p](const std::vector<Tensor>& v) {
          SeGateParams q = p;
          q.w1 = v[1];
          q.b2 = v[2];
          return msq(se_gate(v[0], q));
        },
        in);
  }});
  cases.push_back({"tmr", "attention", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 20, 29));
    TmrParams p = init_tmr(rng, 3, 8, 4);
    std::vector<Tensor> in{sample_uniform(rng, {3, 8}, -1, 1), p.fc[1].w,
                           p.se[0].w1, p.lstm.l0.gi.wx};
    return grad_check(
        [msq, p](const std::vector<Tensor>& v) {
          TmrParams q = p;
          q.fc[1].w = v[1];
          q.se[0].w1 = v[2];
          q.lstm.l0.gi.wx = v[3];
          return msq(tmr_attention(v[0], q));
        },
        in);
  }});
  cases.push_back({"tmr", "encode", [msq](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 21, 29));
    TmrParams p = init_tmr(rng, 3, 8, 4);
    std::vector<Tensor> in{sample_uniform(rng, {3, 8}, -1, 1),
                           sample_uniform(rng, {3, 8}, -1, 1)};
    return grad_check(
        [msq, p](const std::vector<Tensor>& v) {
          return msq(tmr_aggregate(tmr_attention(v[0], p), v[1]));
        },
        in);
  }});

  // --- losses ----------------------------------------------------------------
  cases.push_back({"losses", "ce_index", [](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 22, 29));
    std::vector<Tensor> in{sample_uniform(rng, {5}, -2, 2)};
    return grad_check(
        [](const std::vector<Tensor>& v) { return cross_entropy(v[0], 2); },
        in);
  }});
  cases.push_back({"losses", "ce_dist", [](std::uint64_t seed) {
    Rng rng(derive_seed(seed, 23, 29));
    const Tensor dist = Tensor::from_data({4}, {0.1, 0.2, 0.3, 0.4});
    std::vector<Tensor> in{sample_uniform(rng, {4}, -2, 2)};
    return grad_check(
        [dist](const std::vector<Tensor>& v) {
          return cross_entropy(v[0], dist);
        },
        in);
  }});
  for (const AdvMode mode : {AdvMode::kThreeClass, AdvMode::kInverseLabel,
                             AdvMode::kUniformTarget}) {
    cases.push_back(
        {"losses", std::string("adv_") + adv_mode_name(mode),
         [mode](std::uint64_t seed) {
           Rng rng(derive_seed(seed, 24, 29));
           AffineParams w_m = init_affine(rng, 6, wm_classes_for(mode));
           std::vector<Tensor> in{
               sample_uniform(rng, {6}, -1, 1), sample_uniform(rng, {6}, -1, 1),
               sample_uniform(rng, {6}, -1, 1), w_m.w, w_m.b};
           return grad_check(
               [mode, w_m](const std::vector<Tensor>& v) {
                 AffineParams h = w_m;
                 h.w = v[3];
                 h.b = v[4];
                 return adv_encoder_loss({v[0], v[1]}, {v[2]}, h, mode);
               },
               in);
         }});
  }
  cases.push_back({"losses", "triplet", [](std::uint64_t seed) {
    const std::vector<int> ids{0, 0, 1, 1};
    for (std::uint64_t attempt = 0;; ++attempt) {
      MITML_CHECK(attempt < 100, "triplet case: no kink-free sample found");
      Rng rng(derive_seed(seed, 25, 29 + attempt));
      std::vector<Tensor> in;
      std::vector<std::vector<double>> vals;
      for (int i = 0; i < 4; ++i) {
        in.push_back(sample_uniform(rng, {4}, -1, 1));
        vals.push_back(in.back().data());
      }
      if (!detail::triplet_kink_free(vals, ids, 0.3, 1e-3)) continue;
      return grad_check(
          [&ids](const std::vector<Tensor>& v) {
            return triplet_loss(v, ids, 0.3);
          },
          in);
    }
  }});
  cases.push_back({"losses", "id_objective", [](std::uint64_t seed) {
    const std::vector<int> ids{0, 0, 1, 1};
    LossConfig cfg;
    for (std::uint64_t attempt = 0;; ++attempt) {
      MITML_CHECK(attempt < 100, "id_objective case: no kink-free sample");
      Rng rng(derive_seed(seed, 26, 29 + attempt));
      ModelParams model;
      model.num_classes = 2;
      model.wm_classes = 3;
      model.w_id = init_affine(rng, 6, 2);
      model.w_m = init_affine(rng, 6, 3);
      std::vector<Tensor> in;
      std::vector<std::vector<double>> norm_vals;
      for (int i = 0; i < 4; ++i) {
        in.push_back(sample_away_from(rng, {6}, -1, 1, 0.0, 0.05));
        norm_vals.push_back(detail::l2_normalized_values(in.back()));
      }
      if (!detail::triplet_kink_free(norm_vals, ids, cfg.triplet_margin, 1e-3))
        continue;
      in.push_back(model.w_id.w);
      in.push_back(model.w_m.w);
      return grad_check(
          [&ids, model, cfg](const std::vector<Tensor>& v) {
            ModelParams m = model;
            m.w_id.w = v[4];
            m.w_m.w = v[5];
            std::vector<EncodedSample> batch;
            for (int i = 0; i < 4; ++i) {
              EncodedSample s;
              s.feature = v[static_cast<std::size_t>(i)];
              s.id_class = ids[static_cast<std::size_t>(i)];
              s.modality = i % 2 == 0 ? ModalClass::kRgb : ModalClass::kIr;
              batch.push_back(s);
            }
            return id_objective(batch, m, cfg).total;
          },
          in);
    }
  }});

  return cases;
}

// ---------------------------------------------------------------------------
// Suite driver
// ---------------------------------------------------------------------------

struct GradSuiteRow {
  std::string module, name;
  double max_rel_err = 0.0;
  std::size_t coords = 0;
  bool passed = true;
};

struct GradSuiteReport {
  std::vector<GradSuiteRow> rows;
  double worst = 0.0;
  bool all_passed = true;
};

/// Runs every case of `module` ("all" for the union) over `seeds` seeds and
/// aggregates the worst relative error per case.
inline GradSuiteReport run_grad_suite(const std::string& module, int seeds,
                                      double tol = 1e-4) {
  MITML_CHECK(seeds >= 1, "grad suite: seeds must be >= 1");
  const bool all = module == "all";
  MITML_CHECK(all || module == "conv" || module == "lstm" || module == "tmr" ||
                  module == "losses",
              "grad suite: unknown module '", module,
              "' (want all|tmr|lstm|conv|losses)");
  GradSuiteReport report;
  for (const GradCase& c : grad_suite_cases()) {
    if (!all && c.module != module) continue;
    GradSuiteRow row;
    row.module = c.module;
    row.name = c.name;
    for (int s = 1; s <= seeds; ++s) {
      const GradCheckResult r = c.run(static_cast<std::uint64_t>(s));
      row.coords += r.coords_checked;
      row.max_rel_err = std::max(row.max_rel_err, r.max_rel_err);
      row.passed = row.passed && r.ok(tol);
    }
    report.worst = std::max(report.worst, row.max_rel_err);
    report.all_passed = report.all_passed && row.passed;
    report.rows.push_back(std::move(row));
  }
  MITML_CHECK(!report.rows.empty(), "grad suite: module '", module,
              "' selected no cases");
  return report;
}

}  // namespace mitml

#endif  // MITML_GRADSUITE_HPP
