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

#ifndef MITML_EVAL_HPP
#define MITML_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mitml/model.hpp"
#include "mitml/sampler.hpp"
#include "mitml/synthdata.hpp"
#include "mitml/tmr.hpp"

// Cross-modal retrieval protocol: all tracklets of one modality query the
// other modality's gallery; CMC at ranks {1,5,10,20} and mAP.

namespace mitml {

struct SeqFeature {
  std::vector<double> values;
  int identity = 0;
  int camera = 0;
};

enum class Direction { kIrToVis, kVisToIr };

inline const char* direction_name(Direction d) {
  return d == Direction::kIrToVis ? "i2v" : "v2i";
}

inline Direction direction_from_string(const std::string& s) {
  if (s == "i2v") return Direction::kIrToVis;
  if (s == "v2i") return Direction::kVisToIr;
  MITML_CHECK(false, "unknown direction '", s, "' (want i2v or v2i)");
  return Direction::kIrToVis;
}

inline double cosine_similarity(const std::vector<double>& a,
                                const std::vector<double>& b) {
  MITML_CHECK(a.size() == b.size() && !a.empty(),
              "cosine: dimension mismatch (", a.size(), " vs ", b.size(), ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::vector<std::vector<double>> similarity_matrix(
    const std::vector<SeqFeature>& queries,
    const std::vector<SeqFeature>& gallery) {
  std::vector<std::vector<double>> m(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    m[i].resize(gallery.size());
    for (std::size_t j = 0; j < gallery.size(); ++j)
      m[i][j] = cosine_similarity(queries[i].values, gallery[j].values);
  }
  return m;
}

struct EvalReport {
  std::string direction;
  double r1 = 0.0, r5 = 0.0, r10 = 0.0, r20 = 0.0, map = 0.0;
  int num_queries = 0;       // queries that entered the metrics
  int excluded_queries = 0;  // queries with no valid relevant gallery entry
};

/// Ranks every query against the gallery. Gallery entries sharing both the
/// query's identity and camera are excluded before scoring; ties are broken
/// by gallery index. Queries with no valid relevant entry are excluded from
/// CMC and mAP and counted.
inline EvalReport evaluate(const std::vector<SeqFeature>& queries,
                           const std::vector<SeqFeature>& gallery,
                           const std::string& direction) {
  MITML_CHECK(!queries.empty() && !gallery.empty(),
              "evaluate: empty query or gallery set");
  EvalReport rep;
  rep.direction = direction;
  double ap_sum = 0.0;
  int c1 = 0, c5 = 0, c10 = 0, c20 = 0;
  for (const SeqFeature& q : queries) {
    std::vector<int> valid;
    bool any_relevant = false;
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      const SeqFeature& g = gallery[j];
      if (g.identity == q.identity && g.camera == q.camera) continue;
      valid.push_back(static_cast<int>(j));
      any_relevant = any_relevant || g.identity == q.identity;
    }
    if (!any_relevant) {
      ++rep.excluded_queries;
      continue;
    }
    std::vector<double> sims(valid.size());
    for (std::size_t k = 0; k < valid.size(); ++k)
      sims[k] = cosine_similarity(
          q.values, gallery[static_cast<std::size_t>(valid[k])].values);
    std::vector<int> order(valid.size());
    std::iota(order.begin(), order.end(), 0);
    // valid is in gallery-index order, so a stable sort on similarity alone
    // implements the tie-break rule.
    std::stable_sort(order.begin(), order.end(),
                     [&sims](int a, int b) { return sims[a] > sims[b]; });
    int first_hit = 0, hits = 0;
    double ap = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const SeqFeature& g =
          gallery[static_cast<std::size_t>(valid[static_cast<std::size_t>(order[r])])];
      if (g.identity != q.identity) continue;
      ++hits;
      if (first_hit == 0) first_hit = static_cast<int>(r) + 1;
      ap += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    ap_sum += ap / hits;
    c1 += first_hit <= 1;
    c5 += first_hit <= 5;
    c10 += first_hit <= 10;
    c20 += first_hit <= 20;
    ++rep.num_queries;
  }
  MITML_CHECK(rep.num_queries > 0,
              "evaluate: every query lacked a valid relevant gallery entry");
  const double n = rep.num_queries;
  rep.r1 = c1 / n;
  rep.r5 = c5 / n;
  rep.r10 = c10 / n;
  rep.r20 = c20 / n;
  rep.map = ap_sum / n;
  return rep;
}

// ---------------------------------------------------------------------------
// Brute-force oracle: AP from its definition, coded independently of evaluate
// ---------------------------------------------------------------------------

struct OracleResult {
  bool excluded = false;  // no valid relevant gallery entry
  double ap = 0.0;
  int first_hit = 0;  // 1-based rank of the first relevant entry
};

inline OracleResult brute_force_oracle(const SeqFeature& query,
                                       const std::vector<SeqFeature>& gallery) {
  // Full sort of (descending similarity, ascending gallery index) pairs,
  // then one linear scan accumulating precision at every relevant position.
  std::vector<std::pair<double, int>> scored;
  for (std::size_t j = 0; j < gallery.size(); ++j) {
    if (gallery[j].identity == query.identity &&
        gallery[j].camera == query.camera)
      continue;
    scored.emplace_back(-cosine_similarity(query.values, gallery[j].values),
                        static_cast<int>(j));
  }
  std::sort(scored.begin(), scored.end());
  OracleResult res;
  int relevant_seen = 0;
  double precision_sum = 0.0;
  for (std::size_t pos = 0; pos < scored.size(); ++pos) {
    const SeqFeature& g = gallery[static_cast<std::size_t>(scored[pos].second)];
    if (g.identity != query.identity) continue;
    ++relevant_seen;
    precision_sum += relevant_seen / static_cast<double>(pos + 1);
    if (res.first_hit == 0) res.first_hit = static_cast<int>(pos) + 1;
  }
  if (relevant_seen == 0) {
    res.excluded = true;
    return res;
  }
  res.ap = precision_sum / relevant_seen;
  return res;
}

// ---------------------------------------------------------------------------
// Feature extraction
// ---------------------------------------------------------------------------

struct EvalOptions {
  bool use_tmr = true;
  Pooling pooling = Pooling::kAverage;
  int n_frames = 6;  // frames per tracklet at evaluation time
};

/// Reads the encoder configuration a training run recorded. Falls back to
/// the full TMR path when a checkpoint predates these entries.
inline EvalOptions eval_options_from_checkpoint(const Checkpoint& ck,
                                                const ModelParams& model) {
  EvalOptions opt;
  opt.n_frames = model.cfg.seq_len;
  const std::string use_tmr = std::string(kMetaPrefix) + "use_tmr";
  if (ck.has(use_tmr)) opt.use_tmr = ck.at(use_tmr).item() != 0.0;
  const std::string pooling = std::string(kMetaPrefix) + "pooling";
  if (ck.has(pooling))
    opt.pooling = static_cast<Pooling>(static_cast<int>(ck.at(pooling).item()));
  return opt;
}

/// Encodes every record of `modality` among record_indices using fixed
/// mid-chunk frames (no augmentation, no randomness).
inline std::vector<SeqFeature> extract_features(
    const Corpus& corpus, const std::vector<int>& record_indices, int modality,
    const ModelParams& model, const EvalOptions& opt) {
  if (opt.use_tmr)
    MITML_CHECK(opt.n_frames == model.cfg.seq_len,
                "extract: the TMR encoder is fixed to ", model.cfg.seq_len,
                " frames, got n=", opt.n_frames);
  std::vector<SeqFeature> out;
  for (int ri : record_indices) {
    const ManifestRecord& rec = corpus.records[static_cast<std::size_t>(ri)];
    if (rec.modality != modality) continue;
    const TrackletData& td = corpus.tracklets[static_cast<std::size_t>(ri)];
    const std::vector<int> idx =
        eval_frame_indices(td.frame_count, opt.n_frames);
    const Tensor frames = frames_tensor(td, idx);
    const ModalClass m = modality == 0 ? ModalClass::kRgb : ModalClass::kIr;
    const Tensor feat =
        opt.use_tmr ? encode_tracklet(frames, m, model)
                    : encode_tracklet_baseline(frames, m, model, opt.pooling);
    SeqFeature s;
    s.values = feat.data();
    s.identity = rec.identity;
    s.camera = rec.camera;
    out.push_back(std::move(s));
  }
  MITML_CHECK(!out.empty(), "extract: no records of modality ", modality);
  return out;
}

struct TestFeatures {
  std::vector<SeqFeature> rgb, ir;
};

inline TestFeatures extract_test_features(const Corpus& corpus,
                                          const ModelParams& model,
                                          const EvalOptions& opt) {
  const std::vector<int> test_idx = split_indices(corpus.records, "test");
  TestFeatures f;
  f.rgb = extract_features(corpus, test_idx, 0, model, opt);
  f.ir = extract_features(corpus, test_idx, 1, model, opt);
  return f;
}

inline EvalReport evaluate_direction(const TestFeatures& f, Direction dir) {
  return dir == Direction::kIrToVis ? evaluate(f.ir, f.rgb, direction_name(dir))
                                    : evaluate(f.rgb, f.ir, direction_name(dir));
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

inline constexpr const char* kEvalCsvHeader =
    "direction,r1,r5,r10,r20,map,num_queries";

namespace detail {

inline std::string fmt_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

inline void write_eval_csv(std::ostream& os,
                           const std::vector<EvalReport>& reports) {
  os << kEvalCsvHeader << "\n";
  for (const EvalReport& r : reports)
    os << r.direction << ',' << detail::fmt_metric(r.r1) << ','
       << detail::fmt_metric(r.r5) << ',' << detail::fmt_metric(r.r10) << ','
       << detail::fmt_metric(r.r20) << ',' << detail::fmt_metric(r.map) << ','
       << r.num_queries << "\n";
}

inline void render_eval_table(std::ostream& os,
                              const std::vector<EvalReport>& reports) {
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %8s %8s %9s\n",
                "direction", "R1", "R5", "R10", "R20", "mAP", "queries");
  os << line;
  for (const EvalReport& r : reports) {
    std::snprintf(line, sizeof line,
                  "%-10s %8.4f %8.4f %8.4f %8.4f %8.4f %9d\n",
                  r.direction.c_str(), r.r1, r.r5, r.r10, r.r20, r.map,
                  r.num_queries);
    os << line;
    if (r.excluded_queries > 0)
      os << "  (" << r.excluded_queries
         << " queries had no valid relevant gallery entry)\n";
  }
}

// ---------------------------------------------------------------------------
// Frame-count sweep (baseline pooling path; the TMR encoder is fixed-length)
// ---------------------------------------------------------------------------

inline std::vector<std::pair<int, EvalReport>> n_frames_sweep(
    const Corpus& corpus, const ModelParams& model, const EvalOptions& base,
    const std::vector<int>& n_values, Direction dir) {
  MITML_CHECK(!base.use_tmr,
              "n_frames_sweep: baseline pooling path only, the TMR encoder "
              "requires its training-time frame count");
  std::vector<std::pair<int, EvalReport>> rows;
  for (int n : n_values) {
    EvalOptions opt = base;
    opt.n_frames = n;
    rows.emplace_back(n, evaluate_direction(
                             extract_test_features(corpus, model, opt), dir));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Modality probe: logistic regression on frozen sequence features
// ---------------------------------------------------------------------------

/// Trains a fresh two-way linear probe on L2-normalized frozen features
/// (even-index half of each modality trains, odd-index half evaluates) and
/// returns its held-out accuracy. Near 0.5 means the encoder carries little
/// linearly readable modality information.
inline double probe_modality_accuracy(const std::vector<SeqFeature>& rgb,
                                      const std::vector<SeqFeature>& ir) {
  MITML_CHECK(rgb.size() >= 2 && ir.size() >= 2,
              "probe: need at least two features per modality");
  const std::size_t dim = rgb.front().values.size();
  const auto normalized = [dim](const SeqFeature& s) {
    MITML_CHECK(s.values.size() == dim, "probe: feature dimension mismatch");
    double nsq = 0.0;
    for (double v : s.values) nsq += v * v;
    const double inv = nsq > 0.0 ? 1.0 / std::sqrt(nsq) : 0.0;
    std::vector<double> out(s.values);
    for (double& v : out) v *= inv;
    return out;
  };
  std::vector<std::vector<double>> train_x, eval_x;
  std::vector<double> train_y, eval_y;
  const auto add = [&](const std::vector<SeqFeature>& set, double label) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (i % 2 == 0) {
        train_x.push_back(normalized(set[i]));
        train_y.push_back(label);
      } else {
        eval_x.push_back(normalized(set[i]));
        eval_y.push_back(label);
      }
    }
  };
  add(rgb, 0.0);
  add(ir, 1.0);

  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  const int iters = 300;
  const double lr = 1.0;
  // Ridge penalty: with more feature dimensions than training points an
  // unpenalized logistic fit separates any labeling and its weights diverge,
  // so the held-out score would measure overfit noise instead of signal.
  const double l2 = 0.05;
  const auto sigmoid = [](double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                    : std::exp(z) / (1.0 + std::exp(z));
  };
  for (int it = 0; it < iters; ++it) {
    std::vector<double> gw(dim, 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < train_x.size(); ++i) {
      double z = b;
      for (std::size_t d = 0; d < dim; ++d) z += w[d] * train_x[i][d];
      const double err = sigmoid(z) - train_y[i];
      for (std::size_t d = 0; d < dim; ++d) gw[d] += err * train_x[i][d];
      gb += err;
    }
    const double scale = lr / static_cast<double>(train_x.size());
    for (std::size_t d = 0; d < dim; ++d)
      w[d] -= scale * (gw[d] + l2 * static_cast<double>(train_x.size()) * w[d]);
    b -= scale * gb;
  }

  int correct = 0;
  for (std::size_t i = 0; i < eval_x.size(); ++i) {
    double z = b;
    for (std::size_t d = 0; d < dim; ++d) z += w[d] * eval_x[i][d];
    correct += (z > 0.0 ? 1.0 : 0.0) == eval_y[i];
  }
  return static_cast<double>(correct) / static_cast<double>(eval_x.size());
}

}  // namespace mitml

#endif  // MITML_EVAL_HPP
