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

#ifndef MITML_SAMPLER_HPP
#define MITML_SAMPLER_HPP

#include <map>
#include <vector>

#include "mitml/log.hpp"
#include "mitml/rng.hpp"
#include "mitml/synthdata.hpp"
#include "mitml/tensor.hpp"

// Batch construction. Frames inside a tracklet are picked by the chunk rule
// (split 24 frames into n chunks, one uniform pick per chunk); tracklets are
// picked by a PK sampler that balances identities and modalities.

namespace mitml {

/// Chunk rule: index k is uniform on [k*c, (k+1)*c - 1] with c = len/n.
/// The result is strictly increasing by construction.
inline std::vector<int> chunk_frame_sampler(int tracklet_len, int n,
                                            Rng& rng) {
  MITML_CHECK(tracklet_len >= 1 && n >= 1 && tracklet_len % n == 0,
              "chunk_frame_sampler: n=", n, " must divide tracklet length ",
              tracklet_len);
  const int c = tracklet_len / n;
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    idx[static_cast<std::size_t>(k)] =
        k * c + static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
  return idx;
}

/// Deterministic evaluation-time counterpart: the middle frame of each chunk.
inline std::vector<int> eval_frame_indices(int tracklet_len, int n) {
  MITML_CHECK(tracklet_len >= 1 && n >= 1 && tracklet_len % n == 0,
              "eval_frame_indices: n=", n, " must divide tracklet length ",
              tracklet_len);
  const int c = tracklet_len / n;
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) idx[static_cast<std::size_t>(k)] = k * c + c / 2;
  return idx;
}

namespace detail {

/// Draws items in shuffled order without replacement; reshuffles when the
/// pass is exhausted. The first draw shuffles too, so a fresh queue is
/// already randomized.
struct ShuffledQueue {
  std::vector<int> items;
  std::size_t cursor = 0;
  bool primed = false;

  int draw(Rng& rng) {
    if (!primed || cursor >= items.size()) {
      rng.shuffle(items);
      cursor = 0;
      primed = true;
    }
    return items[cursor++];
  }
};

}  // namespace detail

/// P identities per batch, K/2 RGB + K/2 IR tracklets per identity, all
/// drawn from per-pool shuffled queues without replacement until a pool is
/// exhausted. Identities lacking either modality are excluded up front.
class PkBatchSampler {
 public:
  PkBatchSampler(const std::vector<ManifestRecord>& records,
                 const std::vector<int>& record_indices, int p, int k)
      : p_(p), k_(k) {
    MITML_CHECK(p >= 2, "pk sampler: P must be >= 2, got ", p);
    MITML_CHECK(k >= 2 && k % 2 == 0, "pk sampler: K must be even >= 2, got ",
                k);
    std::map<int, std::pair<std::vector<int>, std::vector<int>>> by_id;
    for (int ri : record_indices) {
      const auto& r = records[static_cast<std::size_t>(ri)];
      auto& pools = by_id[r.identity];
      (r.modality == 0 ? pools.first : pools.second).push_back(ri);
    }
    for (auto& [id, pools] : by_id) {
      if (pools.first.empty() || pools.second.empty()) {
        MITML_LOG(kInfo, "pk sampler: identity " << id
                                                 << " lacks one modality, "
                                                    "excluded");
        continue;
      }
      ids_.items.push_back(id);
      rgb_[id].items = std::move(pools.first);
      ir_[id].items = std::move(pools.second);
    }
    MITML_CHECK(static_cast<int>(ids_.items.size()) >= p,
                "pk sampler: need >= ", p, " usable identities, have ",
                ids_.items.size());
  }

  int num_identities() const { return static_cast<int>(ids_.items.size()); }

  int rgb_pool_size() const {
    int n = 0;
    for (const auto& [id, q] : rgb_) n += static_cast<int>(q.items.size());
    return n;
  }
  int ir_pool_size() const {
    int n = 0;
    for (const auto& [id, q] : ir_) n += static_cast<int>(q.items.size());
    return n;
  }

  /// One batch of P*K record indices: for each of P distinct identities,
  /// K/2 RGB followed by K/2 IR tracklets.
  std::vector<int> next_batch(Rng& rng) {
    std::vector<int> chosen_ids;
    while (static_cast<int>(chosen_ids.size()) < p_) {
      const int id = ids_.draw(rng);
      bool seen = false;
      for (int c : chosen_ids) seen = seen || c == id;
      if (!seen) chosen_ids.push_back(id);
    }
    std::vector<int> batch;
    batch.reserve(static_cast<std::size_t>(p_) * k_);
    for (int id : chosen_ids) {
      for (int j = 0; j < k_ / 2; ++j) batch.push_back(rgb_[id].draw(rng));
      for (int j = 0; j < k_ / 2; ++j) batch.push_back(ir_[id].draw(rng));
    }
    return batch;
  }

 private:
  int p_, k_;
  detail::ShuffledQueue ids_;
  std::map<int, detail::ShuffledQueue> rgb_, ir_;
};

}  // namespace mitml

#endif  // MITML_SAMPLER_HPP
