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

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "mitml/synthdata.hpp"
#include "test_helpers.hpp"

using mitml::GenConfig;
using mitml::ManifestRecord;
using mitml::ModalClass;
using mitml::Tensor;
using mitml::TrackletData;

namespace {

GenConfig small_cfg() {
  GenConfig cfg;
  cfg.num_ids = 8;
  cfg.tracklets_per_id_per_modality = 2;
  cfg.height = 16;
  cfg.width = 8;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("regenerating a corpus reproduces every byte") {
  testutil::TempDir dir("regen");
  const GenConfig cfg = small_cfg();
  const auto r1 = mitml::generate_corpus(dir.sub("a"), cfg);
  const auto r2 = mitml::generate_corpus(dir.sub("b"), cfg);
  REQUIRE(r1.size() == r2.size());

  namespace fs = std::filesystem;
  CHECK(testutil::read_file((fs::path(dir.sub("a")) / "manifest.csv").string()) ==
        testutil::read_file((fs::path(dir.sub("b")) / "manifest.csv").string()));
  for (const auto& r : r1)
    CHECK(testutil::read_file((fs::path(dir.sub("a")) / r.path).string()) ==
          testutil::read_file((fs::path(dir.sub("b")) / r.path).string()));
}

TEST_CASE("the default roster splits 20 identities into 96/64 tracklets") {
  testutil::TempDir dir("split");
  const auto records = mitml::generate_corpus(dir.str(), GenConfig{});
  REQUIRE(records.size() == 160);

  int train = 0, test = 0;
  std::set<int> train_ids, test_ids;
  for (const auto& r : records) {
    if (r.split == "train") {
      ++train;
      train_ids.insert(r.identity);
    } else {
      ++test;
      test_ids.insert(r.identity);
    }
  }
  CHECK(train == 96);
  CHECK(test == 64);
  CHECK(train_ids.size() == 12);
  CHECK(test_ids.size() == 8);
  for (int id : train_ids) CHECK(test_ids.count(id) == 0);
}

TEST_CASE("every identity is captured by several cameras per modality") {
  testutil::TempDir dir("cams");
  const auto records = mitml::generate_corpus(dir.str(), small_cfg());
  std::map<std::pair<int, int>, std::set<int>> cams;
  for (const auto& r : records) {
    cams[{r.identity, r.modality}].insert(r.camera);
    if (r.modality == 0)
      CHECK((r.camera >= 0 && r.camera <= 5));
    else
      CHECK((r.camera >= 6 && r.camera <= 11));
  }
  for (const auto& [key, set] : cams) CHECK(set.size() >= 2);
}

TEST_CASE("confusable pairs share appearance and phase but not frequency") {
  GenConfig cfg;
  cfg.num_ids = 20;
  cfg.confusable_fraction = 0.5;
  const auto specs = mitml::make_identities(cfg);
  REQUIRE(specs.size() == 20);

  for (int a = 0; a < 10; a += 2) {
    const auto& lead = specs[static_cast<std::size_t>(a)];
    const auto& twin = specs[static_cast<std::size_t>(a + 1)];
    CHECK(lead.confusable_partner == a + 1);
    CHECK(twin.confusable_partner == a);
    CHECK(lead.motion_freq == 1.0);
    CHECK(twin.motion_freq == 2.0);
    CHECK(twin.motion_phase == lead.motion_phase);
    for (std::size_t d = 0; d < lead.appearance.size(); ++d)
      CHECK(std::abs(lead.appearance[d] - twin.appearance[d]) <=
            mitml::kConfusableEps + 1e-12);
  }
  for (int id = 10; id < 20; ++id)
    CHECK(specs[static_cast<std::size_t>(id)].confusable_partner == -1);
}

TEST_CASE("the orbit is symmetric half a cycle apart") {
  mitml::IdentitySpec spec;
  spec.appearance.assign(mitml::kAppearanceDim, 0.5);
  spec.motion_freq = 1.0;
  spec.motion_phase = 0.7;
  const auto p0 = mitml::blob_center(spec, 0.0, 32, 16);
  const auto p12 = mitml::blob_center(spec, 12.0, 32, 16);
  CHECK_THAT(p0.y + p12.y, Catch::Matchers::WithinAbs(32.0, 1e-9));
  CHECK_THAT(p0.x + p12.x, Catch::Matchers::WithinAbs(16.0, 1e-9));
}

TEST_CASE("rendered pixels stay inside the unit interval") {
  const auto specs = mitml::make_identities(small_cfg());
  const TrackletData td =
      mitml::render_tracklet(specs[0], 0, ModalClass::kIr, 7, 5, 16, 8);
  REQUIRE(td.pixels.size() == 24u * 3u * 16u * 8u);
  for (float v : td.pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("cameras imprint distinct responses") {
  const auto specs = mitml::make_identities(small_cfg());
  mitml::Rng r1(3), r2(3);
  const auto a = mitml::render_frame(specs[0], 0, ModalClass::kRgb, 0, r1, 16, 8);
  const auto b = mitml::render_frame(specs[0], 0, ModalClass::kRgb, 1, r2, 16, 8);
  CHECK(testutil::l2_diff(a, b) > 0.0);
}

TEST_CASE("tracklet files round trip through the binary format") {
  const auto specs = mitml::make_identities(small_cfg());
  const TrackletData td =
      mitml::render_tracklet(specs[1], 3, ModalClass::kRgb, 2, 5, 16, 8);

  std::ostringstream os(std::ios::binary);
  mitml::write_vct(os, td);
  const std::string bytes = os.str();
  CHECK(bytes.compare(0, 4, "VCT1") == 0);

  std::istringstream is(bytes, std::ios::binary);
  const TrackletData back = mitml::read_vct(is);
  CHECK(back.tracklet_id == td.tracklet_id);
  CHECK(back.identity == td.identity);
  CHECK(back.modality == td.modality);
  CHECK(back.camera == td.camera);
  CHECK(back.frame_count == td.frame_count);
  CHECK(back.height == td.height);
  CHECK(back.width == td.width);
  CHECK(back.pixels == td.pixels);

  std::ostringstream os2(std::ios::binary);
  mitml::write_vct(os2, back);
  CHECK(os2.str() == bytes);
}

TEST_CASE("corrupt tracklet files are rejected") {
  const auto specs = mitml::make_identities(small_cfg());
  const TrackletData td =
      mitml::render_tracklet(specs[0], 0, ModalClass::kRgb, 0, 5, 16, 8);
  std::ostringstream os(std::ios::binary);
  mitml::write_vct(os, td);
  std::string bytes = os.str();

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  {
    std::istringstream is(bad_magic, std::ios::binary);
    CHECK_THROWS(mitml::read_vct(is));
  }
  {
    std::istringstream is(bytes.substr(0, bytes.size() - 5), std::ios::binary);
    CHECK_THROWS(mitml::read_vct(is));
  }
}

TEST_CASE("the manifest round trips and rejects corruption") {
  testutil::TempDir dir("manifest");
  std::vector<ManifestRecord> records;
  for (int i = 0; i < 4; ++i) {
    ManifestRecord r;
    r.tracklet_id = i;
    r.identity = i / 2;
    r.modality = i % 2;
    r.camera = i % 2 == 0 ? 1 : 7;
    r.frames = 24;
    r.path = "tracklets/t" + std::to_string(i) + ".vct";
    r.split = i < 2 ? "train" : "test";
    records.push_back(r);
  }
  const std::string path = dir.sub("manifest.csv");
  mitml::write_manifest(path, records);

  const auto back = mitml::read_manifest(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].tracklet_id == records[i].tracklet_id);
    CHECK(back[i].identity == records[i].identity);
    CHECK(back[i].modality == records[i].modality);
    CHECK(back[i].camera == records[i].camera);
    CHECK(back[i].frames == records[i].frames);
    CHECK(back[i].path == records[i].path);
    CHECK(back[i].split == records[i].split);
  }

  const auto write_text = [&dir](const std::string& text) {
    const std::string p = dir.sub("bad.csv");
    std::ofstream os(p);
    os << text;
    os.close();
    return p;
  };
  CHECK_THROWS(mitml::read_manifest(
      write_text("wrong,header\n0,0,0,1,24,a.vct,train\n")));
  CHECK_THROWS(mitml::read_manifest(write_text(
      std::string(mitml::kManifestHeader) + "\n0,0,0,1,24,a.vct\n")));
  CHECK_THROWS(mitml::read_manifest(write_text(
      std::string(mitml::kManifestHeader) + "\n0,0,0,1,24,a.vct,val\n")));
  // A headered manifest with no rows parses; rejecting it is the corpus
  // loader's job.
  CHECK(mitml::read_manifest(
            write_text(std::string(mitml::kManifestHeader) + "\n"))
            .empty());
}

TEST_CASE("load_corpus cross-checks the manifest against the files") {
  testutil::TempDir dir("corpus");
  mitml::generate_corpus(dir.str(), small_cfg());
  const mitml::Corpus c = mitml::load_corpus(dir.str());
  REQUIRE(c.records.size() == 32);
  REQUIRE(c.tracklets.size() == 32);
  CHECK(c.height == 16);
  CHECK(c.width == 8);
  for (std::size_t i = 0; i < c.records.size(); ++i)
    CHECK(c.records[i].tracklet_id == c.tracklets[i].tracklet_id);

  // Overwrite one tracklet file with another to break the cross-check.
  namespace fs = std::filesystem;
  fs::copy_file(fs::path(dir.str()) / "tracklets/t00001.vct",
                fs::path(dir.str()) / "tracklets/t00000.vct",
                fs::copy_options::overwrite_existing);
  CHECK_THROWS(mitml::load_corpus(dir.str()));
}

TEST_CASE("split_indices partitions records by split name") {
  testutil::TempDir dir("splitidx");
  const auto records = mitml::generate_corpus(dir.str(), small_cfg());
  const auto train = mitml::split_indices(records, "train");
  const auto test = mitml::split_indices(records, "test");
  CHECK(train.size() + test.size() == records.size());
  for (int i : train)
    CHECK(records[static_cast<std::size_t>(i)].split == "train");
  CHECK_THROWS(mitml::split_indices(records, "val"));
}

TEST_CASE("frames_tensor selects the requested frames") {
  TrackletData td;
  td.frame_count = 3;
  td.height = 2;
  td.width = 2;
  td.pixels.resize(3u * 3u * 2u * 2u);
  for (std::size_t i = 0; i < td.pixels.size(); ++i)
    td.pixels[i] = static_cast<float>(i) / 100.0f;

  const Tensor t = mitml::frames_tensor(td, {0, 2});
  REQUIRE(t.shape() == mitml::Shape{2, 3, 2, 2});
  CHECK_THAT(t[0], Catch::Matchers::WithinAbs(0.0, 1e-12));
  // The second selected frame starts at pixel 24 of the flat buffer.
  CHECK_THAT(t[12], Catch::Matchers::WithinAbs(0.24, 1e-6));

  CHECK_THROWS(mitml::frames_tensor(td, {3}));
  CHECK_THROWS(mitml::frames_tensor(td, {-1}));
  CHECK_THROWS(mitml::frames_tensor(td, {}));
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

TEST_CASE("augmentation can be disabled entirely") {
  mitml::Rng rng(1);
  const Tensor frames = testutil::random_tensor(rng, {2, 3, 6, 4}, 0, 1);
  const Tensor out = mitml::augment(frames, rng, false);
  CHECK(out.data() == frames.data());
}

TEST_CASE("horizontal flip reverses rows and is an involution") {
  const Tensor x = Tensor::from_data({1, 1, 1, 3}, {1.0, 2.0, 3.0});
  CHECK(mitml::hflip(x).data() == std::vector<double>{3.0, 2.0, 1.0});

  mitml::Rng rng(2);
  const Tensor frames = testutil::random_tensor(rng, {2, 3, 5, 4}, 0, 1);
  CHECK(mitml::hflip(mitml::hflip(frames)).data() == frames.data());
}

TEST_CASE("crop_shift slides the frame across zero padding") {
  std::vector<double> px(36);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = 1.0 + static_cast<double>(i);
  const Tensor frames = Tensor::from_data({1, 1, 6, 6}, px);

  // Centered offset is the identity.
  CHECK(mitml::crop_shift(frames, 4, 4, 4).data() == frames.data());

  // Offset (0,0) drags the content down-right by the pad width.
  const Tensor shifted = mitml::crop_shift(frames, 0, 0, 4);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      const double got = shifted[y * 6 + x];
      const double want =
          (y >= 4 && x >= 4) ? frames[(y - 4) * 6 + (x - 4)] : 0.0;
      CHECK(got == want);
    }

  CHECK_THROWS(mitml::crop_shift(frames, 9, 0, 4));
  CHECK_THROWS(mitml::crop_shift(frames, 0, -1, 4));
}

TEST_CASE("augmentation is tracklet-consistent and deterministic") {
  mitml::Rng data_rng(3);
  const Tensor frames = testutil::random_tensor(data_rng, {3, 3, 10, 10}, 0, 1);
  mitml::Rng a(9), b(9);
  const Tensor out_a = mitml::augment(frames, a, true);
  const Tensor out_b = mitml::augment(frames, b, true);
  CHECK(out_a.data() == out_b.data());
  CHECK(out_a.shape() == frames.shape());
}

// ---------------------------------------------------------------------------
// Temporal signal
// ---------------------------------------------------------------------------

namespace {

double frame_distance(const std::vector<float>& a, const std::vector<float>& b,
                      std::size_t offset_a, std::size_t offset_b,
                      std::size_t plane) {
  double sq = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    const double d = static_cast<double>(a[offset_a + i]) -
                     static_cast<double>(b[offset_b + i]);
    sq += d * d;
  }
  return sq;
}

// Mean squared frame distance under the best cyclic alignment.
double sequence_distance(const TrackletData& q, const TrackletData& g) {
  const std::size_t plane =
      static_cast<std::size_t>(3) * q.height * q.width;
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < q.frame_count; ++s) {
    double total = 0.0;
    for (int t = 0; t < q.frame_count; ++t) {
      const int u = (t + s) % q.frame_count;
      total += frame_distance(q.pixels, g.pixels,
                              static_cast<std::size_t>(t) * plane,
                              static_cast<std::size_t>(u) * plane, plane);
    }
    best = std::min(best, total / q.frame_count);
  }
  return best;
}

}  // namespace

TEST_CASE("motion makes sequences more identifiable than single frames") {
  testutil::TempDir dir("nn");
  mitml::generate_corpus(dir.str(), small_cfg());
  const mitml::Corpus c = mitml::load_corpus(dir.str());

  // Same-modality nearest neighbor isolates the temporal signal: confusable
  // identities share appearance, so single frames confuse them while aligned
  // sequences separate the orbit frequencies.
  std::vector<int> rgb;
  for (std::size_t i = 0; i < c.records.size(); ++i)
    if (c.records[i].modality == 0) rgb.push_back(static_cast<int>(i));

  const std::size_t plane = static_cast<std::size_t>(3) * c.height * c.width;
  int single_hits = 0, seq_hits = 0;
  for (int qi : rgb) {
    const auto& q = c.tracklets[static_cast<std::size_t>(qi)];
    double best_single = std::numeric_limits<double>::infinity();
    double best_seq = std::numeric_limits<double>::infinity();
    int single_id = -1, seq_id = -1;
    for (int gi : rgb) {
      if (gi == qi) continue;
      const auto& g = c.tracklets[static_cast<std::size_t>(gi)];
      const double ds = frame_distance(q.pixels, g.pixels, 0, 0, plane);
      if (ds < best_single) {
        best_single = ds;
        single_id = g.identity;
      }
      const double dq = sequence_distance(q, g);
      if (dq < best_seq) {
        best_seq = dq;
        seq_id = g.identity;
      }
    }
    single_hits += single_id == q.identity ? 1 : 0;
    seq_hits += seq_id == q.identity ? 1 : 0;
  }

  INFO("single-frame hits " << single_hits << ", sequence hits " << seq_hits
                            << " of " << rgb.size());
  CHECK(seq_hits > single_hits);
  CHECK(seq_hits >= static_cast<int>(rgb.size() * 3) / 4);
}
