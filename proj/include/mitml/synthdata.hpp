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

#ifndef MITML_SYNTHDATA_HPP
#define MITML_SYNTHDATA_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mitml/io.hpp"
#include "mitml/log.hpp"
#include "mitml/model.hpp"
#include "mitml/rng.hpp"
#include "mitml/tensor.hpp"

// Synthetic cross-modal tracklet corpus. Every identity is a striped
// appearance pattern plus a Gaussian blob orbiting at an identity-specific
// frequency. Confusable identity pairs share near-identical appearance and
// differ only in orbit frequency, and every tracklet gets a random temporal
// phase offset, so a single frame cannot tell pair members apart (the blob
// merely sits somewhere on the same ring) while the frame-to-frame angular
// step identifies the frequency. IR rendering collapses the three channels
// to luminance; cameras apply mild affine intensity shifts.

namespace mitml {

inline constexpr int kTrackletLen = 24;
inline constexpr int kAppearanceDim = 8;
inline constexpr int kNumCameras = 12;  // 0-5 are RGB cameras, 6-11 IR
inline constexpr double kPixelNoiseSigma = 0.02;
// Confusable pairs share the appearance vector exactly. Any nonzero gap is
// statistically readable from a few hundred stripe pixels, which would let a
// frame-averaging model tell the pair apart without ever looking at motion.
inline constexpr double kConfusableEps = 0.0;
inline constexpr double kBlobAmplitude = 0.60;
inline constexpr double kOrbitRadius = 0.35;  // fraction of frame height/width

struct IdentitySpec {
  int id = 0;
  std::vector<double> appearance;  // kAppearanceDim coords in [0,1]
  double motion_freq = 1.0;        // orbit cycles per 24-frame tracklet
  double motion_phase = 0.0;       // radians in [0, 2pi)
  int confusable_partner = -1;
};

struct BlobCenter {
  double y = 0.0, x = 0.0;
};

/// Orbit position of the moving component at (possibly fractional) frame t.
inline BlobCenter blob_center(const IdentitySpec& spec, double t, int h,
                              int w) {
  const double theta = 2.0 * std::numbers::pi * spec.motion_freq * t /
                           kTrackletLen +
                       spec.motion_phase;
  BlobCenter c;
  c.y = h * (0.5 + kOrbitRadius * std::sin(theta));
  c.x = w * (0.5 + kOrbitRadius * std::cos(theta));
  return c;
}

/// Fixed per-camera intensity model. IR sensors (cameras 6-11) sit on a
/// dimmer, positively biased response band than the RGB ones, so the two
/// modalities are separated by a systematic intensity offset on top of the
/// mild per-camera scatter, as with real visible/thermal rigs.
inline void camera_affine(int camera, double& gain, double& bias) {
  gain = 0.90 + 0.20 * ((camera * 7) % kNumCameras) / (kNumCameras - 1.0);
  bias = -0.05 + 0.10 * ((camera * 5 + 3) % kNumCameras) / (kNumCameras - 1.0);
  if (camera >= kNumCameras / 2) {
    gain -= 0.15;
    bias += 0.08;
  }
}

/// One 3xHxW frame in [0,1]: appearance stripes + orbiting blob, then the
/// modality map (IR keeps only luminance), the camera affine shift and
/// additive Gaussian pixel noise.
inline std::vector<double> render_frame(const IdentitySpec& spec, int t,
                                        ModalClass modality, int camera,
                                        Rng& noise_rng, int h, int w) {
  MITML_CHECK(t >= 0 && t < kTrackletLen, "render_frame: t=", t,
              " outside [0,", kTrackletLen, ")");
  MITML_CHECK(modality != ModalClass::kNeither,
              "render_frame: modality must be rgb or ir");
  MITML_CHECK(camera >= 0 && camera < kNumCameras, "render_frame: camera ",
              camera, " outside [0,", kNumCameras, ")");
  MITML_CHECK(spec.appearance.size() == kAppearanceDim,
              "render_frame: appearance must have ", kAppearanceDim,
              " coords");
  const auto& a = spec.appearance;
  const double two_pi = 2.0 * std::numbers::pi;

  const BlobCenter c = blob_center(spec, t, h, w);
  // Sharp enough that neighboring orbit positions give visibly different
  // frames; at h/8 the blob is as wide as the short orbit axis and motion
  // washes out.
  const double sigma = h / 12.0;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double blob_w[3] = {1.0, 0.85, 0.7};

  const double fy = 1.0 + 2.0 * a[6];
  const double fx = 0.5 + 1.5 * a[7];

  std::vector<double> px(static_cast<std::size_t>(3) * h * w);
  for (int ch = 0; ch < 3; ++ch) {
    const double base = 0.30 + 0.35 * a[ch];
    const double amp = 0.10 + 0.15 * a[3 + ch];
    const double phase = two_pi * a[(ch + 1) % 3];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double stripe =
            base + amp * std::sin(two_pi * (fy * (y + 0.5) / h +
                                            fx * (x + 0.5) / w) +
                                  phase);
        const double d2 = (y + 0.5 - c.y) * (y + 0.5 - c.y) +
                          (x + 0.5 - c.x) * (x + 0.5 - c.x);
        const double blob =
            kBlobAmplitude * blob_w[ch] * std::exp(-d2 * inv2s2);
        px[(static_cast<std::size_t>(ch) * h + y) * w + x] = stripe + blob;
      }
  }

  if (modality == ModalClass::kIr) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < plane; ++i) {
      const double lum = 0.2126 * px[i] + 0.7152 * px[plane + i] +
                         0.0722 * px[2 * plane + i];
      px[i] = px[plane + i] = px[2 * plane + i] = lum;
    }
  }

  double gain, bias;
  camera_affine(camera, gain, bias);
  for (auto& v : px) {
    v = gain * v + bias + noise_rng.normal(0.0, kPixelNoiseSigma);
    v = std::clamp(v, 0.0, 1.0);
  }
  return px;
}

// ---------------------------------------------------------------------------
// On-disk formats
// ---------------------------------------------------------------------------

struct TrackletData {
  int tracklet_id = 0;
  int identity = 0;
  int modality = 0;  // 0 rgb, 1 ir
  int camera = 0;
  int frame_count = 0;
  int height = 0, width = 0;
  std::vector<float> pixels;  // frame_count x 3 x height x width
};

inline void write_vct(std::ostream& os, const TrackletData& td) {
  MITML_CHECK(td.pixels.size() == static_cast<std::size_t>(td.frame_count) *
                                      3 * td.height * td.width,
              "vct: pixel count mismatch");
  MITML_CHECK(td.frame_count >= 1 && td.frame_count <= 255 &&
                  td.height >= 1 && td.height <= 0xffff && td.width >= 1 &&
                  td.width <= 0xffff,
              "vct: field out of range");
  detail::put_bytes(os, "VCT1", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(td.tracklet_id));
  detail::put_u32(os, static_cast<std::uint32_t>(td.identity));
  detail::put_u8(os, static_cast<std::uint8_t>(td.modality));
  detail::put_u8(os, static_cast<std::uint8_t>(td.camera));
  detail::put_u8(os, static_cast<std::uint8_t>(td.frame_count));
  detail::put_u16(os, static_cast<std::uint16_t>(td.height));
  detail::put_u16(os, static_cast<std::uint16_t>(td.width));
  for (float v : td.pixels) detail::put_f32(os, v);
}

inline TrackletData read_vct(std::istream& is) {
  detail::expect_magic(is, "VCT1", "tracklet");
  TrackletData td;
  td.tracklet_id = static_cast<int>(detail::get_u32(is));
  td.identity = static_cast<int>(detail::get_u32(is));
  td.modality = detail::get_u8(is);
  td.camera = detail::get_u8(is);
  td.frame_count = detail::get_u8(is);
  td.height = detail::get_u16(is);
  td.width = detail::get_u16(is);
  if (td.modality > 1) throw IoError("tracklet: bad modality byte");
  if (td.frame_count < 1 || td.height < 1 || td.width < 1)
    throw IoError("tracklet: empty geometry");
  td.pixels.resize(static_cast<std::size_t>(td.frame_count) * 3 * td.height *
                   td.width);
  for (auto& v : td.pixels) v = detail::get_f32(is);
  return td;
}

inline void save_vct(const std::string& path, const TrackletData& td) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  write_vct(os, td);
  os.close();
  if (!os) throw IoError("write failed: " + path);
}

inline TrackletData load_vct(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for read: " + path);
  TrackletData td = read_vct(is);
  detail::expect_eof(is, "tracklet");
  return td;
}

struct ManifestRecord {
  int tracklet_id = 0;
  int identity = 0;
  int modality = 0;
  int camera = 0;
  int frames = 0;
  std::string path;   // relative to the manifest directory
  std::string split;  // "train" or "test"
};

inline constexpr const char* kManifestHeader =
    "tracklet_id,identity,modality,camera,frames,path,split";

inline void write_manifest(const std::string& path,
                           const std::vector<ManifestRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os << kManifestHeader << "\n";
  for (const auto& r : records)
    os << r.tracklet_id << ',' << r.identity << ',' << r.modality << ','
       << r.camera << ',' << r.frames << ',' << r.path << ',' << r.split
       << "\n";
  os.close();
  if (!os) throw IoError("write failed: " + path);
}

inline std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for read: " + path);
  std::string line;
  if (!std::getline(is, line) || line != kManifestHeader)
    throw IoError("manifest: bad header in " + path);
  std::vector<ManifestRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() != 7)
      throw IoError("manifest: malformed row '" + line + "'");
    ManifestRecord r;
    r.tracklet_id = std::stoi(cols[0]);
    r.identity = std::stoi(cols[1]);
    r.modality = std::stoi(cols[2]);
    r.camera = std::stoi(cols[3]);
    r.frames = std::stoi(cols[4]);
    r.path = cols[5];
    r.split = cols[6];
    if (r.split != "train" && r.split != "test")
      throw IoError("manifest: bad split '" + r.split + "'");
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus generation
// ---------------------------------------------------------------------------

struct GenConfig {
  int num_ids = 20;
  int tracklets_per_id_per_modality = 4;
  double confusable_fraction = 0.5;
  int height = 32;
  int width = 16;
  std::uint64_t seed = 1;
};

inline IdentitySpec sample_identity(int id, std::uint64_t corpus_seed) {
  Rng rng(derive_seed(corpus_seed, static_cast<std::uint64_t>(id), 11));
  IdentitySpec s;
  s.id = id;
  s.appearance.resize(kAppearanceDim);
  for (auto& v : s.appearance) v = rng.uniform();
  s.motion_freq = rng.uniform(0.5, 2.0);
  s.motion_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return s;
}

/// Identity roster: the first 2*floor(round(num_ids*fraction)/2) identities
/// form symmetric confusable pairs (eps-close appearance, orbit frequencies
/// 1 vs 2 cycles); the rest are free draws.
inline std::vector<IdentitySpec> make_identities(const GenConfig& cfg) {
  std::vector<IdentitySpec> specs;
  specs.reserve(static_cast<std::size_t>(cfg.num_ids));
  for (int id = 0; id < cfg.num_ids; ++id)
    specs.push_back(sample_identity(id, cfg.seed));

  int n_conf = static_cast<int>(
      std::llround(cfg.num_ids * cfg.confusable_fraction));
  n_conf -= n_conf % 2;
  for (int k = 0; k + 1 < n_conf; k += 2) {
    IdentitySpec& a = specs[static_cast<std::size_t>(k)];
    IdentitySpec& b = specs[static_cast<std::size_t>(k + 1)];
    // One versus two orbit cycles per tracklet: both twins trace the same
    // closed ring, so their time-averaged occupancy matches and pooled frame
    // averages cannot separate them; only the step taken between consecutive
    // frames (angular velocity) tells them apart.
    a.motion_freq = 1.0;
    b.motion_freq = 2.0;
    b.motion_phase = a.motion_phase;
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(k + 1), 13));
    for (int i = 0; i < kAppearanceDim; ++i)
      b.appearance[static_cast<std::size_t>(i)] = std::clamp(
          a.appearance[static_cast<std::size_t>(i)] +
              rng.uniform(-kConfusableEps, kConfusableEps),
          0.0, 1.0);
    a.confusable_partner = b.id;
    b.confusable_partner = a.id;
  }
  return specs;
}

/// Train/test identity split at the 500:427 ratio, keeping confusable pairs
/// inside one split so the test set retains its hard cases.
inline std::vector<std::string> split_identities(
    const std::vector<IdentitySpec>& specs, std::uint64_t seed) {
  const int n = static_cast<int>(specs.size());
  int target = static_cast<int>(std::llround(n * 500.0 / 927.0));
  target = std::clamp(target, 1, n - 1);

  std::vector<std::vector<int>> units;
  for (const auto& s : specs) {
    if (s.confusable_partner >= 0 && s.confusable_partner < s.id) continue;
    if (s.confusable_partner >= 0)
      units.push_back({s.id, s.confusable_partner});
    else
      units.push_back({s.id});
  }
  Rng rng(derive_seed(seed, 0xA11, 17));
  rng.shuffle(units);

  std::vector<std::string> split(static_cast<std::size_t>(n), "test");
  int train_count = 0;
  for (const auto& unit : units) {
    if (train_count >= target) break;
    for (int id : unit) {
      split[static_cast<std::size_t>(id)] = "train";
      ++train_count;
    }
  }
  return split;
}

/// Renders one full 24-frame tracklet. The per-tracklet rng drives a random
/// temporal offset (a whole-tracklet phase shift: cameras are not
/// synchronized, so absolute frame indices carry no alignment information)
/// followed by the pixel noise stream.
inline TrackletData render_tracklet(const IdentitySpec& spec, int tracklet_id,
                                    ModalClass modality, int camera,
                                    std::uint64_t corpus_seed, int h, int w) {
  Rng rng(derive_seed(corpus_seed, static_cast<std::uint64_t>(tracklet_id), 7));
  const int offset = static_cast<int>(rng.below(kTrackletLen));
  IdentitySpec shifted = spec;
  shifted.motion_phase =
      std::fmod(spec.motion_phase + 2.0 * std::numbers::pi *
                                        spec.motion_freq * offset /
                                        kTrackletLen,
                2.0 * std::numbers::pi);

  TrackletData td;
  td.tracklet_id = tracklet_id;
  td.identity = spec.id;
  td.modality = static_cast<int>(modality);
  td.camera = camera;
  td.frame_count = kTrackletLen;
  td.height = h;
  td.width = w;
  td.pixels.reserve(static_cast<std::size_t>(kTrackletLen) * 3 * h * w);
  for (int t = 0; t < kTrackletLen; ++t) {
    const std::vector<double> frame =
        render_frame(shifted, t, modality, camera, rng, h, w);
    for (double v : frame) td.pixels.push_back(static_cast<float>(v));
  }
  return td;
}

/// Generates the corpus under out_dir: tracklet files plus manifest.csv.
/// Each identity is captured by 3 RGB and 3 IR cameras (tracklets cycle
/// through them), and the identity split keeps pairs together.
inline std::vector<ManifestRecord> generate_corpus(const std::string& out_dir,
                                                   const GenConfig& cfg) {
  MITML_CHECK(cfg.num_ids >= 4, "gen: need at least 4 identities, got ",
              cfg.num_ids);
  MITML_CHECK(cfg.confusable_fraction >= 0.0 && cfg.confusable_fraction <= 1.0,
              "gen: confusable_fraction must be in [0,1], got ",
              cfg.confusable_fraction);
  MITML_CHECK(cfg.tracklets_per_id_per_modality >= 1,
              "gen: tracklets_per_id_per_modality must be positive");
  MITML_CHECK(cfg.height >= 8 && cfg.width >= 8, "gen: frames below 8x8");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "tracklets", ec);
  if (ec)
    throw IoError("cannot create output directory: " + out_dir + ": " +
                  ec.message());

  const std::vector<IdentitySpec> specs = make_identities(cfg);
  const std::vector<std::string> split = split_identities(specs, cfg.seed);

  std::vector<ManifestRecord> records;
  int tid = 0;
  for (const auto& spec : specs) {
    Rng cam_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(spec.id), 19));
    std::vector<int> rgb_cams{0, 1, 2, 3, 4, 5};
    std::vector<int> ir_cams{6, 7, 8, 9, 10, 11};
    cam_rng.shuffle(rgb_cams);
    cam_rng.shuffle(ir_cams);
    rgb_cams.resize(3);
    ir_cams.resize(3);
    for (const ModalClass modality : {ModalClass::kRgb, ModalClass::kIr}) {
      const auto& cams =
          modality == ModalClass::kRgb ? rgb_cams : ir_cams;
      for (int j = 0; j < cfg.tracklets_per_id_per_modality; ++j, ++tid) {
        const int camera = cams[static_cast<std::size_t>(j) % cams.size()];
        const TrackletData td = render_tracklet(
            spec, tid, modality, camera, cfg.seed, cfg.height, cfg.width);
        char name[32];
        std::snprintf(name, sizeof(name), "tracklets/t%05d.vct", tid);
        save_vct((fs::path(out_dir) / name).string(), td);
        ManifestRecord r;
        r.tracklet_id = tid;
        r.identity = spec.id;
        r.modality = static_cast<int>(modality);
        r.camera = camera;
        r.frames = kTrackletLen;
        r.path = name;
        r.split = split[static_cast<std::size_t>(spec.id)];
        records.push_back(std::move(r));
      }
    }
  }
  write_manifest((fs::path(out_dir) / "manifest.csv").string(), records);
  MITML_LOG(kInfo, "generated " << records.size() << " tracklets under "
                                << out_dir);
  return records;
}

// ---------------------------------------------------------------------------
// Loading and batch assembly
// ---------------------------------------------------------------------------

struct Corpus {
  std::vector<ManifestRecord> records;
  std::vector<TrackletData> tracklets;  // aligned with records
  int height = 0, width = 0;
};

inline Corpus load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  Corpus c;
  c.records = read_manifest((fs::path(dir) / "manifest.csv").string());
  MITML_CHECK(!c.records.empty(), "corpus: empty manifest in ", dir);
  c.tracklets.reserve(c.records.size());
  for (const auto& r : c.records) {
    TrackletData td = load_vct((fs::path(dir) / r.path).string());
    MITML_CHECK(td.tracklet_id == r.tracklet_id &&
                    td.identity == r.identity && td.modality == r.modality &&
                    td.camera == r.camera && td.frame_count == r.frames,
                "corpus: manifest row disagrees with file ", r.path);
    c.tracklets.push_back(std::move(td));
  }
  c.height = c.tracklets.front().height;
  c.width = c.tracklets.front().width;
  for (const auto& td : c.tracklets)
    MITML_CHECK(td.height == c.height && td.width == c.width,
                "corpus: mixed frame sizes");
  return c;
}

/// Indices into `records` whose split matches ("train" or "test").
inline std::vector<int> split_indices(const std::vector<ManifestRecord>& records,
                                      const std::string& split) {
  std::vector<int> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].split == split) out.push_back(static_cast<int>(i));
  MITML_CHECK(!out.empty(), "corpus: no records in split '", split, "'");
  return out;
}

/// Selected frames of a tracklet as a [n x 3 x H x W] float64 tensor.
inline Tensor frames_tensor(const TrackletData& td,
                            const std::vector<int>& frame_indices) {
  MITML_CHECK(!frame_indices.empty(), "frames_tensor: no frames selected");
  const std::size_t plane = static_cast<std::size_t>(3) * td.height * td.width;
  std::vector<double> data;
  data.reserve(frame_indices.size() * plane);
  for (int t : frame_indices) {
    MITML_CHECK(t >= 0 && t < td.frame_count, "frames_tensor: frame ", t,
                " outside [0,", td.frame_count, ")");
    const float* src = td.pixels.data() + static_cast<std::size_t>(t) * plane;
    for (std::size_t i = 0; i < plane; ++i)
      data.push_back(static_cast<double>(src[i]));
  }
  return Tensor::from_data({static_cast<int>(frame_indices.size()), 3,
                            td.height, td.width},
                           std::move(data));
}

/// Mirrors every frame of [n x C x H x W] horizontally.
inline Tensor hflip(const Tensor& frames) {
  MITML_CHECK(frames.rank() == 4, "hflip: frames must be [n x C x H x W]");
  const int planes = frames.dim(0) * frames.dim(1);
  const int h = frames.dim(2), w = frames.dim(3);
  const auto& src = frames.data();
  std::vector<double> out(src.size());
  for (int pl = 0; pl < planes; ++pl) {
    const double* sp = src.data() + static_cast<std::size_t>(pl) * h * w;
    double* dp = out.data() + static_cast<std::size_t>(pl) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) dp[y * w + x] = sp[y * w + (w - 1 - x)];
  }
  return Tensor::from_data(frames.shape(), std::move(out));
}

/// Zero-pads every frame by `pad` on each side, then crops HxW back at the
/// shared offset (dy, dx) in [0, 2*pad].
inline Tensor crop_shift(const Tensor& frames, int dy, int dx, int pad) {
  MITML_CHECK(frames.rank() == 4, "crop_shift: frames must be [n x C x H x W]");
  MITML_CHECK(pad >= 0 && dy >= 0 && dy <= 2 * pad && dx >= 0 && dx <= 2 * pad,
              "crop_shift: offset (", dy, ",", dx, ") outside [0,", 2 * pad,
              "]");
  const int planes = frames.dim(0) * frames.dim(1);
  const int h = frames.dim(2), w = frames.dim(3);
  const auto& src = frames.data();
  std::vector<double> out(src.size(), 0.0);
  for (int pl = 0; pl < planes; ++pl) {
    const double* sp = src.data() + static_cast<std::size_t>(pl) * h * w;
    double* dp = out.data() + static_cast<std::size_t>(pl) * h * w;
    for (int y = 0; y < h; ++y) {
      const int sy = y + dy - pad;
      if (sy < 0 || sy >= h) continue;
      for (int x = 0; x < w; ++x) {
        const int sx = x + dx - pad;
        if (sx >= 0 && sx < w) dp[y * w + x] = sp[sy * w + sx];
      }
    }
  }
  return Tensor::from_data(frames.shape(), std::move(out));
}

/// Tracklet-consistent augmentation: one coin flip mirrors every frame
/// horizontally, then all frames are zero-padded by 4 on each side and
/// cropped back at one shared random offset. Draw order: flip, dy, dx.
inline Tensor augment(const Tensor& frames, Rng& rng, bool enable) {
  if (!enable) return frames;
  MITML_CHECK(frames.rank() == 4 && frames.dim(1) == 3,
              "augment: frames must be [n x 3 x H x W], got ",
              shape_str(frames.shape()));
  const bool flip = rng.bernoulli(0.5);
  const int pad = 4;
  const int dy = static_cast<int>(rng.below(2 * pad + 1));
  const int dx = static_cast<int>(rng.below(2 * pad + 1));
  return crop_shift(flip ? hflip(frames) : frames, dy, dx, pad);
}

}  // namespace mitml

#endif  // MITML_SYNTHDATA_HPP
