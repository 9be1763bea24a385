#include "lttd/synthdata.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "lttd/dataset.hpp"
#include "test_util.hpp"

namespace lttd {
namespace {

namespace fs = std::filesystem;

SynthConfig desk_config() {
  SynthConfig cfg;
  cfg.frames = 8;
  return cfg;
}

bool same_values(const TensorF& a, const TensorF& b) {
  if (a.shape() != b.shape()) return false;
  for (int64_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

TEST(SynthData, GenerationIsDeterministic) {
  const SynthConfig cfg = desk_config();
  EXPECT_TRUE(same_values(gen_real(cfg, 3).clip.frames, gen_real(cfg, 3).clip.frames));
  EXPECT_TRUE(same_values(gen_fake(cfg, 3).clip.frames, gen_fake(cfg, 3).clip.frames));
  EXPECT_FALSE(same_values(gen_real(cfg, 3).clip.frames, gen_real(cfg, 4).clip.frames));
  SynthConfig other = cfg;
  other.seed = 1;
  EXPECT_FALSE(same_values(gen_real(cfg, 3).clip.frames, gen_real(other, 3).clip.frames));
}

TEST(SynthData, ShapesLabelsAndRange) {
  const SynthConfig cfg = desk_config();
  const Clip real = gen_real(cfg, 0).clip;
  const Clip fake = gen_fake(cfg, 0).clip;
  EXPECT_EQ(real.frames.shape(), (num::Shape{3, 8, 64, 64}));
  EXPECT_EQ(real.label, Label::kReal);
  EXPECT_EQ(fake.label, Label::kFake);
  EXPECT_NO_THROW(validate_clip(real));
  EXPECT_NO_THROW(validate_clip(fake));
  for (const Clip* c : {&real, &fake})
    for (int64_t i = 0; i < c->frames.numel(); ++i) {
      ASSERT_GE(c->frames[i], 0.0f);
      ASSERT_LE(c->frames[i], 1.0f);
    }
}

TEST(SynthData, LabelMatchesMaskSupport) {
  const SynthConfig cfg = desk_config();
  for (uint64_t i = 0; i < 5; ++i) {
    const Clip real = gen_real(cfg, i).clip;
    const Clip fake = gen_fake(cfg, i).clip;
    ASSERT_TRUE(real.mask && fake.mask);
    double real_sum = 0.0, fake_sum = 0.0;
    for (int64_t k = 0; k < real.mask->numel(); ++k) real_sum += (*real.mask)[k];
    for (int64_t k = 0; k < fake.mask->numel(); ++k) fake_sum += (*fake.mask)[k];
    EXPECT_EQ(real_sum, 0.0);
    EXPECT_GT(fake_sum, 0.0);
  }
}

TEST(SynthData, FakeMaskIsSoftEllipseReplicatedPerFrame) {
  const SynthConfig cfg = desk_config();
  const Clip fake = gen_fake(cfg, 2).clip;
  const TensorF m = face_mask(cfg, 2);
  const int64_t hw = 64 * 64;
  bool has_one = false, has_fraction = false, has_zero = false;
  for (int64_t k = 0; k < hw; ++k) {
    has_one |= m[k] == 1.0f;
    has_zero |= m[k] == 0.0f;
    has_fraction |= m[k] > 0.0f && m[k] < 1.0f;
    for (int64_t t = 0; t < 8; ++t) ASSERT_EQ((*fake.mask)[t * hw + k], m[k]);
  }
  EXPECT_TRUE(has_one && has_zero && has_fraction);
  // Corners lie outside any admissible ellipse.
  EXPECT_EQ(m[0], 0.0f);
  EXPECT_EQ(m[hw - 1], 0.0f);
}

TEST(SynthData, StaticCameraWithoutSensorNoiseGivesIdenticalFrames) {
  SynthConfig cfg = desk_config();
  cfg.shake_amp = 0.0;
  cfg.sensor_noise = 0.0;
  const Clip c = gen_real(cfg, 1).clip;
  const int64_t hw = 64 * 64;
  for (int64_t ch = 0; ch < 3; ++ch)
    for (int64_t t = 1; t < 8; ++t)
      for (int64_t k = 0; k < hw; ++k)
        ASSERT_EQ(c.frames[(ch * 8 + t) * hw + k], c.frames[(ch * 8) * hw + k]);
}

TEST(SynthData, StaticCameraFramesDifferOnlyBySensorNoise) {
  SynthConfig cfg = desk_config();
  cfg.shake_amp = 0.0;
  cfg.sensor_noise = 0.01;
  const Clip c = gen_real(cfg, 1).clip;
  const int64_t hw = 64 * 64;
  double ss = 0.0;
  int64_t n = 0;
  for (int64_t ch = 0; ch < 3; ++ch)
    for (int64_t k = 0; k < hw; ++k) {
      const double d = c.frames[(ch * 8 + 1) * hw + k] - c.frames[(ch * 8) * hw + k];
      ss += d * d;
      ++n;
    }
  // Difference of two independent N(0, 0.01²) draws.
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(n)), 0.01 * std::sqrt(2.0), 0.001);
}

TEST(SynthData, VanishingInconsistencyApproachesPairedReal) {
  SynthConfig cfg = desk_config();
  cfg.inconsistency_amp = 1e-9;
  const Clip real = gen_real(cfg, 5).clip;
  const Clip fake = gen_fake(cfg, 5).clip;
  double worst = 0.0;
  for (int64_t i = 0; i < real.frames.numel(); ++i)
    worst = std::max(worst, std::abs(double(real.frames[i]) - fake.frames[i]));
  EXPECT_LT(worst, 1e-5);
  cfg.inconsistency_amp = 0.0;
  EXPECT_THROW(gen_fake(cfg, 5), ParameterError);
}

TEST(SynthData, ConfigValidation) {
  SynthConfig cfg;
  cfg.height = 0;
  EXPECT_THROW(gen_real(cfg, 0), ParameterError);
  cfg = SynthConfig{};
  cfg.axis_min = 20.0;
  cfg.axis_max = 10.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = SynthConfig{};
  cfg.shake_amp = -1.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
}

// Aggregate statistics over 100 real/fake pairs, computed once.
struct CorpusStats {
  double real_in = 0, real_out = 0, fake_in = 0, fake_out = 0;
  double worst_mean_rel = 0, worst_var_rel = 0;
};

// Mean absolute temporal difference inside the mask core and strictly outside.
std::pair<double, double> temporal_energy(const Clip& c, const TensorF& mask) {
  const int64_t t = c.length(), hw = c.height() * c.width();
  double si = 0, so = 0;
  int64_t ni = 0, no = 0;
  for (int64_t ch = 0; ch < 3; ++ch)
    for (int64_t f = 0; f + 1 < t; ++f)
      for (int64_t k = 0; k < hw; ++k) {
        const double d = std::abs(double(c.frames[(ch * t + f + 1) * hw + k]) -
                                  c.frames[(ch * t + f) * hw + k]);
        if (mask[k] >= 0.999f) {
          si += d;
          ++ni;
        } else if (mask[k] == 0.0f) {
          so += d;
          ++no;
        }
      }
  return {si / double(ni), so / double(no)};
}

const CorpusStats& corpus_stats() {
  static const CorpusStats stats = [] {
    const SynthConfig cfg = desk_config();
    CorpusStats s;
    const int64_t t = cfg.frames, hw = cfg.height * cfg.width;
    for (uint64_t i = 0; i < 100; ++i) {
      const Clip real = gen_real(cfg, i).clip;
      const Clip fake = gen_fake(cfg, i).clip;
      const TensorF mask = face_mask(cfg, i);
      const auto [ri, ro] = temporal_energy(real, mask);
      const auto [fi, fo] = temporal_energy(fake, mask);
      s.real_in += ri;
      s.real_out += ro;
      s.fake_in += fi;
      s.fake_out += fo;
      for (int64_t ch = 0; ch < 3; ++ch)
        for (int64_t f = 0; f < t; ++f) {
          double s1 = 0, q1 = 0, s2 = 0, q2 = 0, n = 0;
          for (int64_t k = 0; k < hw; ++k) {
            if (mask[k] < 0.999f) continue;
            const double a = real.frames[(ch * t + f) * hw + k];
            const double b = fake.frames[(ch * t + f) * hw + k];
            s1 += a;
            q1 += a * a;
            s2 += b;
            q2 += b * b;
            n += 1;
          }
          const double m1 = s1 / n, m2 = s2 / n;
          const double v1 = q1 / n - m1 * m1, v2 = q2 / n - m2 * m2;
          s.worst_mean_rel = std::max(s.worst_mean_rel, std::abs(m2 - m1) / m1);
          s.worst_var_rel = std::max(s.worst_var_rel, std::abs(v2 - v1) / v1);
        }
    }
    return s;
  }();
  return stats;
}

TEST(SynthDataStatistics, RealTemporalEnergyIsSpatiallyUniform) {
  const auto& s = corpus_stats();
  const double ratio = s.real_in / s.real_out;
  EXPECT_GE(ratio, 0.8);
  EXPECT_LE(ratio, 1.25);
}

TEST(SynthDataStatistics, FakeTemporalEnergyConcentratesInMask) {
  const auto& s = corpus_stats();
  EXPECT_GE(s.fake_in / s.fake_out, 2.0);
}

TEST(SynthDataStatistics, FakeFramesKeepPerFrameMoments) {
  const auto& s = corpus_stats();
  EXPECT_LE(s.worst_mean_rel, 0.10);
  EXPECT_LE(s.worst_var_rel, 0.10);
}

TEST(MakeDataset, WritesManifestWithSplitsAndMasks) {
  testing::TempDir dir("make_dataset");
  SynthConfig cfg = desk_config();
  cfg.height = cfg.width = 32;
  cfg.axis_min = 6.0;
  cfg.axis_max = 9.0;
  const fs::path manifest_path = make_dataset(cfg, {6, 2, 2}, dir.path());
  const Manifest m = read_manifest(manifest_path);
  ASSERT_EQ(m.videos.size(), 10u);
  EXPECT_EQ(m.height, 32);
  EXPECT_EQ(m.video_frames, 8);
  std::set<std::string> train, test;
  for (const auto& v : m.split(Split::kTrain)) train.insert(v.video_id);
  for (const auto& v : m.split(Split::kTest)) test.insert(v.video_id);
  EXPECT_EQ(train.size(), 6u);
  EXPECT_EQ(test.size(), 2u);
  for (const auto& id : test) EXPECT_EQ(train.count(id), 0u);
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    int fakes = 0;
    const auto entries = m.split(s);
    for (const auto& v : entries) fakes += v.label == Label::kFake;
    EXPECT_EQ(2 * fakes, static_cast<int>(entries.size()));
  }
  for (const auto& v : m.videos) {
    EXPECT_EQ(v.mask_dir.has_value(), v.label == Label::kFake);
    EXPECT_TRUE(fs::exists(dir.path() / v.frame_dir / "0007.png"));
    EXPECT_EQ(fs::exists(dir.path() / v.frame_dir / "mask_0000.png"), v.label == Label::kFake);
  }
}

TEST(MakeDataset, RegenerationIsByteIdentical) {
  testing::TempDir a("regen_a"), b("regen_b");
  SynthConfig cfg = desk_config();
  cfg.height = cfg.width = 32;
  cfg.axis_min = 6.0;
  cfg.axis_max = 9.0;
  make_dataset(cfg, {4, 2, 2}, a.path());
  make_dataset(cfg, {4, 2, 2}, b.path());
  EXPECT_EQ(testing::read_bytes(a.path() / "manifest.json"),
            testing::read_bytes(b.path() / "manifest.json"));
  EXPECT_EQ(testing::tree_checksum(a.path()), testing::tree_checksum(b.path()));
}

TEST(MakeDataset, LoadedVideosMatchGeneratedUpToQuantisation) {
  testing::TempDir dir("load_video");
  SynthConfig cfg = desk_config();
  cfg.height = cfg.width = 32;
  cfg.axis_min = 6.0;
  cfg.axis_max = 9.0;
  const Manifest m = read_manifest(make_dataset(cfg, {2, 0, 0}, dir.path()));
  const auto clips = load_split(m, Split::kTrain);
  ASSERT_EQ(clips.size(), 2u);
  // Train ordinal 1 is the fake of scene index 1.
  const Clip expect = gen_fake(cfg, 1).clip;
  const Clip& got = clips[1];
  EXPECT_EQ(got.label, Label::kFake);
  ASSERT_EQ(got.frames.shape(), expect.frames.shape());
  for (int64_t i = 0; i < got.frames.numel(); ++i)
    ASSERT_NEAR(got.frames[i], expect.frames[i], 0.5 / 255.0 + 1e-6);
  ASSERT_TRUE(got.mask.has_value());
  for (int64_t i = 0; i < got.mask->numel(); ++i)
    ASSERT_NEAR((*got.mask)[i], (*expect.mask)[i], 0.5 / 255.0 + 1e-6);
  EXPECT_FALSE(clips[0].mask.has_value());
}

}  // namespace
}  // namespace lttd
