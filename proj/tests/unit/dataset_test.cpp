#include "lttd/dataset.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace lttd {
namespace {

namespace fs = std::filesystem;

Manifest small_manifest() {
  Manifest m;
  m.height = 4;
  m.width = 6;
  m.video_frames = 2;
  m.videos.push_back({"a", Split::kTrain, Label::kReal, "a", std::nullopt});
  m.videos.push_back({"b", Split::kTest, Label::kFake, "b", std::string("b")});
  return m;
}

TEST(Dataset, SplitNames) {
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) EXPECT_EQ(parse_split(split_name(s)), s);
  EXPECT_THROW(parse_split("dev"), ParameterError);
}

TEST(Dataset, ManifestRoundTrip) {
  testing::TempDir dir("manifest");
  const Manifest m = small_manifest();
  write_manifest(m, dir.path() / "manifest.json");
  const Manifest r = read_manifest(dir.path() / "manifest.json");
  EXPECT_EQ(r.height, 4);
  EXPECT_EQ(r.width, 6);
  EXPECT_EQ(r.video_frames, 2);
  ASSERT_EQ(r.videos.size(), 2u);
  EXPECT_EQ(r.videos[1].video_id, "b");
  EXPECT_EQ(r.videos[1].split, Split::kTest);
  EXPECT_EQ(r.videos[1].label, Label::kFake);
  EXPECT_EQ(r.videos[1].mask_dir, std::optional<std::string>("b"));
  EXPECT_FALSE(r.videos[0].mask_dir);
  EXPECT_EQ(r.root, dir.path());
  EXPECT_FALSE(fs::exists(dir.path() / ".manifest.json.tmp"));
}

TEST(Dataset, ManifestInvariantsAreEnforced) {
  Manifest dup = small_manifest();
  dup.videos[1].video_id = "a";
  EXPECT_THROW(dup.validate(), DataError);
  Manifest maskless = small_manifest();
  maskless.videos[1].mask_dir.reset();
  EXPECT_THROW(maskless.validate(), DataError);
  Manifest empty_extent = small_manifest();
  empty_extent.video_frames = 0;
  EXPECT_THROW(empty_extent.validate(), DataError);
}

TEST(Dataset, MalformedManifestsAreIoErrors) {
  testing::TempDir dir("bad_manifest");
  EXPECT_THROW(read_manifest(dir.path() / "missing.json"), IoError);
  write_file_atomic(dir.path() / "m.json", "{\"version\": 1}");
  EXPECT_THROW(read_manifest(dir.path() / "m.json"), IoError);
  write_file_atomic(dir.path() / "m.json",
                    R"({"version":1,"clip_extents":{"H":4,"W":4,"T_video":2},)"
                    R"("videos":[{"video_id":"x","split":"dev","label":0,"frame_dir":"x"}]})");
  EXPECT_THROW(read_manifest(dir.path() / "m.json"), IoError);
  write_file_atomic(dir.path() / "m.json",
                    R"({"version":1,"clip_extents":{"H":4,"W":4,"T_video":2},)"
                    R"("videos":[{"video_id":"x","split":"train","label":1,"frame_dir":"x"}]})");
  EXPECT_THROW(read_manifest(dir.path() / "m.json"), IoError);
}

TEST(Dataset, PngRoundTripIsExactOnLevels) {
  testing::TempDir dir("png");
  TensorF rgb({3, 5, 7});
  for (int64_t i = 0; i < rgb.numel(); ++i) rgb[i] = static_cast<float>((i * 37) % 256) / 255.0f;
  write_png_rgb(dir.path() / "x.png", rgb.data(), 5, 7, 35);
  const TensorF back = read_png(dir.path() / "x.png", false);
  ASSERT_EQ(back.shape(), rgb.shape());
  for (int64_t i = 0; i < rgb.numel(); ++i) EXPECT_EQ(back[i], rgb[i]);

  TensorF gray({5, 7});
  for (int64_t i = 0; i < gray.numel(); ++i) gray[i] = i % 2 ? 1.4f : -0.2f;  // clamped
  write_png_gray(dir.path() / "g.png", gray.data(), 5, 7);
  const TensorF g = read_png(dir.path() / "g.png", true);
  ASSERT_EQ(g.shape(), (num::Shape{1, 5, 7}));
  for (int64_t i = 0; i < gray.numel(); ++i) EXPECT_EQ(g[i], i % 2 ? 1.0f : 0.0f);
  EXPECT_THROW(read_png(dir.path() / "none.png", true), IoError);
}

TEST(Dataset, SaveAndLoadVideo) {
  testing::TempDir dir("video");
  Manifest m = small_manifest();
  m.root = dir.path();
  Clip fake;
  fake.label = Label::kFake;
  fake.video_id = "b";
  fake.frames = TensorF({3, 2, 4, 6});
  for (int64_t i = 0; i < fake.frames.numel(); ++i) fake.frames[i] = static_cast<float>(i % 256) / 255.0f;
  fake.mask = TensorF({2, 4, 6}, 0.0f);
  (*fake.mask)[3] = 1.0f;
  save_video(fake, dir.path() / "b");
  EXPECT_TRUE(fs::exists(dir.path() / "b" / "0001.png"));
  EXPECT_TRUE(fs::exists(dir.path() / "b" / "mask_0001.png"));
  const Clip back = load_video(m, m.videos[1]);
  EXPECT_EQ(back.video_id, "b");
  EXPECT_EQ(back.label, Label::kFake);
  for (int64_t i = 0; i < fake.frames.numel(); ++i) ASSERT_EQ(back.frames[i], fake.frames[i]);
  ASSERT_TRUE(back.mask);
  for (int64_t i = 0; i < fake.mask->numel(); ++i) ASSERT_EQ((*back.mask)[i], (*fake.mask)[i]);

  Manifest wrong = m;
  wrong.width = 5;
  EXPECT_THROW(load_video(wrong, wrong.videos[1]), DataError);
  EXPECT_THROW(load_video(m, m.videos[0]), IoError);  // never written
}

}  // namespace
}  // namespace lttd
