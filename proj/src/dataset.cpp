#include "lttd/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "lttd/parallel.hpp"

namespace lttd {

namespace fs = std::filesystem;
using nlohmann::json;

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ParameterError("unknown split '" + name + "' (expected train, val or test)");
}

void Manifest::validate() const {
  if (version != kVersion) {
    throw DataError("manifest: unsupported version " + std::to_string(version));
  }
  if (height <= 0 || width <= 0 || video_frames <= 0) {
    throw DataError("manifest: clip_extents must be positive");
  }
  std::set<std::string> ids;
  for (const auto& v : videos) {
    if (v.video_id.empty()) throw DataError("manifest: empty video_id");
    if (!ids.insert(v.video_id).second) {
      throw DataError("manifest: duplicate video_id '" + v.video_id + "'");
    }
    if (v.label == Label::kFake && !v.mask_dir) {
      throw DataError("manifest: fake video '" + v.video_id + "' has no mask_dir");
    }
  }
}

std::vector<VideoEntry> Manifest::split(Split s) const {
  std::vector<VideoEntry> out;
  for (const auto& v : videos)
    if (v.split == s) out.push_back(v);
  return out;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  try {
    const json doc = json::parse(in);
    m.version = doc.at("version").get<int>();
    const json& ext = doc.at("clip_extents");
    m.height = ext.at("H").get<int64_t>();
    m.width = ext.at("W").get<int64_t>();
    m.video_frames = ext.at("T_video").get<int64_t>();
    for (const json& v : doc.at("videos")) {
      VideoEntry e;
      e.video_id = v.at("video_id").get<std::string>();
      e.split = parse_split(v.at("split").get<std::string>());
      const int label = v.at("label").get<int>();
      if (label != 0 && label != 1) {
        throw DataError("video '" + e.video_id + "': label must be 0 or 1");
      }
      e.label = static_cast<Label>(label);
      e.frame_dir = v.at("frame_dir").get<std::string>();
      if (v.contains("mask_dir")) e.mask_dir = v.at("mask_dir").get<std::string>();
      m.videos.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  } catch (const std::exception& e) {
    throw IoError("invalid manifest " + path.string() + ": " + e.what());
  }
  m.root = path.parent_path();
  try {
    m.validate();
  } catch (const DataError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  manifest.validate();
  json videos = json::array();
  for (const auto& v : manifest.videos) {
    json e = {{"video_id", v.video_id},
              {"split", split_name(v.split)},
              {"label", static_cast<int>(v.label)},
              {"frame_dir", v.frame_dir}};
    if (v.mask_dir) e["mask_dir"] = *v.mask_dir;
    videos.push_back(std::move(e));
  }
  const json doc = {{"version", manifest.version},
                    {"clip_extents",
                     {{"H", manifest.height}, {"W", manifest.width}, {"T_video", manifest.video_frames}}},
                    {"videos", std::move(videos)}};
  write_file_atomic(path, doc.dump(2) + "\n");
}

namespace {

fs::path temp_sibling(const fs::path& path) {
  return path.parent_path() / ("." + path.filename().string() + ".tmp");
}

void rename_into_place(const fs::path& tmp, const fs::path& path) {
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<uint8_t>(std::lround(c * 255.0f));
}

void write_png(const fs::path& path, const std::vector<uint8_t>& pixels, int64_t height,
               int64_t width, bool gray) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const fs::path tmp = temp_sibling(path);
  if (!png_image_write_to_file(&image, tmp.c_str(), 0, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write " + path.string() + ": " + msg);
  }
  rename_into_place(tmp, path);
}

std::string frame_name(int64_t t, const char* prefix) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04lld.png", prefix, static_cast<long long>(t));
  return buf;
}

fs::path resolve(const Manifest& m, const std::string& dir) {
  const fs::path p(dir);
  return p.is_absolute() ? p : m.root / p;
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  rename_into_place(tmp, path);
}

void write_png_rgb(const fs::path& path, const float* rgb, int64_t height, int64_t width,
                   int64_t plane_stride) {
  std::vector<uint8_t> px(static_cast<size_t>(3 * height * width));
  for (int64_t k = 0; k < height * width; ++k)
    for (int64_t c = 0; c < 3; ++c) px[static_cast<size_t>(3 * k + c)] = quantize(rgb[c * plane_stride + k]);
  write_png(path, px, height, width, false);
}

void write_png_gray(const fs::path& path, const float* gray, int64_t height, int64_t width) {
  std::vector<uint8_t> px(static_cast<size_t>(height * width));
  for (size_t k = 0; k < px.size(); ++k) px[k] = quantize(gray[k]);
  write_png(path, px, height, width, true);
}

TensorF read_png(const fs::path& path, bool gray) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot read " + path.string() + ": " + msg);
  }
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode " + path.string() + ": " + msg);
  }
  const int64_t c = gray ? 1 : 3, h = image.height, w = image.width;
  TensorF out({c, h, w});
  for (int64_t k = 0; k < h * w; ++k)
    for (int64_t ch = 0; ch < c; ++ch)
      out[ch * h * w + k] = static_cast<float>(px[static_cast<size_t>(k * c + ch)]) / 255.0f;
  return out;
}

void save_video(const Clip& video, const fs::path& dir) {
  validate_clip(video);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const int64_t t = video.length(), h = video.height(), w = video.width();
  for (int64_t i = 0; i < t; ++i) {
    write_png_rgb(dir / frame_name(i, ""), video.frames.data() + i * h * w, h, w, t * h * w);
    if (video.mask) write_png_gray(dir / frame_name(i, "mask_"), video.mask->data() + i * h * w, h, w);
  }
}

Clip load_video(const Manifest& manifest, const VideoEntry& entry) {
  const int64_t t = manifest.video_frames, h = manifest.height, w = manifest.width;
  const fs::path frames = resolve(manifest, entry.frame_dir);
  Clip clip;
  clip.video_id = entry.video_id;
  clip.label = entry.label;
  clip.frames = TensorF({3, t, h, w});
  if (entry.mask_dir) clip.mask = TensorF({t, h, w});
  auto check = [&](const TensorF& img, const fs::path& p) {
    if (img.dim(1) != h || img.dim(2) != w) {
      throw DataError(p.string() + ": expected " + std::to_string(h) + "x" + std::to_string(w) +
                      ", got " + std::to_string(img.dim(1)) + "x" + std::to_string(img.dim(2)));
    }
  };
  for (int64_t i = 0; i < t; ++i) {
    const fs::path fp = frames / frame_name(i, "");
    const TensorF img = read_png(fp, false);
    check(img, fp);
    for (int64_t c = 0; c < 3; ++c)
      std::copy(img.data() + c * h * w, img.data() + (c + 1) * h * w,
                clip.frames.data() + (c * t + i) * h * w);
    if (entry.mask_dir) {
      const fs::path mp = resolve(manifest, *entry.mask_dir) / frame_name(i, "mask_");
      const TensorF m = read_png(mp, true);
      check(m, mp);
      std::copy(m.data(), m.data() + h * w, clip.mask->data() + i * h * w);
    }
  }
  return clip;
}

std::vector<Clip> load_split(const Manifest& manifest, Split split) {
  const auto entries = manifest.split(split);
  std::vector<Clip> out(entries.size());
  parallel_for(static_cast<int64_t>(entries.size()), [&](int64_t i) {
    out[static_cast<size_t>(i)] = load_video(manifest, entries[static_cast<size_t>(i)]);
  });
  return out;
}

}  // namespace lttd
