#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lttd/partition.hpp"

namespace lttd {

enum class Split { kTrain, kVal, kTest };

const char* split_name(Split split);
Split parse_split(const std::string& name);  // ParameterError on unknown names

struct VideoEntry {
  std::string video_id;
  Split split = Split::kTrain;
  Label label = Label::kReal;
  std::string frame_dir;  // relative to the manifest's directory unless absolute
  std::optional<std::string> mask_dir;
};

struct Manifest {
  static constexpr int kVersion = 1;

  int version = kVersion;
  int64_t height = 0, width = 0, video_frames = 0;
  std::vector<VideoEntry> videos;
  std::filesystem::path root;  // directory relative paths resolve against; not serialised

  // DataError if ids repeat, a fake lacks mask_dir or extents are not positive.
  void validate() const;
  std::vector<VideoEntry> split(Split s) const;
};

// Parses and validates; IoError for unreadable or malformed files.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// 8-bit PNG I/O for [0,1] planes. rgb is [3, H, W] with the given plane
// stride; values are clamped and rounded to the nearest level.
void write_png_rgb(const std::filesystem::path& path, const float* rgb, int64_t height,
                   int64_t width, int64_t plane_stride);
void write_png_gray(const std::filesystem::path& path, const float* gray, int64_t height,
                    int64_t width);
// Returns [C, H, W] with C = 3 (rgb) or 1 (gray); IoError on failure.
TensorF read_png(const std::filesystem::path& path, bool gray);

// Writes `{dir}/{t:04}.png` per frame and, if the clip has a mask,
// `{dir}/mask_{t:04}.png`.
void save_video(const Clip& video, const std::filesystem::path& dir);

// Loads every frame (and mask, if listed) of an entry into one Clip.
Clip load_video(const Manifest& manifest, const VideoEntry& entry);

// Loads all videos of a split, in manifest order, in parallel.
std::vector<Clip> load_split(const Manifest& manifest, Split split);

}  // namespace lttd
