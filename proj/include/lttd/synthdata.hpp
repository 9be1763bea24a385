#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lttd/partition.hpp"

namespace lttd {

struct SynthConfig {
  int64_t height = 64;
  int64_t width = 64;
  int64_t frames = 16;  // video length
  // Face ellipse: centre as a fraction of the frame, semi-axes in pixels.
  double center_min = 0.4, center_max = 0.6;
  double axis_min = 12.0, axis_max = 18.0;
  double edge_px = 2.0;  // soft mask transition width
  double shake_amp = 2.0;
  double inconsistency_amp = 1.0;
  int64_t texture_octaves = 4;
  double sensor_noise = 0.01;
  uint64_t seed = 0;

  void validate() const;
};

struct GeneratedSample {
  Clip clip;  // full video; mask present (all zero for reals)
  uint64_t index = 0;
};

// A real video: textured scene with a face ellipse under smooth camera shake
// and per-frame sensor noise.
GeneratedSample gen_real(const SynthConfig& cfg, uint64_t index);

// The real video of the same index with each frame independently warped,
// blurred and noised inside a soft ellipse mask.
GeneratedSample gen_fake(const SynthConfig& cfg, uint64_t index);

// Soft ellipse mask (H×W) used for the fake of `index`.
TensorF face_mask(const SynthConfig& cfg, uint64_t index);

struct SplitCounts {
  int64_t train = 200;
  int64_t val = 50;
  int64_t test = 50;

  int64_t total() const;
};

// Writes `{video_id}/{t:04}.png`, `{video_id}/mask_{t:04}.png` (fakes only) and
// manifest.json under out_dir. Labels alternate within each split; every split
// draws from its own index range. Returns the manifest path.
std::filesystem::path make_dataset(const SynthConfig& cfg, const SplitCounts& counts,
                                   const std::filesystem::path& out_dir);

}  // namespace lttd
