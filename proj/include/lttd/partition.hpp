#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "lttd/num/tensor.hpp"

namespace lttd {

using num::TensorF;

enum class Label : int { kReal = 0, kFake = 1 };

// A C×T×H×W block of frames in [0,1] with its label and optional per-frame
// modification mask (T×H×W).
struct Clip {
  TensorF frames;
  Label label = Label::kReal;
  std::optional<TensorF> mask;
  std::string video_id;
  int64_t clip_start = 0;

  int64_t channels() const { return frames.dim(0); }
  int64_t length() const { return frames.dim(1); }
  int64_t height() const { return frames.dim(2); }
  int64_t width() const { return frames.dim(3); }
};

// Throws DimensionError/RangeError if the clip violates its invariants.
void validate_clip(const Clip& clip);

// Pixel box [x0, x1) × [y0, y1) in source-frame coordinates.
struct CropBox {
  int64_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// Crops every frame (and the mask) with the same box, then resizes
// bilinearly to out_h × out_w. A full-frame box at the source size is an
// exact identity.
Clip crop_fixed_box(const Clip& source, const CropBox& box, int64_t out_h, int64_t out_w);

// N spatial locations × T timesteps × C·P² patch vectors (channel-major
// within a patch). Location i sits at grid cell (i / grid_cols, i % grid_cols).
struct PatchSequenceSet {
  num::TensorF patches;
  int64_t patch = 0;
  int64_t channels = 0;
  int64_t grid_rows = 0;
  int64_t grid_cols = 0;

  int64_t count() const { return grid_rows * grid_cols; }
  int64_t length() const { return patches.dim(1); }
  // √N; only defined for square grids.
  int64_t grid_side() const;
};

struct GridCell {
  int64_t row, col;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

inline GridCell grid_cell(int64_t index, int64_t grid_cols) {
  return {index / grid_cols, index % grid_cols};
}
inline int64_t patch_index(GridCell cell, int64_t grid_cols) {
  return cell.row * grid_cols + cell.col;
}

PatchSequenceSet split_patches(const Clip& clip, int64_t patch);

// Inverse of split_patches: returns C×T×H×W frames.
num::TensorF reassemble(const PatchSequenceSet& ps, int64_t height, int64_t width);

}  // namespace lttd
