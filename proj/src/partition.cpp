#include "lttd/partition.hpp"

#include <algorithm>
#include <cmath>

namespace lttd {

using num::Shape;
using num::shape_str;

void validate_clip(const Clip& clip) {
  const TensorF& f = clip.frames;
  if (f.rank() != 4 || f.dim(0) != 3) {
    throw DimensionError("clip frames must be 3×T×H×W, got " + shape_str(f.shape()));
  }
  if (clip.mask) {
    const Shape expect{f.dim(1), f.dim(2), f.dim(3)};
    if (clip.mask->shape() != expect) {
      throw DimensionError("clip mask " + shape_str(clip.mask->shape()) + " does not match " +
                           shape_str(expect));
    }
    for (float v : clip.mask->values()) {
      if (!(v >= 0.0f && v <= 1.0f)) throw RangeError("clip mask value outside [0,1]");
    }
  }
}

namespace {

struct Taps {
  int64_t lo, hi;
  float frac;
};

// Half-pixel-centered source taps for resizing [start, end) to `out` samples.
std::vector<Taps> bilinear_taps(int64_t start, int64_t end, int64_t out) {
  std::vector<Taps> taps(static_cast<size_t>(out));
  const double scale = static_cast<double>(end - start) / static_cast<double>(out);
  for (int64_t i = 0; i < out; ++i) {
    double src = static_cast<double>(start) + (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, static_cast<double>(start), static_cast<double>(end - 1));
    const int64_t lo = static_cast<int64_t>(std::floor(src));
    const int64_t hi = std::min(lo + 1, end - 1);
    taps[static_cast<size_t>(i)] = {lo, hi, static_cast<float>(src - static_cast<double>(lo))};
  }
  return taps;
}

// Resizes each of `planes` H×W planes of `src` through the taps.
TensorF resample(const TensorF& src, int64_t planes, int64_t h, int64_t w,
                 const std::vector<Taps>& ty, const std::vector<Taps>& tx, Shape out_shape) {
  TensorF out(std::move(out_shape));
  const int64_t oh = static_cast<int64_t>(ty.size()), ow = static_cast<int64_t>(tx.size());
  for (int64_t p = 0; p < planes; ++p) {
    const float* plane = src.data() + p * h * w;
    float* dst = out.data() + p * oh * ow;
    for (int64_t y = 0; y < oh; ++y) {
      const Taps& a = ty[static_cast<size_t>(y)];
      for (int64_t x = 0; x < ow; ++x) {
        const Taps& b = tx[static_cast<size_t>(x)];
        const float top = plane[a.lo * w + b.lo] * (1.0f - b.frac) + plane[a.lo * w + b.hi] * b.frac;
        const float bot = plane[a.hi * w + b.lo] * (1.0f - b.frac) + plane[a.hi * w + b.hi] * b.frac;
        dst[y * ow + x] = top * (1.0f - a.frac) + bot * a.frac;
      }
    }
  }
  return out;
}

}  // namespace

Clip crop_fixed_box(const Clip& source, const CropBox& box, int64_t out_h, int64_t out_w) {
  validate_clip(source);
  const int64_t c = source.channels(), t = source.length();
  const int64_t h = source.height(), w = source.width();
  if (box.x0 < 0 || box.y0 < 0 || box.x1 > w || box.y1 > h || box.x1 <= box.x0 ||
      box.y1 <= box.y0) {
    throw RangeError("crop box [" + std::to_string(box.x0) + "," + std::to_string(box.y0) + "," +
                     std::to_string(box.x1) + "," + std::to_string(box.y1) +
                     ") outside frame of " + std::to_string(w) + "x" + std::to_string(h));
  }
  if (out_h <= 0 || out_w <= 0) throw DimensionError("crop output size must be positive");
  const auto ty = bilinear_taps(box.y0, box.y1, out_h);
  const auto tx = bilinear_taps(box.x0, box.x1, out_w);
  Clip out;
  out.label = source.label;
  out.video_id = source.video_id;
  out.clip_start = source.clip_start;
  out.frames = resample(source.frames, c * t, h, w, ty, tx, {c, t, out_h, out_w});
  if (source.mask) {
    out.mask = resample(*source.mask, t, h, w, ty, tx, {t, out_h, out_w});
  }
  return out;
}

int64_t PatchSequenceSet::grid_side() const {
  if (grid_rows != grid_cols) {
    throw DimensionError("patch grid " + std::to_string(grid_rows) + "x" +
                         std::to_string(grid_cols) + " is not square");
  }
  return grid_rows;
}

PatchSequenceSet split_patches(const Clip& clip, int64_t patch) {
  validate_clip(clip);
  const int64_t c = clip.channels(), t = clip.length(), h = clip.height(), w = clip.width();
  if (patch <= 0 || h % patch != 0 || w % patch != 0) {
    throw DimensionError("frame " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by patch size " + std::to_string(patch));
  }
  PatchSequenceSet ps;
  ps.patch = patch;
  ps.channels = c;
  ps.grid_rows = h / patch;
  ps.grid_cols = w / patch;
  const int64_t n = ps.count(), len = c * patch * patch;
  ps.patches = TensorF({n, t, len});
  const float* src = clip.frames.data();
  for (int64_t i = 0; i < n; ++i) {
    const GridCell cell = grid_cell(i, ps.grid_cols);
    for (int64_t ti = 0; ti < t; ++ti) {
      float* dst = ps.patches.data() + (i * t + ti) * len;
      for (int64_t ci = 0; ci < c; ++ci) {
        for (int64_t y = 0; y < patch; ++y) {
          const float* row =
              src + ((ci * t + ti) * h + cell.row * patch + y) * w + cell.col * patch;
          std::copy(row, row + patch, dst + (ci * patch + y) * patch);
        }
      }
    }
  }
  return ps;
}

TensorF reassemble(const PatchSequenceSet& ps, int64_t height, int64_t width) {
  const int64_t p = ps.patch, c = ps.channels;
  if (ps.patches.rank() != 3 || ps.patches.dim(2) != c * p * p) {
    throw DimensionError("patch tensor " + shape_str(ps.patches.shape()) +
                         " inconsistent with patch size " + std::to_string(p));
  }
  const int64_t n = ps.patches.dim(0), t = ps.patches.dim(1);
  if (n * p * p != height * width || height % p != 0 || width % p != 0 ||
      width / p != ps.grid_cols || height / p != ps.grid_rows) {
    throw DimensionError("cannot reassemble " + std::to_string(n) + " patches of size " +
                         std::to_string(p) + " into " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  const int64_t len = c * p * p;
  TensorF frames({c, t, height, width});
  for (int64_t i = 0; i < n; ++i) {
    const GridCell cell = grid_cell(i, ps.grid_cols);
    for (int64_t ti = 0; ti < t; ++ti) {
      const float* src = ps.patches.data() + (i * t + ti) * len;
      for (int64_t ci = 0; ci < c; ++ci) {
        for (int64_t y = 0; y < p; ++y) {
          float* row = frames.data() + ((ci * t + ti) * height + cell.row * p + y) * width +
                       cell.col * p;
          std::copy(src + (ci * p + y) * p, src + (ci * p + y + 1) * p, row);
        }
      }
    }
  }
  return frames;
}

}  // namespace lttd
