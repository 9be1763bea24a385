#include "lttd/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "lttd/num/rng.hpp"

namespace lttd {

using num::mix_seed;
using num::Rng;

const char* perturb_name(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::kSaturation: return "saturation";
    case PerturbKind::kContrast: return "contrast";
    case PerturbKind::kBlockwiseNoise: return "blockwise_noise";
    case PerturbKind::kGaussianNoise: return "gaussian_noise";
    case PerturbKind::kGaussianBlur: return "gaussian_blur";
    case PerturbKind::kPixelation: return "pixelation";
    case PerturbKind::kVideoCompression: return "video_compression";
  }
  throw ParameterError("unknown perturbation kind " + std::to_string(static_cast<int>(kind)));
}

PerturbKind parse_perturb_kind(const std::string& name) {
  for (PerturbKind k : kAllPerturbKinds)
    if (name == perturb_name(k)) return k;
  throw ParameterError("unknown perturbation kind '" + name + "'");
}

double severity_parameter(PerturbKind kind, int level) {
  static constexpr double kSchedule[7][5] = {
      {0.8, 0.6, 0.4, 0.2, 0.0},       // saturation scale
      {0.85, 0.7, 0.55, 0.4, 0.25},    // contrast scale
      {2, 4, 8, 16, 24},               // noise blocks per frame
      {0.01, 0.02, 0.05, 0.1, 0.2},    // noise sigma
      {0.5, 1, 2, 3, 4},               // blur sigma (px)
      {2, 4, 8, 16, 32},               // pixelation factor
      {80, 60, 40, 25, 10},            // compression quality
  };
  const int k = static_cast<int>(kind);
  if (k < 0 || k >= 7) throw ParameterError("unknown perturbation kind " + std::to_string(k));
  if (level < 1 || level > kMaxSeverity) {
    throw ParameterError("severity level " + std::to_string(level) + " outside 1..5");
  }
  return kSchedule[k][level - 1];
}

namespace {

// View of one frame: three planes of h×w floats, `stride` apart.
struct Frame {
  float* data;
  int64_t h, w, stride;
  float& at(int64_t c, int64_t y, int64_t x) const { return data[c * stride + y * w + x]; }
};

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

double luma(const Frame& f, int64_t y, int64_t x) {
  return 0.299 * f.at(0, y, x) + 0.587 * f.at(1, y, x) + 0.114 * f.at(2, y, x);
}

void saturate(const Frame& f, double scale) {
  for (int64_t y = 0; y < f.h; ++y)
    for (int64_t x = 0; x < f.w; ++x) {
      const float r = f.at(0, y, x), g = f.at(1, y, x), b = f.at(2, y, x);
      if (r == g && g == b) continue;  // gray pixels are fixed points
      const double gray = luma(f, y, x);
      for (int64_t c = 0; c < 3; ++c) {
        f.at(c, y, x) = clamp01(gray + scale * (f.at(c, y, x) - gray));
      }
    }
}

void contrast(const Frame& f, double scale) {
  double mean = 0.0;
  for (int64_t y = 0; y < f.h; ++y)
    for (int64_t x = 0; x < f.w; ++x) mean += luma(f, y, x);
  mean /= static_cast<double>(f.h * f.w);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < f.h; ++y)
      for (int64_t x = 0; x < f.w; ++x) f.at(c, y, x) = clamp01(mean + scale * (f.at(c, y, x) - mean));
}

void blockwise_noise(const Frame& f, int64_t blocks, Rng& rng) {
  constexpr int64_t kBlock = 8;
  const int64_t bh = std::min(kBlock, f.h), bw = std::min(kBlock, f.w);
  for (int64_t b = 0; b < blocks; ++b) {
    const int64_t y0 = static_cast<int64_t>(rng.below(static_cast<uint64_t>(f.h - bh + 1)));
    const int64_t x0 = static_cast<int64_t>(rng.below(static_cast<uint64_t>(f.w - bw + 1)));
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t y = y0; y < y0 + bh; ++y)
        for (int64_t x = x0; x < x0 + bw; ++x) f.at(c, y, x) = static_cast<float>(rng.uniform());
  }
}

void gaussian_noise(const Frame& f, double sigma, Rng& rng) {
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < f.h; ++y)
      for (int64_t x = 0; x < f.w; ++x) f.at(c, y, x) = clamp01(f.at(c, y, x) + sigma * rng.normal());
}

// Separable Gaussian with a 3σ radius and edge replication.
void gaussian_blur(const Frame& f, double sigma) {
  const int64_t r = static_cast<int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<size_t>(2 * r + 1));
  double norm = 0.0;
  for (int64_t i = -r; i <= r; ++i) {
    norm += k[static_cast<size_t>(i + r)] = std::exp(-0.5 * double(i * i) / (sigma * sigma));
  }
  for (double& v : k) v /= norm;
  std::vector<double> tmp(static_cast<size_t>(f.h * f.w));
  for (int64_t c = 0; c < 3; ++c) {
    for (int64_t y = 0; y < f.h; ++y)
      for (int64_t x = 0; x < f.w; ++x) {
        double s = 0.0;
        for (int64_t i = -r; i <= r; ++i)
          s += k[static_cast<size_t>(i + r)] * f.at(c, y, std::clamp<int64_t>(x + i, 0, f.w - 1));
        tmp[static_cast<size_t>(y * f.w + x)] = s;
      }
    for (int64_t y = 0; y < f.h; ++y)
      for (int64_t x = 0; x < f.w; ++x) {
        double s = 0.0;
        for (int64_t i = -r; i <= r; ++i)
          s += k[static_cast<size_t>(i + r)] *
               tmp[static_cast<size_t>(std::clamp<int64_t>(y + i, 0, f.h - 1) * f.w + x)];
        f.at(c, y, x) = clamp01(s);
      }
  }
}

// Nearest-neighbour downscale by `factor` followed by nearest upscale: every
// factor×factor cell takes the value of its centre-nearest source pixel.
void pixelate(const Frame& f, int64_t factor) {
  auto source = [factor](int64_t i, int64_t extent) {
    const int64_t cell = i / factor;
    return std::min(extent - 1, cell * factor + (factor - 1) / 2);
  };
  std::vector<float> plane(static_cast<size_t>(f.h * f.w));
  for (int64_t c = 0; c < 3; ++c) {
    for (int64_t y = 0; y < f.h; ++y)
      for (int64_t x = 0; x < f.w; ++x)
        plane[static_cast<size_t>(y * f.w + x)] = f.at(c, source(y, f.h), source(x, f.w));
    std::copy(plane.begin(), plane.end(), &f.at(c, 0, 0));
  }
}

// Baseline JPEG quantisation tables (ITU-T T.81, Annex K).
constexpr int kLumaTable[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                                14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                                18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                                49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
constexpr int kChromaTable[64] = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                                  24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                                  99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                  99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

// IJG quality scaling.
std::array<double, 64> quant_table(const int* base, double quality) {
  const double scale = quality < 50.0 ? 5000.0 / quality : 200.0 - 2.0 * quality;
  std::array<double, 64> q;
  for (int i = 0; i < 64; ++i) q[static_cast<size_t>(i)] = std::clamp(std::floor((base[i] * scale + 50.0) / 100.0), 1.0, 255.0);
  return q;
}

struct Dct8 {
  double m[8][8];
  Dct8() {
    for (int u = 0; u < 8; ++u)
      for (int x = 0; x < 8; ++x) {
        const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
        m[u][x] = a * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
  }
};

// Quantises one 8×8 block in place: orthonormal 2D DCT, round(coef / q) · q, inverse.
void quantise_block(double (&blk)[8][8], const std::array<double, 64>& q, const Dct8& d) {
  double tmp[8][8], coef[8][8];
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += d.m[u][y] * blk[y][x];
      tmp[u][x] = s;
    }
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += tmp[u][x] * d.m[v][x];
      const double step = q[static_cast<size_t>(u * 8 + v)];
      coef[u][v] = std::nearbyint(s / step) * step;
    }
  for (int y = 0; y < 8; ++y)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int u = 0; u < 8; ++u) s += d.m[u][y] * coef[u][v];
      tmp[y][v] = s;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int v = 0; v < 8; ++v) s += tmp[y][v] * d.m[v][x];
      blk[y][x] = s;
    }
}

// JPEG-style intra-frame compression: full-resolution YCbCr, 8×8 block DCT
// quantisation, edge blocks padded by replication.
void compress(const Frame& f, double quality) {
  static const Dct8 dct;
  const auto ql = quant_table(kLumaTable, quality);
  const auto qc = quant_table(kChromaTable, quality);
  const size_t n = static_cast<size_t>(f.h * f.w);
  std::vector<double> ycc[3] = {std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  for (int64_t y = 0; y < f.h; ++y)
    for (int64_t x = 0; x < f.w; ++x) {
      const double r = 255.0 * f.at(0, y, x), g = 255.0 * f.at(1, y, x), b = 255.0 * f.at(2, y, x);
      const size_t i = static_cast<size_t>(y * f.w + x);
      ycc[0][i] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
      ycc[1][i] = -0.168736 * r - 0.331264 * g + 0.5 * b;
      ycc[2][i] = 0.5 * r - 0.418688 * g - 0.081312 * b;
    }
  double blk[8][8];
  for (int c = 0; c < 3; ++c) {
    auto& plane = ycc[c];
    for (int64_t by = 0; by < f.h; by += 8)
      for (int64_t bx = 0; bx < f.w; bx += 8) {
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) {
            const int64_t sy = std::min(by + y, f.h - 1), sx = std::min(bx + x, f.w - 1);
            blk[y][x] = plane[static_cast<size_t>(sy * f.w + sx)];
          }
        quantise_block(blk, c == 0 ? ql : qc, dct);
        for (int y = 0; y < 8 && by + y < f.h; ++y)
          for (int x = 0; x < 8 && bx + x < f.w; ++x)
            plane[static_cast<size_t>((by + y) * f.w + bx + x)] = blk[y][x];
      }
  }
  for (int64_t y = 0; y < f.h; ++y)
    for (int64_t x = 0; x < f.w; ++x) {
      const size_t i = static_cast<size_t>(y * f.w + x);
      const double yy = ycc[0][i] + 128.0, cb = ycc[1][i], cr = ycc[2][i];
      f.at(0, y, x) = clamp01((yy + 1.402 * cr) / 255.0);
      f.at(1, y, x) = clamp01((yy - 0.344136 * cb - 0.714136 * cr) / 255.0);
      f.at(2, y, x) = clamp01((yy + 1.772 * cb) / 255.0);
    }
}

}  // namespace

Clip apply_perturbation(const Clip& clip, PerturbKind kind, int level, uint64_t seed) {
  if (level != 0) {
    severity_parameter(kind, level);  // validates kind and level
  } else {
    perturb_name(kind);
  }
  validate_clip(clip);
  for (float v : clip.frames.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw RangeError("apply_perturbation: pixel value outside [0,1]");
  }
  Clip out = clip;
  if (level == 0) return out;
  const double param = severity_parameter(kind, level);
  const int64_t t = clip.length(), h = clip.height(), w = clip.width();
  for (int64_t i = 0; i < t; ++i) {
    const Frame f{out.frames.data() + i * h * w, h, w, t * h * w};
    Rng rng(mix_seed(seed, static_cast<uint64_t>(kind), static_cast<uint64_t>(i)));
    switch (kind) {
      case PerturbKind::kSaturation: saturate(f, param); break;
      case PerturbKind::kContrast: contrast(f, param); break;
      case PerturbKind::kBlockwiseNoise: blockwise_noise(f, static_cast<int64_t>(param), rng); break;
      case PerturbKind::kGaussianNoise: gaussian_noise(f, param, rng); break;
      case PerturbKind::kGaussianBlur: gaussian_blur(f, param); break;
      case PerturbKind::kPixelation: pixelate(f, static_cast<int64_t>(param)); break;
      case PerturbKind::kVideoCompression: compress(f, param); break;
    }
  }
  return out;
}

}  // namespace lttd
