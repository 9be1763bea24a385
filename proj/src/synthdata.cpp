#include "lttd/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <vector>

#include "lttd/dataset.hpp"
#include "lttd/num/rng.hpp"
#include "lttd/parallel.hpp"

namespace lttd {

using num::mix_seed;
using num::Rng;

void SynthConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ParameterError(std::string("SynthConfig: ") + what);
  };
  require(height > 0 && width > 0 && frames > 0, "extents must be positive");
  require(center_min >= 0.0 && center_min <= center_max && center_max <= 1.0,
          "centre range must lie in [0,1]");
  require(axis_min > 0.0 && axis_min <= axis_max, "axis range must be positive and ordered");
  require(edge_px > 0.0, "edge_px must be positive");
  require(shake_amp >= 0.0, "shake_amp must be non-negative");
  require(inconsistency_amp >= 0.0, "inconsistency_amp must be non-negative");
  require(texture_octaves >= 1, "texture_octaves must be at least 1");
  require(sensor_noise >= 0.0, "sensor_noise must be non-negative");
}

namespace {

constexpr uint64_t kSceneStream = 1;
constexpr uint64_t kShakeStream = 2;
constexpr uint64_t kSensorStream = 3;
constexpr uint64_t kFakeStream = 4;

double lattice(uint64_t seed, int64_t ix, int64_t iy) {
  return static_cast<double>(mix_seed(seed, static_cast<uint64_t>(ix), static_cast<uint64_t>(iy)) >>
                             11) *
         0x1.0p-53;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// Smooth value noise in [0,1) on a unit lattice.
double value_noise(uint64_t seed, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const int64_t ix = static_cast<int64_t>(fx), iy = static_cast<int64_t>(fy);
  const double u = fade(x - fx), v = fade(y - fy);
  const double a = lattice(seed, ix, iy), b = lattice(seed, ix + 1, iy);
  const double c = lattice(seed, ix, iy + 1), d = lattice(seed, ix + 1, iy + 1);
  return (a * (1 - u) + b * u) * (1 - v) + (c * (1 - u) + d * u) * v;
}

// Zero-mean multi-octave texture, roughly unit scale.
double fractal(uint64_t seed, int64_t octaves, double x, double y) {
  double sum = 0.0, amp = 1.0, norm = 0.0, freq = 1.0 / 16.0;
  for (int64_t o = 0; o < octaves; ++o) {
    sum += amp * (value_noise(mix_seed(seed, static_cast<uint64_t>(o)), x * freq, y * freq) - 0.5);
    norm += amp;
    amp *= 0.6;
    freq *= 2.0;
  }
  return sum / norm * 4.0;
}

struct Ellipse {
  double cx, cy, ax, ay;

  // Soft membership: 1 inside, 0 outside, linear ramp of `edge` pixels.
  double soft(double x, double y, double edge) const {
    const double dx = (x - cx) / ax, dy = (y - cy) / ay;
    const double d = std::sqrt(dx * dx + dy * dy);
    return std::clamp(0.5 - (d - 1.0) * std::min(ax, ay) / edge, 0.0, 1.0);
  }
};

struct Scene {
  uint64_t seed;
  int64_t octaves;
  Ellipse face;
  std::array<double, 3> background, skin;
  double contrast;

  // Scene radiance at continuous scene coordinates.
  std::array<double, 3> at(double x, double y) const {
    const double lum = fractal(seed, octaves, x, y);
    const double f = face.soft(x, y, 3.0);
    std::array<double, 3> rgb;
    for (int c = 0; c < 3; ++c) {
      const double chroma = fractal(mix_seed(seed, 100 + static_cast<uint64_t>(c)), 2, x, y);
      const double base = background[static_cast<size_t>(c)] * (1.0 - f) +
                          skin[static_cast<size_t>(c)] * f;
      rgb[static_cast<size_t>(c)] = base + contrast * (lum + 0.3 * chroma);
    }
    return rgb;
  }
};

Scene make_scene(const SynthConfig& cfg, uint64_t index) {
  Rng rng(mix_seed(cfg.seed, index, kSceneStream));
  Scene s;
  s.seed = rng.next_u64();
  s.octaves = cfg.texture_octaves;
  s.face.cx = rng.uniform(cfg.center_min, cfg.center_max) * static_cast<double>(cfg.width);
  s.face.cy = rng.uniform(cfg.center_min, cfg.center_max) * static_cast<double>(cfg.height);
  s.face.ax = rng.uniform(cfg.axis_min, cfg.axis_max);
  s.face.ay = rng.uniform(cfg.axis_min, cfg.axis_max) * 1.2;
  for (double& v : s.background) v = rng.uniform(0.3, 0.7);
  const double tone = rng.uniform(0.85, 1.15);
  s.skin = {0.62 * tone, 0.48 * tone, 0.40 * tone};
  s.contrast = 0.15;
  return s;
}

// Smooth bounded random walk of global translations, one per frame.
std::vector<std::array<double, 2>> shake_path(const SynthConfig& cfg, uint64_t index) {
  Rng rng(mix_seed(cfg.seed, index, kShakeStream));
  std::vector<std::array<double, 2>> path(static_cast<size_t>(cfg.frames));
  std::array<double, 2> pos{0.0, 0.0}, vel{0.0, 0.0};
  for (auto& p : path) {
    for (int a = 0; a < 2; ++a) {
      vel[a] = 0.7 * vel[a] + 0.25 * cfg.shake_amp * rng.normal();
      pos[a] = std::clamp(pos[a] + vel[a], -cfg.shake_amp, cfg.shake_amp);
    }
    p = pos;
  }
  return path;
}

// Renders frame t of the scene with per-pixel offsets into `out` (3×H×W plane
// stride h*w*frames).
void render(const Scene& scene, const SynthConfig& cfg, std::array<double, 2> shift,
            const std::vector<std::array<double, 2>>* warp, std::vector<double>& out) {
  const int64_t h = cfg.height, w = cfg.width;
  out.assign(static_cast<size_t>(3 * h * w), 0.0);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double sx = static_cast<double>(x) + 0.5 + shift[0];
      double sy = static_cast<double>(y) + 0.5 + shift[1];
      if (warp) {
        const auto& d = (*warp)[static_cast<size_t>(y * w + x)];
        sx += d[0];
        sy += d[1];
      }
      const auto rgb = scene.at(sx, sy);
      for (int c = 0; c < 3; ++c) out[static_cast<size_t>((c * h + y) * w + x)] = rgb[static_cast<size_t>(c)];
    }
  }
}

void gaussian_blur(std::vector<double>& img, int64_t planes, int64_t h, int64_t w, double sigma) {
  if (sigma <= 0.0) return;
  const int64_t r = static_cast<int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<size_t>(2 * r + 1));
  double norm = 0.0;
  for (int64_t i = -r; i <= r; ++i) {
    k[static_cast<size_t>(i + r)] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    norm += k[static_cast<size_t>(i + r)];
  }
  for (double& v : k) v /= norm;
  std::vector<double> tmp(img.size());
  for (int64_t p = 0; p < planes; ++p) {
    double* src = img.data() + p * h * w;
    double* mid = tmp.data() + p * h * w;
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double s = 0.0;
        for (int64_t i = -r; i <= r; ++i) {
          const int64_t xx = std::clamp<int64_t>(x + i, 0, w - 1);
          s += k[static_cast<size_t>(i + r)] * src[y * w + xx];
        }
        mid[y * w + x] = s;
      }
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double s = 0.0;
        for (int64_t i = -r; i <= r; ++i) {
          const int64_t yy = std::clamp<int64_t>(y + i, 0, h - 1);
          s += k[static_cast<size_t>(i + r)] * mid[yy * w + x];
        }
        src[y * w + x] = s;
      }
  }
}

Ellipse mask_ellipse(const SynthConfig& cfg, uint64_t index) {
  return make_scene(cfg, index).face;
}

float to_unit(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

TensorF face_mask(const SynthConfig& cfg, uint64_t index) {
  cfg.validate();
  const Ellipse e = mask_ellipse(cfg, index);
  TensorF m({cfg.height, cfg.width});
  for (int64_t y = 0; y < cfg.height; ++y)
    for (int64_t x = 0; x < cfg.width; ++x)
      m[y * cfg.width + x] = static_cast<float>(
          e.soft(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, cfg.edge_px));
  return m;
}

namespace {

// Clean (noise-free) frames plus the sensor noise realisation, in double.
struct RealFrames {
  std::vector<std::vector<double>> clean;
  std::vector<std::vector<double>> noise;
};

RealFrames render_real(const SynthConfig& cfg, uint64_t index) {
  const Scene scene = make_scene(cfg, index);
  const auto path = shake_path(cfg, index);
  Rng sensor(mix_seed(cfg.seed, index, kSensorStream));
  RealFrames f;
  f.clean.resize(static_cast<size_t>(cfg.frames));
  f.noise.resize(static_cast<size_t>(cfg.frames));
  for (int64_t t = 0; t < cfg.frames; ++t) {
    render(scene, cfg, path[static_cast<size_t>(t)], nullptr, f.clean[static_cast<size_t>(t)]);
    auto& n = f.noise[static_cast<size_t>(t)];
    n.resize(f.clean[static_cast<size_t>(t)].size());
    for (double& v : n) v = cfg.sensor_noise * sensor.normal();
  }
  return f;
}

Clip assemble(const SynthConfig& cfg, const std::vector<std::vector<double>>& frames) {
  const int64_t h = cfg.height, w = cfg.width, t = cfg.frames;
  Clip clip;
  clip.frames = TensorF({3, t, h, w});
  for (int64_t ti = 0; ti < t; ++ti)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t k = 0; k < h * w; ++k)
        clip.frames[(c * t + ti) * h * w + k] =
            to_unit(frames[static_cast<size_t>(ti)][static_cast<size_t>(c * h * w + k)]);
  return clip;
}

std::string video_name(uint64_t index, Label label) {
  return (label == Label::kFake ? "fake_" : "real_") + std::to_string(index);
}

// Affinely rescales each channel of `frame` inside the mask so the mean and
// variance over the mask's core (mask = 1) equal those of `ref`.
constexpr float kCore = 0.999f;

void match_moments(std::vector<double>& frame, const std::vector<double>& ref, const TensorF& mask,
                   int64_t hw) {
  for (int64_t c = 0; c < 3; ++c) {
    double wsum = 0.0, mf = 0.0, mr = 0.0;
    for (int64_t k = 0; k < hw; ++k) {
      const double m = mask[k] >= kCore ? 1.0 : 0.0;
      wsum += m;
      mf += m * frame[static_cast<size_t>(c * hw + k)];
      mr += m * ref[static_cast<size_t>(c * hw + k)];
    }
    if (wsum <= 0.0) continue;
    mf /= wsum;
    mr /= wsum;
    double vf = 0.0, vr = 0.0;
    for (int64_t k = 0; k < hw; ++k) {
      const double m = mask[k] >= kCore ? 1.0 : 0.0;
      const double df = frame[static_cast<size_t>(c * hw + k)] - mf;
      const double dr = ref[static_cast<size_t>(c * hw + k)] - mr;
      vf += m * df * df;
      vr += m * dr * dr;
    }
    const double gain = vf > 0.0 ? std::sqrt(vr / vf) : 1.0;
    for (int64_t k = 0; k < hw; ++k) {
      double& v = frame[static_cast<size_t>(c * hw + k)];
      v += mask[k] * ((mr - mf) + (gain - 1.0) * (v - mf));
    }
  }
}

}  // namespace

GeneratedSample gen_real(const SynthConfig& cfg, uint64_t index) {
  cfg.validate();
  RealFrames f = render_real(cfg, index);
  std::vector<std::vector<double>> frames(f.clean.size());
  for (size_t t = 0; t < frames.size(); ++t) {
    frames[t] = f.clean[t];
    for (size_t k = 0; k < frames[t].size(); ++k) frames[t][k] += f.noise[t][k];
  }
  GeneratedSample s;
  s.index = index;
  s.clip = assemble(cfg, frames);
  s.clip.label = Label::kReal;
  s.clip.mask = TensorF({cfg.frames, cfg.height, cfg.width}, 0.0f);
  s.clip.video_id = video_name(index, Label::kReal);
  return s;
}

GeneratedSample gen_fake(const SynthConfig& cfg, uint64_t index) {
  cfg.validate();
  if (!(cfg.inconsistency_amp > 0.0)) {
    throw ParameterError("gen_fake: inconsistency_amp must be positive");
  }
  const int64_t h = cfg.height, w = cfg.width, hw = h * w;
  const double amp = cfg.inconsistency_amp;
  const Scene scene = make_scene(cfg, index);
  const auto path = shake_path(cfg, index);
  RealFrames real = render_real(cfg, index);
  const TensorF mask = face_mask(cfg, index);

  std::vector<std::vector<double>> frames(real.clean.size());
  std::vector<std::array<double, 2>> warp(static_cast<size_t>(hw));
  std::vector<double> forged, observed(static_cast<size_t>(3 * hw));
  for (int64_t t = 0; t < cfg.frames; ++t) {
    // Every frame draws its own perturbation, independent of its neighbours.
    Rng rng(mix_seed(cfg.seed, index, kFakeStream, static_cast<uint64_t>(t)));
    const uint64_t wx = rng.next_u64(), wy = rng.next_u64();
    const double warp_px = 0.9 * amp;
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        const double u = static_cast<double>(x) / 10.0, v = static_cast<double>(y) / 10.0;
        warp[static_cast<size_t>(y * w + x)] = {warp_px * (2.0 * value_noise(wx, u, v) - 1.0),
                                                warp_px * (2.0 * value_noise(wy, u, v) - 1.0)};
      }
    render(scene, cfg, path[static_cast<size_t>(t)], &warp, forged);
    gaussian_blur(forged, 3, h, w, rng.uniform(0.0, 0.5 * amp));
    const double noise_sigma = 0.03 * amp;
    auto& out = frames[static_cast<size_t>(t)];
    out.resize(forged.size());
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t k = 0; k < hw; ++k) {
        const size_t i = static_cast<size_t>(c * hw + k);
        const double m = mask[k];
        const double clean = real.clean[static_cast<size_t>(t)][i];
        out[i] = clean + real.noise[static_cast<size_t>(t)][i] +
                 m * (forged[i] - clean + noise_sigma * rng.normal());
      }
    for (size_t i = 0; i < observed.size(); ++i) {
      observed[i] = real.clean[static_cast<size_t>(t)][i] + real.noise[static_cast<size_t>(t)][i];
    }
    match_moments(out, observed, mask, hw);
  }
  GeneratedSample s;
  s.index = index;
  s.clip = assemble(cfg, frames);
  s.clip.label = Label::kFake;
  s.clip.mask = TensorF({cfg.frames, h, w});
  for (int64_t t = 0; t < cfg.frames; ++t)
    std::copy(mask.data(), mask.data() + hw, s.clip.mask->data() + t * hw);
  s.clip.video_id = video_name(index, Label::kFake);
  return s;
}

int64_t SplitCounts::total() const { return train + val + test; }

std::filesystem::path make_dataset(const SynthConfig& cfg, const SplitCounts& counts,
                                   const std::filesystem::path& out_dir) {
  cfg.validate();
  if (counts.train < 0 || counts.val < 0 || counts.test < 0 || counts.total() == 0) {
    throw ParameterError("make_dataset: split counts must be non-negative with a positive total");
  }
  // Scene indices of different splits never overlap.
  constexpr uint64_t kSplitStride = uint64_t{1} << 32;
  struct Job {
    Split split;
    int64_t ordinal;
    uint64_t index;
    Label label;
    std::string id;
  };
  std::vector<Job> jobs;
  const std::pair<Split, int64_t> plan[] = {
      {Split::kTrain, counts.train}, {Split::kVal, counts.val}, {Split::kTest, counts.test}};
  for (const auto& [split, n] : plan) {
    for (int64_t i = 0; i < n; ++i) {
      const Label label = i % 2 ? Label::kFake : Label::kReal;
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%05lld_%s", split_name(split), static_cast<long long>(i),
                    label == Label::kFake ? "fake" : "real");
      jobs.push_back({split, i, static_cast<uint64_t>(split) * kSplitStride + static_cast<uint64_t>(i),
                      label, id});
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  parallel_for(static_cast<int64_t>(jobs.size()), [&](int64_t j) {
    const Job& job = jobs[static_cast<size_t>(j)];
    GeneratedSample s = job.label == Label::kFake ? gen_fake(cfg, job.index) : gen_real(cfg, job.index);
    if (job.label == Label::kReal) s.clip.mask.reset();
    save_video(s.clip, out_dir / job.id);
  });
  Manifest m;
  m.height = cfg.height;
  m.width = cfg.width;
  m.video_frames = cfg.frames;
  for (const Job& job : jobs) {
    VideoEntry e;
    e.video_id = job.id;
    e.split = job.split;
    e.label = job.label;
    e.frame_dir = job.id;
    if (job.label == Label::kFake) e.mask_dir = job.id;
    m.videos.push_back(std::move(e));
  }
  const auto path = out_dir / "manifest.json";
  write_manifest(m, path);
  return path;
}

}  // namespace lttd
