#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "lttd/partition.hpp"

namespace lttd {

enum class PerturbKind {
  kSaturation,
  kContrast,
  kBlockwiseNoise,
  kGaussianNoise,
  kGaussianBlur,
  kPixelation,
  kVideoCompression,
};

inline constexpr std::array<PerturbKind, 7> kAllPerturbKinds = {
    PerturbKind::kSaturation,   PerturbKind::kContrast,   PerturbKind::kBlockwiseNoise,
    PerturbKind::kGaussianNoise, PerturbKind::kGaussianBlur, PerturbKind::kPixelation,
    PerturbKind::kVideoCompression};

inline constexpr int kMaxSeverity = 5;

// snake_case names, e.g. "gaussian_noise".
const char* perturb_name(PerturbKind kind);
PerturbKind parse_perturb_kind(const std::string& name);  // ParameterError if unknown

// Distortion parameter at level 1..5: saturation/contrast scale, block count,
// noise or blur sigma, pixelation factor, or compression quality.
double severity_parameter(PerturbKind kind, int level);

// Perturbs every frame of `clip`; label, mask and ids pass through. Level 0
// returns an exact copy. ParameterError on unknown kind or level outside
// 0..5, RangeError if a pixel lies outside [0,1].
Clip apply_perturbation(const Clip& clip, PerturbKind kind, int level, uint64_t seed);

}  // namespace lttd
