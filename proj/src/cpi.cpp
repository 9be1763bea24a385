#include "lttd/cpi.hpp"

#include <algorithm>
#include <cmath>

namespace lttd {

void CpiConfig::validate() const {
  if (!(margin >= 0.0 && margin < 1.0)) throw ParameterError("CpiConfig: margin must lie in [0,1)");
}

template <typename T>
Var<T> temporal_mean(Var<T> content_tokens) {
  if (content_tokens.value().rank() != 3) {
    throw DimensionError("temporal_mean: expected [N,T,D], got " +
                         num::shape_str(content_tokens.shape()));
  }
  return num::mean_axis(content_tokens, 1);
}

namespace {

int64_t exact_sqrt(int64_t n) {
  int64_t r = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  if (n <= 0 || r * r != n) {
    throw DimensionError("patch count " + std::to_string(n) + " is not a perfect square");
  }
  return r;
}

struct Tap {
  int64_t lo, hi;
  double frac;
};

std::vector<Tap> taps(int64_t in, int64_t out) {
  std::vector<Tap> t(static_cast<size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t i = 0; i < out; ++i) {
    const double src =
        std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
    const int64_t lo = static_cast<int64_t>(std::floor(src));
    t[static_cast<size_t>(i)] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return t;
}

}  // namespace

TensorD mask_levels(const TensorF& mask, int64_t n) {
  const int64_t side = exact_sqrt(n);
  if (mask.rank() != 3) {
    throw DimensionError("mask must be T×H×W, got " + num::shape_str(mask.shape()));
  }
  const int64_t t = mask.dim(0), h = mask.dim(1), w = mask.dim(2);
  std::vector<double> summed(static_cast<size_t>(h * w), 0.0);
  for (int64_t ti = 0; ti < t; ++ti) {
    const float* plane = mask.data() + ti * h * w;
    for (int64_t i = 0; i < h * w; ++i) summed[static_cast<size_t>(i)] += plane[i];
  }
  const double mx = *std::max_element(summed.begin(), summed.end());
  if (mx > 0.0) {
    for (double& v : summed) v /= mx;
  }
  const auto ty = taps(h, side);
  const auto tx = taps(w, side);
  TensorD m({n});
  for (int64_t r = 0; r < side; ++r) {
    const Tap& a = ty[static_cast<size_t>(r)];
    for (int64_t c = 0; c < side; ++c) {
      const Tap& b = tx[static_cast<size_t>(c)];
      auto at = [&](int64_t y, int64_t x) { return summed[static_cast<size_t>(y * w + x)]; };
      const double top = at(a.lo, b.lo) * (1.0 - b.frac) + at(a.lo, b.hi) * b.frac;
      const double bot = at(a.hi, b.lo) * (1.0 - b.frac) + at(a.hi, b.hi) * b.frac;
      m[r * side + c] = top * (1.0 - a.frac) + bot * a.frac;
    }
  }
  return m;
}

TensorD gt_similarity(const TensorF& mask, int64_t n) {
  const TensorD m = mask_levels(mask, n);
  TensorD sim({n, n});
  for (int64_t p = 0; p < n; ++p) {
    for (int64_t q = 0; q < n; ++q) sim[p * n + q] = 1.0 - 2.0 * std::abs(m[p] - m[q]);
  }
  return sim;
}

template <typename T>
Var<T> cpi_loss(Var<T> sim, Var<T> sim_gt, const CpiConfig& cfg) {
  cfg.validate();
  return num::margin_hinge_squared(sim, sim_gt, static_cast<T>(cfg.margin), cfg.reduction);
}

template Var<float> temporal_mean(Var<float>);
template Var<double> temporal_mean(Var<double>);
template Var<float> cpi_loss(Var<float>, Var<float>, const CpiConfig&);
template Var<double> cpi_loss(Var<double>, Var<double>, const CpiConfig&);

}  // namespace lttd
