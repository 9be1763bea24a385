#include <algorithm>
#include <limits>

#include "kernels.hpp"
#include "lttd/num/ops.hpp"
#include "op_util.hpp"

namespace lttd::num {

using detail::same_tape;
using detail::tape_of;

namespace {

struct VolumeGeometry {
  int64_t batch, channels, t, h, w;
  bool batched;
};

VolumeGeometry volume_geometry(const Shape& s, const char* op) {
  if (s.size() == 4) return {1, s[0], s[1], s[2], s[3], false};
  if (s.size() == 5) return {s[0], s[1], s[2], s[3], s[4], true};
  throw DimensionError(std::string(op) + ": expected [C,T,H,W] or [B,C,T,H,W], got " +
                       shape_str(s));
}

struct ConvPlan {
  int64_t cin, t, h, w;
  int64_t kt, kh, kw;
  Extent3 stride, pad;
  int64_t ot, oh, ow;
  int64_t cols() const { return cin * kt * kh * kw; }
  int64_t positions() const { return ot * oh * ow; }
};

// Output indices o in [lo, hi) whose input o*stride + k - pad lies in [0, n).
struct ValidRange {
  int64_t lo, hi;
};

inline ValidRange valid_range(int64_t n, int64_t out, int64_t stride, int64_t k, int64_t pad) {
  const int64_t shift = pad - k;  // need o*stride >= shift and o*stride <= n - 1 + shift
  int64_t lo = shift <= 0 ? 0 : (shift + stride - 1) / stride;
  int64_t hi = n - 1 + shift < 0 ? 0 : (n - 1 + shift) / stride + 1;
  lo = std::min(lo, out);
  hi = std::clamp(hi, lo, out);
  return {lo, hi};
}

// Visits every in-bounds (column index, input offset) pair of one im2col row.
template <typename F>
void for_each_tap(const ConvPlan& p, int64_t c, int64_t dt, int64_t dy, int64_t dx, F&& f) {
  const ValidRange rt = valid_range(p.t, p.ot, p.stride[0], dt, p.pad[0]);
  const ValidRange ry = valid_range(p.h, p.oh, p.stride[1], dy, p.pad[1]);
  const ValidRange rx = valid_range(p.w, p.ow, p.stride[2], dx, p.pad[2]);
  for (int64_t ot = rt.lo; ot < rt.hi; ++ot) {
    const int64_t it = ot * p.stride[0] + dt - p.pad[0];
    for (int64_t oy = ry.lo; oy < ry.hi; ++oy) {
      const int64_t iy = oy * p.stride[1] + dy - p.pad[1];
      const int64_t q = (ot * p.oh + oy) * p.ow;
      const int64_t base = ((c * p.t + it) * p.h + iy) * p.w - p.pad[2] + dx;
      f(q, base, rx);
    }
  }
}

// cols[(c,dt,dy,dx), (ot,oy,ox)] = x[c, ot*s + dt - p, ...] (zero outside).
template <typename T>
void im2col(const T* x, const ConvPlan& p, T* cols) {
  const int64_t npos = p.positions();
  const int64_t sx = p.stride[2];
  std::fill(cols, cols + p.cols() * npos, T(0));
  int64_t row = 0;
  for (int64_t c = 0; c < p.cin; ++c) {
    for (int64_t dt = 0; dt < p.kt; ++dt) {
      for (int64_t dy = 0; dy < p.kh; ++dy) {
        for (int64_t dx = 0; dx < p.kw; ++dx, ++row) {
          T* out = cols + row * npos;
          for_each_tap(p, c, dt, dy, dx, [&](int64_t q, int64_t base, ValidRange rx) {
            for (int64_t ox = rx.lo; ox < rx.hi; ++ox) out[q + ox] = x[base + ox * sx];
          });
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvPlan& p, T* gx) {
  const int64_t npos = p.positions();
  const int64_t sx = p.stride[2];
  int64_t row = 0;
  for (int64_t c = 0; c < p.cin; ++c) {
    for (int64_t dt = 0; dt < p.kt; ++dt) {
      for (int64_t dy = 0; dy < p.kh; ++dy) {
        for (int64_t dx = 0; dx < p.kw; ++dx, ++row) {
          const T* in = cols + row * npos;
          for_each_tap(p, c, dt, dy, dx, [&](int64_t q, int64_t base, ValidRange rx) {
            for (int64_t ox = rx.lo; ox < rx.hi; ++ox) gx[base + ox * sx] += in[q + ox];
          });
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> conv3d(Var<T> x, Var<T> w, Var<T> bias, Extent3 stride, Extent3 padding) {
  Tape<T>& tape = tape_of(x, "conv3d");
  same_tape(x, w, "conv3d");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  const VolumeGeometry geo = volume_geometry(xv.shape(), "conv3d");
  if (wv.rank() != 5 || wv.dim(1) != geo.channels) {
    throw DimensionError("conv3d: weight " + shape_str(wv.shape()) +
                         " incompatible with input " + shape_str(xv.shape()));
  }
  for (int64_t s : stride) {
    if (s <= 0) throw DimensionError("conv3d: stride must be positive");
  }
  for (int64_t p : padding) {
    if (p < 0) throw DimensionError("conv3d: padding must be non-negative");
  }
  const int64_t cout = wv.dim(0);
  ConvPlan plan{geo.channels, geo.t, geo.h, geo.w, wv.dim(2), wv.dim(3), wv.dim(4),
                stride, padding, 0, 0, 0};
  const int64_t in_ext[3] = {geo.t, geo.h, geo.w};
  const int64_t k_ext[3] = {plan.kt, plan.kh, plan.kw};
  int64_t out_ext[3];
  for (int d = 0; d < 3; ++d) {
    const int64_t padded = in_ext[d] + 2 * padding[static_cast<size_t>(d)];
    if (padded < k_ext[d]) {
      throw DimensionError("conv3d: kernel " + shape_str(wv.shape()) +
                           " larger than padded input " + shape_str(xv.shape()));
    }
    out_ext[d] = (padded - k_ext[d]) / stride[static_cast<size_t>(d)] + 1;
  }
  plan.ot = out_ext[0];
  plan.oh = out_ext[1];
  plan.ow = out_ext[2];
  const bool has_bias = bias.valid();
  if (has_bias) {
    same_tape(x, bias, "conv3d");
    if (bias.value().rank() != 1 || bias.value().dim(0) != cout) {
      throw DimensionError("conv3d: bias " + shape_str(bias.shape()) + " does not match " +
                           std::to_string(cout) + " output channels");
    }
  }
  Shape out_shape = geo.batched ? Shape{geo.batch, cout, plan.ot, plan.oh, plan.ow}
                                : Shape{cout, plan.ot, plan.oh, plan.ow};
  Tensor<T> out(out_shape);
  const int64_t K = plan.cols(), P = plan.positions();
  const int64_t in_stride = geo.channels * geo.t * geo.h * geo.w;
  std::vector<T> cols(static_cast<size_t>(K * P));
  for (int64_t b = 0; b < geo.batch; ++b) {
    im2col(xv.data() + b * in_stride, plan, cols.data());
    T* op = out.data() + b * cout * P;
    if (has_bias) {
      for (int64_t co = 0; co < cout; ++co) std::fill(op + co * P, op + (co + 1) * P, bias.value()[co]);
    }
    kernels::gemm_nn(cout, P, K, wv.data(), K, cols.data(), P, op, P, has_bias);
  }
  const bool rg = tape.requires_grad(x) || tape.requires_grad(w) ||
                  (has_bias && tape.requires_grad(bias));
  return tape.record(
      "conv3d", std::move(out), rg,
      [&tape, x, w, bias, has_bias, plan, geo, cout, in_stride](const Tensor<T>& g) {
        Tensor<T>* gx = tape.grad_sink(x);
        Tensor<T>* gw = tape.grad_sink(w);
        Tensor<T>* gb = has_bias ? tape.grad_sink(bias) : nullptr;
        const int64_t K = plan.cols(), P = plan.positions();
        std::vector<T> cols(static_cast<size_t>(K * P));
        for (int64_t b = 0; b < geo.batch; ++b) {
          const T* gp = g.data() + b * cout * P;
          if (gb) {
            for (int64_t co = 0; co < cout; ++co) {
              T s = T(0);
              for (int64_t q = 0; q < P; ++q) s += gp[co * P + q];
              (*gb)[co] += s;
            }
          }
          if (gw) {
            im2col(x.value().data() + b * in_stride, plan, cols.data());
            kernels::gemm_nt(cout, K, P, gp, P, cols.data(), P, gw->data(), K, true);
          }
          if (gx) {
            kernels::gemm_tn(cout, P, K, w.value().data(), K, gp, P, cols.data(), P, false);
            col2im_add(cols.data(), plan, gx->data() + b * in_stride);
          }
        }
      });
}

template <typename T>
Var<T> maxpool3d(Var<T> x, Extent3 kernel, Extent3 stride) {
  Tape<T>& tape = tape_of(x, "maxpool3d");
  const Tensor<T>& xv = x.value();
  const VolumeGeometry geo = volume_geometry(xv.shape(), "maxpool3d");
  const int64_t in_ext[3] = {geo.t, geo.h, geo.w};
  int64_t out_ext[3];
  for (int d = 0; d < 3; ++d) {
    const int64_t k = kernel[static_cast<size_t>(d)];
    const int64_t s = stride[static_cast<size_t>(d)];
    if (k <= 0 || s <= 0) throw DimensionError("maxpool3d: kernel and stride must be positive");
    if (in_ext[d] < k || in_ext[d] % s != 0 || (in_ext[d] - k) % s != 0) {
      throw DimensionError("maxpool3d: input " + shape_str(xv.shape()) +
                           " not tiled exactly by kernel " + std::to_string(k) + " stride " +
                           std::to_string(s) + " on axis " + std::to_string(d));
    }
    out_ext[d] = (in_ext[d] - k) / s + 1;
  }
  const int64_t planes = geo.batch * geo.channels;
  Shape out_shape = geo.batched
                        ? Shape{geo.batch, geo.channels, out_ext[0], out_ext[1], out_ext[2]}
                        : Shape{geo.channels, out_ext[0], out_ext[1], out_ext[2]};
  Tensor<T> out(out_shape);
  std::vector<int64_t> argmax(static_cast<size_t>(out.numel()));
  const int64_t in_plane = geo.t * geo.h * geo.w;
  const int64_t out_plane = out_ext[0] * out_ext[1] * out_ext[2];
  for (int64_t pl = 0; pl < planes; ++pl) {
    const T* xp = xv.data() + pl * in_plane;
    int64_t q = pl * out_plane;
    for (int64_t ot = 0; ot < out_ext[0]; ++ot) {
      for (int64_t oy = 0; oy < out_ext[1]; ++oy) {
        for (int64_t ox = 0; ox < out_ext[2]; ++ox, ++q) {
          T best = -std::numeric_limits<T>::infinity();
          int64_t best_idx = -1;
          for (int64_t dt = 0; dt < kernel[0]; ++dt) {
            for (int64_t dy = 0; dy < kernel[1]; ++dy) {
              for (int64_t dx = 0; dx < kernel[2]; ++dx) {
                const int64_t idx = ((ot * stride[0] + dt) * geo.h + oy * stride[1] + dy) * geo.w +
                                    ox * stride[2] + dx;
                if (best_idx < 0 || xp[idx] > best) {
                  best = xp[idx];
                  best_idx = idx;
                }
              }
            }
          }
          out[q] = best;
          argmax[static_cast<size_t>(q)] = pl * in_plane + best_idx;
        }
      }
    }
  }
  return tape.record("maxpool3d", std::move(out), {x},
                     [&tape, x, argmax = std::move(argmax)](const Tensor<T>& g) {
                       Tensor<T>* gx = tape.grad_sink(x);
                       if (!gx) return;
                       for (size_t q = 0; q < argmax.size(); ++q) {
                         (*gx)[argmax[q]] += g[static_cast<int64_t>(q)];
                       }
                     });
}

template <typename T>
Var<T> depthwise_temporal_conv(Var<T> x, Var<T> w, Var<T> bias) {
  Tape<T>& tape = tape_of(x, "depthwise_temporal_conv");
  same_tape(x, w, "depthwise_temporal_conv");
  same_tape(x, bias, "depthwise_temporal_conv");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  const Tensor<T>& bv = bias.value();
  if (xv.rank() != 3 || wv.rank() != 2 || wv.dim(0) != xv.dim(2) || wv.dim(1) % 2 == 0 ||
      bv.rank() != 1 || bv.dim(0) != xv.dim(2)) {
    throw DimensionError("depthwise_temporal_conv: input " + shape_str(xv.shape()) + ", weight " +
                         shape_str(wv.shape()) + ", bias " + shape_str(bv.shape()) +
                         " are inconsistent");
  }
  const int64_t batch = xv.dim(0), t = xv.dim(1), d = xv.dim(2), k = wv.dim(1);
  const int64_t half = k / 2;
  Tensor<T> out(xv.shape());
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t ti = 0; ti < t; ++ti) {
      T* op = out.data() + (b * t + ti) * d;
      for (int64_t c = 0; c < d; ++c) op[c] = bv[c];
      for (int64_t j = 0; j < k; ++j) {
        const int64_t src = ti + j - half;
        if (src < 0 || src >= t) continue;
        const T* xp = xv.data() + (b * t + src) * d;
        for (int64_t c = 0; c < d; ++c) op[c] += wv[c * k + j] * xp[c];
      }
    }
  }
  return tape.record(
      "depthwise_temporal_conv", std::move(out), {x, w, bias},
      [&tape, x, w, bias, batch, t, d, k, half](const Tensor<T>& g) {
        Tensor<T>* gx = tape.grad_sink(x);
        Tensor<T>* gw = tape.grad_sink(w);
        Tensor<T>* gb = tape.grad_sink(bias);
        const Tensor<T>& xv = x.value();
        const Tensor<T>& wv = w.value();
        for (int64_t b = 0; b < batch; ++b) {
          for (int64_t ti = 0; ti < t; ++ti) {
            const T* gp = g.data() + (b * t + ti) * d;
            if (gb) {
              for (int64_t c = 0; c < d; ++c) (*gb)[c] += gp[c];
            }
            for (int64_t j = 0; j < k; ++j) {
              const int64_t src = ti + j - half;
              if (src < 0 || src >= t) continue;
              const int64_t off = (b * t + src) * d;
              for (int64_t c = 0; c < d; ++c) {
                if (gw) (*gw)[c * k + j] += gp[c] * xv[off + c];
                if (gx) (*gx)[off + c] += gp[c] * wv[c * k + j];
              }
            }
          }
        }
      });
}

#define LTTD_INSTANTIATE(T)                                             \
  template Var<T> conv3d(Var<T>, Var<T>, Var<T>, Extent3, Extent3);     \
  template Var<T> maxpool3d(Var<T>, Extent3, Extent3);                  \
  template Var<T> depthwise_temporal_conv(Var<T>, Var<T>, Var<T>);
LTTD_INSTANTIATE_FLOATING(LTTD_INSTANTIATE)
#undef LTTD_INSTANTIATE

}  // namespace lttd::num
