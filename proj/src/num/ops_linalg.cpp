#include <cmath>

#include "kernels.hpp"
#include "lttd/num/ops.hpp"
#include "op_util.hpp"

namespace lttd::num {

using detail::same_tape;
using detail::tape_of;

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tape<T>& tape = tape_of(a, "matmul");
  same_tape(a, b, "matmul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(av.shape()) + " and " +
                         shape_str(bv.shape()));
  }
  const int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor<T> out({m, n});
  kernels::gemm_nn(m, n, k, av.data(), k, bv.data(), n, out.data(), n, false);
  return tape.record("matmul", std::move(out), {a, b}, [&tape, a, b, m, n, k](const Tensor<T>& g) {
    if (Tensor<T>* ga = tape.grad_sink(a)) {
      kernels::gemm_nt(m, k, n, g.data(), n, b.value().data(), n, ga->data(), k, true);
    }
    if (Tensor<T>* gb = tape.grad_sink(b)) {
      kernels::gemm_tn(m, n, k, a.value().data(), k, g.data(), n, gb->data(), n, true);
    }
  });
}

template <typename T>
Var<T> batched_matmul(Var<T> a, Var<T> b, bool transpose_b) {
  Tape<T>& tape = tape_of(a, "batched_matmul");
  same_tape(a, b, "batched_matmul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  auto fail = [&] {
    throw DimensionError("batched_matmul: incompatible shapes " + shape_str(av.shape()) + " and " +
                         shape_str(bv.shape()) + (transpose_b ? " (b transposed)" : ""));
  };
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0)) fail();
  const int64_t batch = av.dim(0), m = av.dim(1), k = av.dim(2);
  const int64_t n = transpose_b ? bv.dim(1) : bv.dim(2);
  if ((transpose_b ? bv.dim(2) : bv.dim(1)) != k) fail();
  Tensor<T> out({batch, m, n});
  for (int64_t i = 0; i < batch; ++i) {
    const T* ap = av.data() + i * m * k;
    const T* bp = bv.data() + i * k * n;
    T* cp = out.data() + i * m * n;
    if (transpose_b) {
      kernels::gemm_nt(m, n, k, ap, k, bp, k, cp, n, false);
    } else {
      kernels::gemm_nn(m, n, k, ap, k, bp, n, cp, n, false);
    }
  }
  return tape.record(
      "batched_matmul", std::move(out), {a, b},
      [&tape, a, b, batch, m, n, k, transpose_b](const Tensor<T>& g) {
        Tensor<T>* ga = tape.grad_sink(a);
        Tensor<T>* gb = tape.grad_sink(b);
        const Tensor<T>& av = a.value();
        const Tensor<T>& bv = b.value();
        for (int64_t i = 0; i < batch; ++i) {
          const T* gp = g.data() + i * m * n;
          const T* ap = av.data() + i * m * k;
          const T* bp = bv.data() + i * k * n;
          if (ga) {
            // dA = dC · B^T (or dC · B when B was transposed).
            if (transpose_b) {
              kernels::gemm_nn(m, k, n, gp, n, bp, k, ga->data() + i * m * k, k, true);
            } else {
              kernels::gemm_nt(m, k, n, gp, n, bp, n, ga->data() + i * m * k, k, true);
            }
          }
          if (gb) {
            if (transpose_b) {
              // B is [n,k]: dB = dC^T · A.
              kernels::gemm_tn(m, k, n, gp, n, ap, k, gb->data() + i * k * n, k, true);
            } else {
              kernels::gemm_tn(m, n, k, ap, k, gp, n, gb->data() + i * k * n, n, true);
            }
          }
        }
      });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias) {
  Tape<T>& tape = tape_of(x, "linear");
  same_tape(x, w, "linear");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  if (wv.rank() != 2 || xv.dim(-1) != wv.dim(0)) {
    throw DimensionError("linear: input " + shape_str(xv.shape()) + " incompatible with weight " +
                         shape_str(wv.shape()));
  }
  const int64_t in = wv.dim(0), out_dim = wv.dim(1);
  const int64_t rows = xv.numel() / in;
  const bool has_bias = bias.valid();
  if (has_bias) {
    same_tape(x, bias, "linear");
    if (bias.value().rank() != 1 || bias.value().dim(0) != out_dim) {
      throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match output " +
                           std::to_string(out_dim));
    }
  }
  Shape out_shape = xv.shape();
  out_shape.back() = out_dim;
  Tensor<T> out(out_shape);
  if (has_bias) {
    const T* bp = bias.value().data();
    for (int64_t r = 0; r < rows; ++r) std::copy(bp, bp + out_dim, out.data() + r * out_dim);
  }
  kernels::gemm_nn(rows, out_dim, in, xv.data(), in, wv.data(), out_dim, out.data(), out_dim,
                   has_bias);
  const bool rg = tape.requires_grad(x) || tape.requires_grad(w) ||
                  (has_bias && tape.requires_grad(bias));
  return tape.record("linear", std::move(out), rg,
                     [&tape, x, w, bias, has_bias, rows, in, out_dim](const Tensor<T>& g) {
                       if (Tensor<T>* gx = tape.grad_sink(x)) {
                         kernels::gemm_nt(rows, in, out_dim, g.data(), out_dim, w.value().data(),
                                          out_dim, gx->data(), in, true);
                       }
                       if (Tensor<T>* gw = tape.grad_sink(w)) {
                         kernels::gemm_tn(rows, out_dim, in, x.value().data(), in, g.data(),
                                          out_dim, gw->data(), out_dim, true);
                       }
                       if (has_bias) {
                         if (Tensor<T>* gb = tape.grad_sink(bias)) {
                           for (int64_t r = 0; r < rows; ++r) {
                             const T* gp = g.data() + r * out_dim;
                             for (int64_t j = 0; j < out_dim; ++j) (*gb)[j] += gp[j];
                           }
                         }
                       }
                     });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  Tape<T>& tape = tape_of(x, "layer_norm");
  same_tape(x, gamma, "layer_norm");
  same_tape(x, beta, "layer_norm");
  if (!(eps > T(0))) throw ParameterError("layer_norm: eps must be positive");
  const Tensor<T>& xv = x.value();
  const int64_t d = xv.dim(-1);
  if (gamma.value().rank() != 1 || gamma.value().dim(0) != d || beta.value().rank() != 1 ||
      beta.value().dim(0) != d) {
    throw DimensionError("layer_norm: affine parameters " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " do not match last extent of " +
                         shape_str(xv.shape()));
  }
  const int64_t rows = xv.numel() / d;
  const Tensor<T>& gv = gamma.value();
  const Tensor<T>& bv = beta.value();
  Tensor<T> out(xv.shape());
  Tensor<T> xhat(xv.shape());
  std::vector<T> rstd(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const T* xp = xv.data() + r * d;
    T mean = T(0);
    for (int64_t j = 0; j < d; ++j) mean += xp[j];
    mean /= static_cast<T>(d);
    T var = T(0);
    for (int64_t j = 0; j < d; ++j) var += (xp[j] - mean) * (xp[j] - mean);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    rstd[static_cast<size_t>(r)] = rs;
    T* hp = xhat.data() + r * d;
    T* op = out.data() + r * d;
    for (int64_t j = 0; j < d; ++j) {
      hp[j] = (xp[j] - mean) * rs;
      op[j] = hp[j] * gv[j] + bv[j];
    }
  }
  return tape.record(
      "layer_norm", std::move(out), {x, gamma, beta},
      [&tape, x, gamma, beta, d, rows, xhat = std::move(xhat),
       rstd = std::move(rstd)](const Tensor<T>& g) {
        const Tensor<T>& gv = gamma.value();
        Tensor<T>* gx = tape.grad_sink(x);
        Tensor<T>* gg = tape.grad_sink(gamma);
        Tensor<T>* gb = tape.grad_sink(beta);
        std::vector<T> dxhat(static_cast<size_t>(d));
        for (int64_t r = 0; r < rows; ++r) {
          const T* gp = g.data() + r * d;
          const T* hp = xhat.data() + r * d;
          if (gg) {
            for (int64_t j = 0; j < d; ++j) (*gg)[j] += gp[j] * hp[j];
          }
          if (gb) {
            for (int64_t j = 0; j < d; ++j) (*gb)[j] += gp[j];
          }
          if (gx) {
            T mean_dh = T(0), mean_dh_h = T(0);
            for (int64_t j = 0; j < d; ++j) {
              dxhat[static_cast<size_t>(j)] = gp[j] * gv[j];
              mean_dh += dxhat[static_cast<size_t>(j)];
              mean_dh_h += dxhat[static_cast<size_t>(j)] * hp[j];
            }
            mean_dh /= static_cast<T>(d);
            mean_dh_h /= static_cast<T>(d);
            const T rs = rstd[static_cast<size_t>(r)];
            T* gxp = gx->data() + r * d;
            for (int64_t j = 0; j < d; ++j) {
              gxp[j] += rs * (dxhat[static_cast<size_t>(j)] - mean_dh - hp[j] * mean_dh_h);
            }
          }
        }
      });
}

template <typename T>
Var<T> softmax(Var<T> x) {
  Tape<T>& tape = tape_of(x, "softmax");
  const Tensor<T>& xv = x.value();
  const int64_t n = xv.dim(-1);
  const int64_t rows = xv.numel() / n;
  Tensor<T> out(xv.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const T* xp = xv.data() + r * n;
    T* op = out.data() + r * n;
    T mx = xp[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, xp[j]);
    T s = T(0);
    for (int64_t j = 0; j < n; ++j) {
      op[j] = std::exp(xp[j] - mx);
      s += op[j];
    }
    const T inv = T(1) / s;
    for (int64_t j = 0; j < n; ++j) op[j] *= inv;
  }
  Tensor<T> y = out;
  return tape.record("softmax", std::move(out), {x},
                     [&tape, x, n, rows, y = std::move(y)](const Tensor<T>& g) {
                       Tensor<T>* gx = tape.grad_sink(x);
                       if (!gx) return;
                       for (int64_t r = 0; r < rows; ++r) {
                         const T* gp = g.data() + r * n;
                         const T* yp = y.data() + r * n;
                         T dot = T(0);
                         for (int64_t j = 0; j < n; ++j) dot += gp[j] * yp[j];
                         T* gxp = gx->data() + r * n;
                         for (int64_t j = 0; j < n; ++j) gxp[j] += yp[j] * (gp[j] - dot);
                       }
                     });
}

#define LTTD_INSTANTIATE(T)                                   \
  template Var<T> matmul(Var<T>, Var<T>);                     \
  template Var<T> batched_matmul(Var<T>, Var<T>, bool);       \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);             \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);      \
  template Var<T> softmax(Var<T>);
LTTD_INSTANTIATE_FLOATING(LTTD_INSTANTIATE)
#undef LTTD_INSTANTIATE

}  // namespace lttd::num
