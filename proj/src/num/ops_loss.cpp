#include <cmath>

#include "lttd/num/ops.hpp"
#include "op_util.hpp"

namespace lttd::num {

using detail::same_tape;
using detail::tape_of;

template <typename T>
Var<T> cosine_similarity_matrix(Var<T> z) {
  Tape<T>& tape = tape_of(z, "cosine_similarity_matrix");
  const Tensor<T>& zv = z.value();
  if (zv.rank() != 2) {
    throw DimensionError("cosine_similarity_matrix: expected [N,D], got " + shape_str(zv.shape()));
  }
  const int64_t n = zv.dim(0), d = zv.dim(1);
  std::vector<T> norms(static_cast<size_t>(n));
  Tensor<T> unit(zv.shape());
  for (int64_t p = 0; p < n; ++p) {
    const T* zp = zv.data() + p * d;
    T ss = T(0);
    for (int64_t j = 0; j < d; ++j) ss += zp[j] * zp[j];
    const T norm = std::sqrt(ss);
    if (!(norm > T(1e-8))) {
      throw NumericError("cosine_similarity_matrix: row " + std::to_string(p) +
                         " has norm below 1e-8");
    }
    norms[static_cast<size_t>(p)] = norm;
    for (int64_t j = 0; j < d; ++j) unit[p * d + j] = zp[j] / norm;
  }
  Tensor<T> sim({n, n});
  for (int64_t p = 0; p < n; ++p) {
    for (int64_t q = p; q < n; ++q) {
      T dot = T(0);
      const T* up = unit.data() + p * d;
      const T* uq = unit.data() + q * d;
      for (int64_t j = 0; j < d; ++j) dot += up[j] * uq[j];
      sim[p * n + q] = dot;
      sim[q * n + p] = dot;
    }
  }
  return tape.record(
      "cosine_similarity_matrix", std::move(sim), {z},
      [&tape, z, n, d, norms = std::move(norms), unit = std::move(unit)](const Tensor<T>& g) {
        Tensor<T>* gz = tape.grad_sink(z);
        if (!gz) return;
        // dU = (G + G^T) U, then project out the radial part of each row.
        std::vector<T> du(static_cast<size_t>(d));
        for (int64_t p = 0; p < n; ++p) {
          std::fill(du.begin(), du.end(), T(0));
          for (int64_t q = 0; q < n; ++q) {
            const T c = g[p * n + q] + g[q * n + p];
            if (c == T(0)) continue;
            const T* uq = unit.data() + q * d;
            for (int64_t j = 0; j < d; ++j) du[static_cast<size_t>(j)] += c * uq[j];
          }
          const T* up = unit.data() + p * d;
          T radial = T(0);
          for (int64_t j = 0; j < d; ++j) radial += du[static_cast<size_t>(j)] * up[j];
          const T inv = T(1) / norms[static_cast<size_t>(p)];
          T* gp = gz->data() + p * d;
          for (int64_t j = 0; j < d; ++j) {
            gp[j] += (du[static_cast<size_t>(j)] - radial * up[j]) * inv;
          }
        }
      });
}

template <typename T>
Var<T> margin_hinge_squared(Var<T> a, Var<T> b, T margin, Reduction reduction) {
  Tape<T>& tape = tape_of(a, "margin_hinge_squared");
  same_tape(a, b, "margin_hinge_squared");
  detail::require_same_shape("margin_hinge_squared", a.value(), b.value());
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const int64_t n = av.numel();
  const T norm = reduction == Reduction::kMean ? T(1) / static_cast<T>(n) : T(1);
  T total = T(0);
  for (int64_t i = 0; i < n; ++i) {
    const T excess = std::abs(av[i] - bv[i]) - margin;
    if (excess > T(0)) total += excess * excess;
  }
  return tape.record("margin_hinge_squared", Tensor<T>::scalar(total * norm), {a, b},
                     [&tape, a, b, margin, norm, n](const Tensor<T>& g) {
                       Tensor<T>* ga = tape.grad_sink(a);
                       Tensor<T>* gb = tape.grad_sink(b);
                       const Tensor<T>& av = a.value();
                       const Tensor<T>& bv = b.value();
                       for (int64_t i = 0; i < n; ++i) {
                         const T diff = av[i] - bv[i];
                         const T excess = std::abs(diff) - margin;
                         if (!(excess > T(0))) continue;
                         const T sign = diff > T(0) ? T(1) : T(-1);
                         const T dv = g[0] * norm * T(2) * excess * sign;
                         if (ga) (*ga)[i] += dv;
                         if (gb) (*gb)[i] -= dv;
                       }
                     });
}

template <typename T>
Var<T> bce_with_logits(Var<T> logit, int label) {
  Tape<T>& tape = tape_of(logit, "bce_with_logits");
  if (label != 0 && label != 1) throw ParameterError("bce_with_logits: label must be 0 or 1");
  if (logit.numel() != 1) {
    throw DimensionError("bce_with_logits: expected a single logit, got " +
                         shape_str(logit.shape()));
  }
  const T x = logit.value()[0];
  const T y = static_cast<T>(label);
  const T loss = std::max(x, T(0)) - x * y + std::log1p(std::exp(-std::abs(x)));
  return tape.record("bce_with_logits", Tensor<T>::scalar(loss), {logit},
                     [&tape, logit, y](const Tensor<T>& g) {
                       Tensor<T>* gl = tape.grad_sink(logit);
                       if (!gl) return;
                       const T x = logit.value()[0];
                       const T s = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                                             : std::exp(x) / (T(1) + std::exp(x));
                       (*gl)[0] += g[0] * (s - y);
                     });
}

#define LTTD_INSTANTIATE(T)                                                 \
  template Var<T> cosine_similarity_matrix(Var<T>);                         \
  template Var<T> margin_hinge_squared(Var<T>, Var<T>, T, Reduction);       \
  template Var<T> bce_with_logits(Var<T>, int);
LTTD_INSTANTIATE_FLOATING(LTTD_INSTANTIATE)
#undef LTTD_INSTANTIATE

}  // namespace lttd::num
