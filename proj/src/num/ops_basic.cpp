#include <algorithm>
#include <cmath>
#include <numbers>

#include "lttd/num/ops.hpp"
#include "op_util.hpp"

namespace lttd::num {

using detail::add_into;
using detail::require_same_shape;
using detail::same_tape;
using detail::tape_of;

// ---- elementwise -----------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tape = tape_of(a, "add");
  same_tape(a, b, "add");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_same_shape("add", av, bv);
  Tensor<T> out(av.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
  return tape.record("add", std::move(out), {a, b}, [&tape, a, b](const Tensor<T>& g) {
    add_into(tape.grad_sink(a), g);
    add_into(tape.grad_sink(b), g);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& tape = tape_of(a, "sub");
  same_tape(a, b, "sub");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_same_shape("sub", av, bv);
  Tensor<T> out(av.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] - bv[i];
  return tape.record("sub", std::move(out), {a, b}, [&tape, a, b](const Tensor<T>& g) {
    add_into(tape.grad_sink(a), g);
    if (Tensor<T>* gb = tape.grad_sink(b)) {
      for (int64_t i = 0; i < g.numel(); ++i) (*gb)[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& tape = tape_of(a, "mul");
  same_tape(a, b, "mul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_same_shape("mul", av, bv);
  Tensor<T> out(av.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
  return tape.record("mul", std::move(out), {a, b}, [&tape, a, b](const Tensor<T>& g) {
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    if (Tensor<T>* ga = tape.grad_sink(a)) {
      for (int64_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (Tensor<T>* gb = tape.grad_sink(b)) {
      for (int64_t i = 0; i < g.numel(); ++i) (*gb)[i] += g[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  Tape<T>& tape = tape_of(a, "scale");
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] * s;
  return tape.record("scale", std::move(out), {a}, [&tape, a, s](const Tensor<T>& g) {
    if (Tensor<T>* ga = tape.grad_sink(a)) {
      for (int64_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * s;
    }
  });
}

namespace {

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Var<T> sigmoid(Var<T> a) {
  Tape<T>& tape = tape_of(a, "sigmoid");
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = sigmoid_scalar(av[i]);
  return tape.record("sigmoid", std::move(out), {a}, [&tape, a](const Tensor<T>& g) {
    Tensor<T>* ga = tape.grad_sink(a);
    if (!ga) return;
    const Tensor<T>& x = a.value();
    for (int64_t i = 0; i < g.numel(); ++i) {
      const T s = sigmoid_scalar(x[i]);
      (*ga)[i] += g[i] * s * (T(1) - s);
    }
  });
}

template <typename T>
Var<T> gelu(Var<T> a) {
  Tape<T>& tape = tape_of(a, "gelu");
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape());
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (int64_t i = 0; i < out.numel(); ++i) {
    const T x = av[i];
    out[i] = T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2));
  }
  return tape.record("gelu", std::move(out), {a}, [&tape, a, inv_sqrt2](const Tensor<T>& g) {
    Tensor<T>* ga = tape.grad_sink(a);
    if (!ga) return;
    const Tensor<T>& xv = a.value();
    const T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
    for (int64_t i = 0; i < g.numel(); ++i) {
      const T x = xv[i];
      const T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x * x);
      (*ga)[i] += g[i] * (cdf + x * pdf);
    }
  });
}

template <typename T>
Var<T> elementwise(Elementwise op, std::span<const Var<T>> args) {
  const size_t arity = (op == Elementwise::kAdd || op == Elementwise::kMul) ? 2 : 1;
  if (args.size() != arity) {
    throw ParameterError("elementwise: expected " + std::to_string(arity) + " operands, got " +
                         std::to_string(args.size()));
  }
  switch (op) {
    case Elementwise::kAdd:
      return add(args[0], args[1]);
    case Elementwise::kMul:
      return mul(args[0], args[1]);
    case Elementwise::kSigmoid:
      return sigmoid(args[0]);
    case Elementwise::kGelu:
      return gelu(args[0]);
  }
  throw ParameterError("elementwise: unknown op");
}

template <typename T>
Var<T> add_broadcast(Var<T> x, Var<T> y) {
  Tape<T>& tape = tape_of(x, "add_broadcast");
  same_tape(x, y, "add_broadcast");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& yv = y.value();
  const Shape& xs = xv.shape();
  const Shape& ys = yv.shape();
  if (ys.size() > xs.size() || !std::equal(ys.begin(), ys.end(), xs.end() - ys.size())) {
    throw DimensionError("add_broadcast: " + shape_str(ys) + " is not a trailing shape of " +
                         shape_str(xs));
  }
  const int64_t inner = yv.numel();
  const int64_t outer = xv.numel() / inner;
  Tensor<T> out(xs);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) out[o * inner + i] = xv[o * inner + i] + yv[i];
  }
  return tape.record("add_broadcast", std::move(out), {x, y},
                     [&tape, x, y, inner, outer](const Tensor<T>& g) {
                       add_into(tape.grad_sink(x), g);
                       if (Tensor<T>* gy = tape.grad_sink(y)) {
                         for (int64_t o = 0; o < outer; ++o) {
                           for (int64_t i = 0; i < inner; ++i) (*gy)[i] += g[o * inner + i];
                         }
                       }
                     });
}

template <typename T>
Var<T> broadcast_leading(Var<T> y, const Shape& lead) {
  Tape<T>& tape = tape_of(y, "broadcast_leading");
  const Tensor<T>& yv = y.value();
  Shape out_shape = lead;
  out_shape.insert(out_shape.end(), yv.shape().begin(), yv.shape().end());
  const int64_t inner = yv.numel();
  const int64_t outer = shape_numel(lead);
  Tensor<T> out(out_shape);
  for (int64_t o = 0; o < outer; ++o) std::copy(yv.data(), yv.data() + inner, out.data() + o * inner);
  return tape.record("broadcast_leading", std::move(out), {y},
                     [&tape, y, inner, outer](const Tensor<T>& g) {
                       if (Tensor<T>* gy = tape.grad_sink(y)) {
                         for (int64_t o = 0; o < outer; ++o) {
                           for (int64_t i = 0; i < inner; ++i) (*gy)[i] += g[o * inner + i];
                         }
                       }
                     });
}

// ---- reductions ------------------------------------------------------------

template <typename T>
Var<T> sum(Var<T> a) {
  Tape<T>& tape = tape_of(a, "sum");
  const Tensor<T>& av = a.value();
  T s = T(0);
  for (int64_t i = 0; i < av.numel(); ++i) s += av[i];
  return tape.record("sum", Tensor<T>::scalar(s), {a}, [&tape, a](const Tensor<T>& g) {
    if (Tensor<T>* ga = tape.grad_sink(a)) {
      for (int64_t i = 0; i < ga->numel(); ++i) (*ga)[i] += g[0];
    }
  });
}

template <typename T>
Var<T> mean_axis(Var<T> a, int64_t axis) {
  Tape<T>& tape = tape_of(a, "mean_axis");
  const Tensor<T>& av = a.value();
  const int64_t rank = static_cast<int64_t>(av.rank());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw DimensionError("mean_axis: axis " + std::to_string(axis) + " invalid for shape " +
                         shape_str(av.shape()));
  }
  const Shape& s = av.shape();
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= s[static_cast<size_t>(d)];
  for (int64_t d = axis + 1; d < rank; ++d) inner *= s[static_cast<size_t>(d)];
  const int64_t len = s[static_cast<size_t>(axis)];
  Shape out_shape;
  for (int64_t d = 0; d < rank; ++d) {
    if (d != axis) out_shape.push_back(s[static_cast<size_t>(d)]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor<T> out(out_shape);
  const T inv = T(1) / static_cast<T>(len);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      T acc = T(0);
      for (int64_t l = 0; l < len; ++l) acc += av[(o * len + l) * inner + i];
      out[o * inner + i] = acc * inv;
    }
  }
  return tape.record("mean_axis", std::move(out), {a},
                     [&tape, a, outer, inner, len, inv](const Tensor<T>& g) {
                       Tensor<T>* ga = tape.grad_sink(a);
                       if (!ga) return;
                       for (int64_t o = 0; o < outer; ++o) {
                         for (int64_t l = 0; l < len; ++l) {
                           for (int64_t i = 0; i < inner; ++i) {
                             (*ga)[(o * len + l) * inner + i] += g[o * inner + i] * inv;
                           }
                         }
                       }
                     });
}

// ---- shape -----------------------------------------------------------------

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tape<T>& tape = tape_of(a, "reshape");
  const Tensor<T>& av = a.value();
  if (shape_numel(shape) != av.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(av.shape()) + " as " +
                         shape_str(shape));
  }
  return tape.record("reshape", av.reshaped(std::move(shape)), {a},
                     [&tape, a](const Tensor<T>& g) { add_into(tape.grad_sink(a), g); });
}

namespace {

// out[permuted index] = in[index]; out shape = in shape permuted by `axes`.
// With accumulate, adds into `out` instead of assigning.
template <typename T>
void permute_copy(const T* in, const Shape& in_shape, const std::vector<int64_t>& axes, T* out,
                  bool accumulate) {
  const size_t r = in_shape.size();
  std::vector<int64_t> in_strides(r, 1);
  for (size_t d = r; d-- > 1;) in_strides[d - 1] = in_strides[d] * in_shape[d];
  Shape out_shape(r);
  std::vector<int64_t> src_stride(r);
  for (size_t d = 0; d < r; ++d) {
    out_shape[d] = in_shape[static_cast<size_t>(axes[d])];
    src_stride[d] = in_strides[static_cast<size_t>(axes[d])];
  }
  const int64_t total = shape_numel(in_shape);
  const int64_t last_extent = out_shape[r - 1];
  const int64_t last_stride = src_stride[r - 1];
  std::vector<int64_t> idx(r, 0);
  int64_t src = 0;
  for (int64_t o = 0; o < total; o += last_extent) {
    T* dst = out + o;
    if (accumulate) {
      for (int64_t j = 0; j < last_extent; ++j) dst[j] += in[src + j * last_stride];
    } else {
      for (int64_t j = 0; j < last_extent; ++j) dst[j] = in[src + j * last_stride];
    }
    // Advance the odometer over all but the last output axis.
    for (size_t d = r - 1; d-- > 0;) {
      ++idx[d];
      src += src_stride[d];
      if (idx[d] < out_shape[d]) break;
      src -= src_stride[d] * out_shape[d];
      idx[d] = 0;
    }
  }
}

}  // namespace

template <typename T>
Var<T> permute(Var<T> a, std::vector<int64_t> axes) {
  Tape<T>& tape = tape_of(a, "permute");
  const Tensor<T>& av = a.value();
  const size_t r = av.rank();
  std::vector<bool> seen(r, false);
  if (axes.size() != r) {
    throw DimensionError("permute: " + std::to_string(axes.size()) + " axes for shape " +
                         shape_str(av.shape()));
  }
  for (int64_t ax : axes) {
    if (ax < 0 || ax >= static_cast<int64_t>(r) || seen[static_cast<size_t>(ax)]) {
      throw DimensionError("permute: invalid axis list for shape " + shape_str(av.shape()));
    }
    seen[static_cast<size_t>(ax)] = true;
  }
  Shape out_shape(r);
  for (size_t d = 0; d < r; ++d) out_shape[d] = av.shape()[static_cast<size_t>(axes[d])];
  Tensor<T> out(out_shape);
  permute_copy(av.data(), av.shape(), axes, out.data(), false);
  std::vector<int64_t> inverse(r);
  for (size_t d = 0; d < r; ++d) inverse[static_cast<size_t>(axes[d])] = static_cast<int64_t>(d);
  return tape.record("permute", std::move(out), {a},
                     [&tape, a, inverse, out_shape](const Tensor<T>& g) {
                       if (Tensor<T>* ga = tape.grad_sink(a)) {
                         permute_copy(g.data(), out_shape, inverse, ga->data(), true);
                       }
                     });
}

template <typename T>
Var<T> slice(Var<T> a, int64_t axis, int64_t start, int64_t length) {
  Tape<T>& tape = tape_of(a, "slice");
  const Tensor<T>& av = a.value();
  const int64_t rank = static_cast<int64_t>(av.rank());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw DimensionError("slice: axis invalid for shape " + shape_str(av.shape()));
  }
  const Shape& s = av.shape();
  const int64_t extent = s[static_cast<size_t>(axis)];
  if (start < 0 || length <= 0 || start + length > extent) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") outside axis of extent " +
                         std::to_string(extent));
  }
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= s[static_cast<size_t>(d)];
  for (int64_t d = axis + 1; d < rank; ++d) inner *= s[static_cast<size_t>(d)];
  Shape out_shape = s;
  out_shape[static_cast<size_t>(axis)] = length;
  Tensor<T> out(out_shape);
  for (int64_t o = 0; o < outer; ++o) {
    const T* src = av.data() + (o * extent + start) * inner;
    std::copy(src, src + length * inner, out.data() + o * length * inner);
  }
  return tape.record("slice", std::move(out), {a},
                     [&tape, a, outer, inner, extent, start, length](const Tensor<T>& g) {
                       Tensor<T>* ga = tape.grad_sink(a);
                       if (!ga) return;
                       for (int64_t o = 0; o < outer; ++o) {
                         T* dst = ga->data() + (o * extent + start) * inner;
                         const T* src = g.data() + o * length * inner;
                         for (int64_t i = 0; i < length * inner; ++i) dst[i] += src[i];
                       }
                     });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> xs, int64_t axis) {
  if (xs.empty()) throw DimensionError("concat: no operands");
  Tape<T>& tape = tape_of(xs[0], "concat");
  const Shape& s0 = xs[0].shape();
  const int64_t rank = static_cast<int64_t>(s0.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw DimensionError("concat: axis invalid for shape " + shape_str(s0));
  }
  std::vector<int64_t> extents;
  int64_t total = 0;
  bool rg = false;
  for (const Var<T>& x : xs) {
    same_tape(xs[0], x, "concat");
    const Shape& s = x.shape();
    if (static_cast<int64_t>(s.size()) != rank) {
      throw DimensionError("concat: rank mismatch " + shape_str(s0) + " vs " + shape_str(s));
    }
    for (int64_t d = 0; d < rank; ++d) {
      if (d != axis && s[static_cast<size_t>(d)] != s0[static_cast<size_t>(d)]) {
        throw DimensionError("concat: shape mismatch " + shape_str(s0) + " vs " + shape_str(s));
      }
    }
    extents.push_back(s[static_cast<size_t>(axis)]);
    total += s[static_cast<size_t>(axis)];
    rg = rg || tape.requires_grad(x);
  }
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= s0[static_cast<size_t>(d)];
  for (int64_t d = axis + 1; d < rank; ++d) inner *= s0[static_cast<size_t>(d)];
  Shape out_shape = s0;
  out_shape[static_cast<size_t>(axis)] = total;
  Tensor<T> out(out_shape);
  int64_t offset = 0;
  for (size_t k = 0; k < xs.size(); ++k) {
    const Tensor<T>& xv = xs[k].value();
    const int64_t len = extents[k];
    for (int64_t o = 0; o < outer; ++o) {
      std::copy(xv.data() + o * len * inner, xv.data() + (o + 1) * len * inner,
                out.data() + (o * total + offset) * inner);
    }
    offset += len;
  }
  std::vector<Var<T>> inputs(xs.begin(), xs.end());
  return tape.record("concat", std::move(out), rg,
                     [&tape, inputs, extents, outer, inner, total](const Tensor<T>& g) {
                       int64_t offset = 0;
                       for (size_t k = 0; k < inputs.size(); ++k) {
                         const int64_t len = extents[k];
                         if (Tensor<T>* gx = tape.grad_sink(inputs[k])) {
                           for (int64_t o = 0; o < outer; ++o) {
                             const T* src = g.data() + (o * total + offset) * inner;
                             T* dst = gx->data() + o * len * inner;
                             for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                           }
                         }
                         offset += len;
                       }
                     });
}

#define LTTD_INSTANTIATE(T)                                                            \
  template Var<T> add(Var<T>, Var<T>);                                                 \
  template Var<T> sub(Var<T>, Var<T>);                                                 \
  template Var<T> mul(Var<T>, Var<T>);                                                 \
  template Var<T> scale(Var<T>, T);                                                    \
  template Var<T> sigmoid(Var<T>);                                                     \
  template Var<T> gelu(Var<T>);                                                        \
  template Var<T> elementwise(Elementwise, std::span<const Var<T>>);                   \
  template Var<T> add_broadcast(Var<T>, Var<T>);                                       \
  template Var<T> broadcast_leading(Var<T>, const Shape&);                             \
  template Var<T> sum(Var<T>);                                                         \
  template Var<T> mean_axis(Var<T>, int64_t);                                          \
  template Var<T> reshape(Var<T>, Shape);                                              \
  template Var<T> permute(Var<T>, std::vector<int64_t>);                               \
  template Var<T> slice(Var<T>, int64_t, int64_t, int64_t);                            \
  template Var<T> concat(std::span<const Var<T>>, int64_t);
LTTD_INSTANTIATE_FLOATING(LTTD_INSTANTIATE)
#undef LTTD_INSTANTIATE

}  // namespace lttd::num
