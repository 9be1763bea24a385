#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lttd/num/tape.hpp"
#include "lttd/num/tensor.hpp"

// Differentiable primitives. Every op records its result on the tape of its
// first operand and registers an exact reverse-mode rule. Operands must share
// a tape. No implicit broadcasting: ops that combine different shapes say so
// in their name.
namespace lttd::num {

// ---- elementwise -----------------------------------------------------------

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T s);
template <typename T> Var<T> sigmoid(Var<T> a);
// Exact (erf) GELU.
template <typename T> Var<T> gelu(Var<T> a);

enum class Elementwise { kAdd, kMul, kSigmoid, kGelu };

// Dispatches to the ops above: binary kinds take two args, unary kinds one.
template <typename T> Var<T> elementwise(Elementwise op, std::span<const Var<T>> args);

// x[..., S] + y[S] where S is the trailing part of x's shape.
template <typename T> Var<T> add_broadcast(Var<T> x, Var<T> y);

// Repeats y along new leading axes: result shape = lead ++ y.shape.
template <typename T> Var<T> broadcast_leading(Var<T> y, const Shape& lead);

// ---- reductions ------------------------------------------------------------

template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> mean_axis(Var<T> a, int64_t axis);

// ---- shape -----------------------------------------------------------------

template <typename T> Var<T> reshape(Var<T> a, Shape shape);
template <typename T> Var<T> permute(Var<T> a, std::vector<int64_t> axes);
template <typename T> Var<T> slice(Var<T> a, int64_t axis, int64_t start, int64_t length);
template <typename T> Var<T> concat(std::span<const Var<T>> xs, int64_t axis);

// ---- linear algebra --------------------------------------------------------

// a[m,k] @ b[k,n].
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
// a[B,m,k] @ b[B,k,n], or b[B,n,k]^T when transpose_b.
template <typename T> Var<T> batched_matmul(Var<T> a, Var<T> b, bool transpose_b = false);
// x[..., in] @ w[in, out] + bias[out].
template <typename T> Var<T> linear(Var<T> x, Var<T> w, Var<T> bias);

// ---- normalization / attention pieces -------------------------------------

template <typename T> Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps);
// Softmax over the last axis.
template <typename T> Var<T> softmax(Var<T> x);

// ---- volumetric ------------------------------------------------------------

using Extent3 = std::array<int64_t, 3>;

// Cross-correlation. x: [Cin,T,H,W] or [B,Cin,T,H,W]; w: [Cout,Cin,kt,kh,kw];
// bias: [Cout] or an invalid Var for none. Zero padding.
template <typename T>
Var<T> conv3d(Var<T> x, Var<T> w, Var<T> bias, Extent3 stride, Extent3 padding);

// Windowed maximum over the last three axes of x ([C,T,H,W] or [B,C,T,H,W]).
// Extents must be divisible by the stride and windows must tile exactly.
// Gradient goes to the first maximal element of each window.
template <typename T> Var<T> maxpool3d(Var<T> x, Extent3 kernel, Extent3 stride);

// Per-channel temporal convolution of x[B,T,D] with w[D,K] (K odd) and
// bias[D], zero same-padding, stride 1. Equivalent to a depthwise conv3d over
// a D-channel T×1×1 volume.
template <typename T> Var<T> depthwise_temporal_conv(Var<T> x, Var<T> w, Var<T> bias);

// ---- losses ----------------------------------------------------------------

// Pairwise cosine similarity of the rows of z[N,D]. Rows with norm below
// 1e-8 raise NumericError naming the row.
template <typename T> Var<T> cosine_similarity_matrix(Var<T> z);

enum class Reduction { kSum, kMean };

// Σ max(|a - b| - margin, 0)^2 (or its mean) over all elements.
template <typename T>
Var<T> margin_hinge_squared(Var<T> a, Var<T> b, T margin, Reduction reduction);

// Binary cross-entropy on a single logit, log-sum-exp stable.
template <typename T> Var<T> bce_with_logits(Var<T> logit, int label);

}  // namespace lttd::num
