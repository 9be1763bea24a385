#pragma once

#include <cstdint>

#include "lttd/num/ops.hpp"
#include "lttd/num/tensor.hpp"

namespace lttd {

using num::Reduction;
using num::Tensor;
using num::TensorD;
using num::TensorF;
using num::Var;

struct CpiConfig {
  double margin = 0.1;
  Reduction reduction = Reduction::kSum;

  void validate() const;
};

// content_tokens [N, T, D] -> [N, D], arithmetic mean over t.
template <typename T>
Var<T> temporal_mean(Var<T> content_tokens);

// Dense cosine similarity of the rows of z [N, D]; zero-norm rows raise
// NumericError naming the row.
template <typename T>
Var<T> cosine_sim_matrix(Var<T> z) {
  return num::cosine_similarity_matrix(z);
}

// Per-location modification level m ∈ [0,1]^N from a T×H×W mask: temporal
// sum, division by its maximum (all-zero stays zero), then bilinear
// half-pixel resampling to a √N×√N grid, flattened row-major.
TensorD mask_levels(const TensorF& mask, int64_t n);

// sim_gt[p,q] = 1 - 2·|m_p - m_q|. An all-zero mask yields the all-ones
// matrix. Throws DimensionError when N is not a perfect square.
TensorD gt_similarity(const TensorF& mask, int64_t n);

// Σ_{p,q} max(|sim - sim_gt| - μ, 0)^2 (or the mean, per cfg).
template <typename T>
Var<T> cpi_loss(Var<T> sim, Var<T> sim_gt, const CpiConfig& cfg);

}  // namespace lttd
