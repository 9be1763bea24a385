#pragma once

#include <cstdint>

#include "lttd/lst.hpp"
#include "lttd/num/ops.hpp"
#include "lttd/partition.hpp"

namespace lttd {

struct CpaConfig {
  int64_t blocks = 3;
  int64_t heads = 6;
  int64_t mlp_ratio = 4;
  double ln_eps = 1e-6;
  // Off: mean-pool the location tokens into the head (ablation).
  bool aggregation = true;
};

void add_cpa_params(ParamLayout& layout, const CpaConfig& cfg, int64_t dim);

template <typename T>
struct CpaOutput {
  Var<T> logit;     // [1]
  Var<T> features;  // [D], the input of the final affine head
};

// Prepends the class token to the N location tokens, runs the aggregation
// blocks over all N+1 tokens (no positional embedding), and applies the
// affine head to the class-token output.
template <typename T>
CpaOutput<T> cpa_forward(Var<T> temporal_tokens, const BoundParams<T>& params,
                         const CpaConfig& cfg, ForwardProbe* probe = nullptr);

struct Prediction {
  double logit = 0.0;
  double probability = 0.5;

  static Prediction from_logit(double logit);
};

template <typename T>
Var<T> bce_loss(Var<T> logit, Label label) {
  return num::bce_with_logits(logit, static_cast<int>(label));
}

// bce + lambda·cpi, lambda >= 0.
template <typename T>
Var<T> total_loss(Var<T> bce, Var<T> cpi, double lambda);

}  // namespace lttd
