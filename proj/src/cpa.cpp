#include "lttd/cpa.hpp"

#include <cmath>

#include "lttd/num/ops.hpp"

namespace lttd {

using namespace num;

void add_cpa_params(ParamLayout& layout, const CpaConfig& cfg, int64_t dim) {
  if (cfg.aggregation) {
    if (cfg.blocks < 1) throw ParameterError("CpaConfig: blocks must be at least 1");
    if (cfg.heads < 1 || dim % cfg.heads != 0) {
      throw ParameterError("CpaConfig: dim must be divisible by heads");
    }
    layout.add("cpa.class_token", {dim}, Init::kTruncNormal);
    for (int64_t b = 0; b < cfg.blocks; ++b) {
      add_transformer_block(layout, "cpa.block" + std::to_string(b) + ".", dim,
                            dim * cfg.mlp_ratio);
    }
  }
  layout.add("cpa.head.w", {dim, 1}, Init::kTruncNormal);
  layout.add("cpa.head.b", {1}, Init::kZeros);
}

template <typename T>
CpaOutput<T> cpa_forward(Var<T> temporal_tokens, const BoundParams<T>& params,
                         const CpaConfig& cfg, ForwardProbe* probe) {
  const Tensor<T>& tv = temporal_tokens.value();
  const int64_t d = params("cpa.head.w").dim(0);
  if (tv.rank() != 2 || tv.dim(1) != d) {
    throw DimensionError("cpa_forward: expected [N," + std::to_string(d) + "], got " +
                         shape_str(tv.shape()));
  }
  const int64_t n = tv.dim(0);
  Var<T> features;
  if (cfg.aggregation) {
    const Var<T> parts[] = {reshape(params("cpa.class_token"), {1, d}), temporal_tokens};
    Var<T> x = reshape(concat<T>(parts, 0), {1, n + 1, d});
    for (int64_t b = 0; b < cfg.blocks; ++b) {
      x = transformer_block(x, params, "cpa.block" + std::to_string(b) + ".", cfg.heads,
                            cfg.ln_eps, probe, "cpa");
    }
    features = reshape(slice(x, 1, 0, 1), {1, d});
  } else {
    features = reshape(mean_axis(temporal_tokens, 0), {1, d});
  }
  Var<T> logit = reshape(linear(features, params("cpa.head.w"), params("cpa.head.b")), {1});
  return {logit, reshape(features, {d})};
}

Prediction Prediction::from_logit(double logit) {
  Prediction p;
  p.logit = logit;
  p.probability = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit))
                             : std::exp(logit) / (1.0 + std::exp(logit));
  return p;
}

template <typename T>
Var<T> total_loss(Var<T> bce, Var<T> cpi, double lambda) {
  if (!(lambda >= 0.0)) throw ParameterError("total_loss: lambda must be non-negative");
  return add(bce, scale(cpi, static_cast<T>(lambda)));
}

#define LTTD_INSTANTIATE(T)                                                                    \
  template CpaOutput<T> cpa_forward(Var<T>, const BoundParams<T>&, const CpaConfig&,          \
                                    ForwardProbe*);                                            \
  template Var<T> total_loss(Var<T>, Var<T>, double);
LTTD_INSTANTIATE(float)
LTTD_INSTANTIATE(double)
#undef LTTD_INSTANTIATE

}  // namespace lttd
