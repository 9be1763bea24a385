#pragma once

#include <memory>
#include <string>

#include "lttd/cpa.hpp"
#include "lttd/cpi.hpp"
#include "lttd/lst.hpp"

namespace lttd {

enum class Variant { kFull, kNoLst, kNoCpi, kNoCpa };

std::string variant_name(Variant v);
// Accepts "full", "no_lst", "no_cpi", "no_cpa".
Variant parse_variant(const std::string& name);

struct ModelConfig {
  LstConfig lst;
  CpaConfig cpa;
  Variant variant = Variant::kFull;

  // H=W=224, P=16, T=16, D=384, C_t=64, 6 heads.
  static ModelConfig paper();
  // H=W=64, P=8, T=8, D=64: the synthetic-data training configuration.
  static ModelConfig desk();
  // H=W=16, P=8 (N=4), T=4, D=16, 2 heads: for gradient checks.
  static ModelConfig toy();

  // Copy with the architecture switches of `v` applied.
  ModelConfig with_variant(Variant v) const;
  void validate() const;
};

std::shared_ptr<const ParamLayout> make_layout(const ModelConfig& cfg);

template <typename T>
struct ModelOutput {
  Var<T> logit;            // [1]
  Var<T> temporal_tokens;  // [N, D]
  Var<T> content_tokens;   // [N, T, D]
  Var<T> features;         // [D]
};

// patches [N, T, C·P²] -> prediction and intermediate tokens.
template <typename T>
ModelOutput<T> model_forward(const ModelConfig& cfg, const BoundParams<T>& params,
                             Var<T> patches, ForwardProbe* probe = nullptr);

template <typename T>
struct LossTerms {
  Var<T> total;
  Var<T> bce;
  Var<T> cpi;  // invalid when lambda == 0 (masks are not consulted)
};

// BCE + lambda·CPI for one clip. `sim_gt` is required when lambda > 0.
template <typename T>
LossTerms<T> model_loss(const ModelOutput<T>& out, Label label, const TensorD* sim_gt,
                        double lambda, const CpiConfig& cpi);

// Patch tensor [N, T, C·P²] of a clip, cast to T and mapped from [0,1] to [-1,1].
template <typename T>
Tensor<T> clip_patches(const ModelConfig& cfg, const Clip& clip);

// Ground-truth similarity for a clip: from its mask, or all ones for a real
// clip without one. A fake clip without a mask is a DataError.
TensorD clip_gt_similarity(const Clip& clip, int64_t n);

// Forward and loss for one clip.
template <typename T>
LossTerms<T> clip_loss(const ModelConfig& cfg, const BoundParams<T>& params, const Clip& clip,
                       double lambda, const CpiConfig& cpi, ModelOutput<T>* out = nullptr);

}  // namespace lttd
