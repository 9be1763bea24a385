#include "lttd/model.hpp"

#include <optional>

#include "lttd/num/ops.hpp"

namespace lttd {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull:
      return "full";
    case Variant::kNoLst:
      return "no_lst";
    case Variant::kNoCpi:
      return "no_cpi";
    case Variant::kNoCpa:
      return "no_cpa";
  }
  throw ParameterError("unknown variant");
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::kFull, Variant::kNoLst, Variant::kNoCpi, Variant::kNoCpa}) {
    if (variant_name(v) == name) return v;
  }
  throw ParameterError("unknown ablation variant '" + name + "'");
}

ModelConfig ModelConfig::paper() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.lst.patch = 8;
  c.lst.dim = 64;
  c.lst.frames = 8;
  c.lst.temporal_filters = 16;
  c.lst.stages = 3;
  c.lst.blocks_per_stage = 1;
  c.lst.heads = 4;
  c.lst.mlp_ratio = 2;
  c.cpa.blocks = 3;
  c.cpa.heads = 4;
  c.cpa.mlp_ratio = 2;
  return c;
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.lst.patch = 8;
  c.lst.dim = 16;
  c.lst.frames = 4;
  c.lst.temporal_filters = 4;
  c.lst.stages = 3;
  c.lst.blocks_per_stage = 1;
  c.lst.heads = 2;
  c.lst.mlp_ratio = 2;
  c.cpa.blocks = 3;
  c.cpa.heads = 2;
  c.cpa.mlp_ratio = 2;
  return c;
}

ModelConfig ModelConfig::with_variant(Variant v) const {
  ModelConfig c = *this;
  c.variant = v;
  c.lst.low_level_enhancement = v != Variant::kNoLst;
  c.cpa.aggregation = v != Variant::kNoCpa;
  return c;
}

void ModelConfig::validate() const {
  lst.validate();
  if (lst.low_level_enhancement != (variant != Variant::kNoLst) ||
      cpa.aggregation != (variant != Variant::kNoCpa)) {
    throw ParameterError("ModelConfig: architecture switches disagree with variant " +
                         variant_name(variant));
  }
}

std::shared_ptr<const ParamLayout> make_layout(const ModelConfig& cfg) {
  cfg.validate();
  auto layout = std::make_shared<ParamLayout>();
  add_lst_params(*layout, cfg.lst);
  add_cpa_params(*layout, cfg.cpa, cfg.lst.dim);
  return layout;
}

template <typename T>
ModelOutput<T> model_forward(const ModelConfig& cfg, const BoundParams<T>& params,
                             Var<T> patches, ForwardProbe* probe) {
  LstOutput<T> lst = lst_forward(patches, params, cfg.lst, probe);
  CpaOutput<T> cpa = cpa_forward(lst.temporal_tokens, params, cfg.cpa, probe);
  return {cpa.logit, lst.temporal_tokens, lst.content_tokens, cpa.features};
}

template <typename T>
LossTerms<T> model_loss(const ModelOutput<T>& out, Label label, const TensorD* sim_gt,
                        double lambda, const CpiConfig& cpi) {
  if (!(lambda >= 0.0)) throw ParameterError("model_loss: lambda must be non-negative");
  LossTerms<T> terms;
  terms.bce = bce_loss(out.logit, label);
  if (lambda == 0.0) {
    terms.total = terms.bce;
    return terms;
  }
  if (sim_gt == nullptr) throw DataError("model_loss: CPI term needs a ground-truth similarity");
  num::Tape<T>& tape = *out.logit.tape;
  Var<T> sim = cosine_sim_matrix(temporal_mean(out.content_tokens));
  Var<T> gt = tape.leaf(sim_gt->template cast<T>());
  terms.cpi = cpi_loss(sim, gt, cpi);
  terms.total = total_loss(terms.bce, terms.cpi, lambda);
  return terms;
}

template <typename T>
Tensor<T> clip_patches(const ModelConfig& cfg, const Clip& clip) {
  if (clip.length() != cfg.lst.frames) {
    throw DimensionError("clip has " + std::to_string(clip.length()) + " frames, model expects " +
                         std::to_string(cfg.lst.frames));
  }
  Tensor<T> patches = split_patches(clip, cfg.lst.patch).patches.template cast<T>();
  for (T& v : patches.values()) v = (v - T(0.5)) / T(0.5);
  return patches;
}

TensorD clip_gt_similarity(const Clip& clip, int64_t n) {
  if (clip.mask) return gt_similarity(*clip.mask, n);
  if (clip.label == Label::kFake) {
    throw DataError("fake clip '" + clip.video_id + "' has no modification mask");
  }
  return TensorD({n, n}, 1.0);
}

template <typename T>
LossTerms<T> clip_loss(const ModelConfig& cfg, const BoundParams<T>& params, const Clip& clip,
                       double lambda, const CpiConfig& cpi, ModelOutput<T>* out) {
  num::Tape<T>& tape = *params.vars().front().tape;
  Var<T> patches = tape.leaf(clip_patches<T>(cfg, clip));
  ModelOutput<T> fwd = model_forward(cfg, params, patches);
  std::optional<TensorD> gt;
  if (lambda > 0.0) gt = clip_gt_similarity(clip, patches.dim(0));
  LossTerms<T> terms = model_loss(fwd, clip.label, gt ? &*gt : nullptr, lambda, cpi);
  if (out) *out = fwd;
  return terms;
}

#define LTTD_INSTANTIATE(T)                                                                  \
  template ModelOutput<T> model_forward(const ModelConfig&, const BoundParams<T>&, Var<T>,  \
                                        ForwardProbe*);                                      \
  template LossTerms<T> model_loss(const ModelOutput<T>&, Label, const TensorD*, double,    \
                                   const CpiConfig&);                                       \
  template Tensor<T> clip_patches(const ModelConfig&, const Clip&);                          \
  template LossTerms<T> clip_loss(const ModelConfig&, const BoundParams<T>&, const Clip&,    \
                                  double, const CpiConfig&, ModelOutput<T>*);
LTTD_INSTANTIATE(float)
LTTD_INSTANTIATE(double)
#undef LTTD_INSTANTIATE

}  // namespace lttd
