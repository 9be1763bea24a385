#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lttd/params.hpp"

namespace lttd {

struct LstConfig {
  int64_t channels = 3;
  int64_t patch = 16;
  int64_t dim = 384;
  int64_t frames = 16;
  int64_t temporal_filters = 64;
  int64_t pool = 2;
  int64_t stages = 3;
  int64_t blocks_per_stage = 3;
  int64_t heads = 6;
  int64_t mlp_ratio = 4;
  // 3D-conv gating in the embedding and after every stage. Off gives the
  // plain patch-embedding + transformer ablation.
  bool low_level_enhancement = true;
  double ln_eps = 1e-6;

  // Throws ParameterError on the first violated invariant.
  void validate() const;
  int64_t tokens() const { return frames + 1; }
  int64_t patch_len() const { return channels * patch * patch; }
  int64_t pooled_len() const { return temporal_filters * (patch / pool) * (patch / pool); }
};

// Attention shapes observed during a forward pass, for structural checks.
struct AttentionRecord {
  std::string scope;
  int64_t batch;  // independent sequences
  int64_t heads;
  int64_t queries;
  int64_t keys;
};

struct ForwardProbe {
  std::vector<AttentionRecord> attention;
};

// Registers one pre-norm transformer block under `prefix` (e.g. "cpa.block0.").
void add_transformer_block(ParamLayout& layout, const std::string& prefix, int64_t dim,
                           int64_t hidden);
void add_lst_params(ParamLayout& layout, const LstConfig& cfg);

// x' = MSA(LN(x)) + x; out = MLP(LN(x')) + x'. x is [B, L, D]; attention runs
// within each of the B sequences only.
template <typename T>
Var<T> transformer_block(Var<T> x, const BoundParams<T>& params, const std::string& prefix,
                         int64_t heads, double ln_eps, ForwardProbe* probe = nullptr,
                         const char* scope = "");

// patches [N, T, C·P²] -> tokens [N, T+1, D]: temporal token first, then the
// gated patch embeddings, plus the shared temporal position embedding.
template <typename T>
Var<T> local_sequence_embedding(Var<T> patches, const BoundParams<T>& params,
                                const LstConfig& cfg);

// One stage: `blocks_per_stage` transformer blocks on all tokens, content
// tokens gated by sigmoid of a depthwise temporal conv of the stage input.
template <typename T>
Var<T> let_stage(Var<T> tokens, const BoundParams<T>& params, const LstConfig& cfg,
                 int64_t stage, ForwardProbe* probe = nullptr);

template <typename T>
struct LstOutput {
  Var<T> temporal_tokens;  // [N, D]
  Var<T> content_tokens;   // [N, T, D]
};

template <typename T>
LstOutput<T> lst_forward(Var<T> patches, const BoundParams<T>& params, const LstConfig& cfg,
                         ForwardProbe* probe = nullptr);

}  // namespace lttd
