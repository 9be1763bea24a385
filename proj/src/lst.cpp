#include "lttd/lst.hpp"

#include <cmath>

#include "lttd/num/ops.hpp"

namespace lttd {

using namespace num;

void LstConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ParameterError(std::string("LstConfig: ") + what);
  };
  require(channels > 0 && patch > 0 && dim > 0 && frames > 0, "extents must be positive");
  require(pool > 0 && patch % pool == 0, "patch must be divisible by pool");
  require(heads > 0 && dim % heads == 0, "dim must be divisible by heads");
  require(stages >= 1, "stages must be at least 1");
  require(blocks_per_stage >= 1, "blocks_per_stage must be at least 1");
  require(mlp_ratio >= 1, "mlp_ratio must be at least 1");
  require(temporal_filters >= 1, "temporal_filters must be at least 1");
  require(ln_eps > 0.0, "ln_eps must be positive");
}

void add_transformer_block(ParamLayout& layout, const std::string& prefix, int64_t dim,
                           int64_t hidden) {
  layout.add(prefix + "ln1.gamma", {dim}, Init::kOnes);
  layout.add(prefix + "ln1.beta", {dim}, Init::kZeros);
  layout.add(prefix + "attn.qkv.w", {dim, 3 * dim}, Init::kTruncNormal);
  layout.add(prefix + "attn.qkv.b", {3 * dim}, Init::kZeros);
  layout.add(prefix + "attn.proj.w", {dim, dim}, Init::kTruncNormal);
  layout.add(prefix + "attn.proj.b", {dim}, Init::kZeros);
  layout.add(prefix + "ln2.gamma", {dim}, Init::kOnes);
  layout.add(prefix + "ln2.beta", {dim}, Init::kZeros);
  layout.add(prefix + "mlp.fc1.w", {dim, hidden}, Init::kTruncNormal);
  layout.add(prefix + "mlp.fc1.b", {hidden}, Init::kZeros);
  layout.add(prefix + "mlp.fc2.w", {hidden, dim}, Init::kTruncNormal);
  layout.add(prefix + "mlp.fc2.b", {dim}, Init::kZeros);
}

void add_lst_params(ParamLayout& layout, const LstConfig& cfg) {
  cfg.validate();
  const int64_t d = cfg.dim;
  layout.add("lst.patch_embed.w", {cfg.patch_len(), d}, Init::kLinearFanIn);
  layout.add("lst.patch_embed.b", {d}, Init::kZeros);
  if (cfg.low_level_enhancement) {
    layout.add("lst.conv_embed.w", {cfg.temporal_filters, cfg.channels, 3, 3, 3},
               Init::kConvFanIn);
    layout.add("lst.conv_embed.b", {cfg.temporal_filters}, Init::kZeros);
    layout.add("lst.temporal_embed.w", {cfg.pooled_len(), d}, Init::kLinearFanIn);
    layout.add("lst.temporal_embed.b", {d}, Init::kZeros);
  }
  layout.add("lst.temporal_token", {d}, Init::kTruncNormal);
  layout.add("lst.pos_embed", {cfg.tokens(), d}, Init::kTruncNormal);
  for (int64_t s = 0; s < cfg.stages; ++s) {
    const std::string stage = "lst.stage" + std::to_string(s) + ".";
    for (int64_t b = 0; b < cfg.blocks_per_stage; ++b) {
      add_transformer_block(layout, stage + "block" + std::to_string(b) + ".", d,
                            d * cfg.mlp_ratio);
    }
    if (cfg.low_level_enhancement) {
      layout.add(stage + "gate_conv.w", {d, 3}, Init::kConvFanIn);
      layout.add(stage + "gate_conv.b", {d}, Init::kZeros);
    }
  }
}

template <typename T>
Var<T> transformer_block(Var<T> x, const BoundParams<T>& params, const std::string& prefix,
                         int64_t heads, double ln_eps, ForwardProbe* probe, const char* scope) {
  if (x.value().rank() != 3) {
    throw DimensionError("transformer_block: expected [B,L,D], got " + shape_str(x.shape()));
  }
  const int64_t batch = x.dim(0), len = x.dim(1), d = x.dim(2);
  const int64_t head_dim = d / heads;
  const T eps = static_cast<T>(ln_eps);
  auto p = [&](const char* name) { return params(prefix + name); };

  Var<T> h = layer_norm(x, p("ln1.gamma"), p("ln1.beta"), eps);
  Var<T> qkv = linear(h, p("attn.qkv.w"), p("attn.qkv.b"));  // [B, L, 3D]
  qkv = permute(reshape(qkv, {batch, len, 3, heads, head_dim}), {2, 0, 3, 1, 4});
  auto part = [&](int64_t i) {
    return reshape(slice(qkv, 0, i, 1), {batch * heads, len, head_dim});
  };
  Var<T> q = part(0), k = part(1), v = part(2);
  Var<T> scores = scale(batched_matmul(q, k, true), static_cast<T>(1.0 / std::sqrt(double(head_dim))));
  Var<T> attn = softmax(scores);
  if (probe) probe->attention.push_back({scope, batch, heads, attn.dim(1), attn.dim(2)});
  Var<T> ctx = batched_matmul(attn, v);  // [B·H, L, hd]
  ctx = reshape(permute(reshape(ctx, {batch, heads, len, head_dim}), {0, 2, 1, 3}),
                {batch, len, d});
  Var<T> x1 = add(linear(ctx, p("attn.proj.w"), p("attn.proj.b")), x);

  Var<T> h2 = layer_norm(x1, p("ln2.gamma"), p("ln2.beta"), eps);
  Var<T> m = gelu(linear(h2, p("mlp.fc1.w"), p("mlp.fc1.b")));
  return add(linear(m, p("mlp.fc2.w"), p("mlp.fc2.b")), x1);
}

template <typename T>
Var<T> local_sequence_embedding(Var<T> patches, const BoundParams<T>& params,
                                const LstConfig& cfg) {
  if (patches.value().rank() != 3 || patches.dim(1) != cfg.frames ||
      patches.dim(2) != cfg.patch_len()) {
    throw DimensionError("local_sequence_embedding: expected [N," + std::to_string(cfg.frames) +
                         "," + std::to_string(cfg.patch_len()) + "], got " +
                         shape_str(patches.shape()));
  }
  const int64_t n = patches.dim(0), t = cfg.frames, p = cfg.patch, c = cfg.channels;
  Var<T> zs = linear(patches, params("lst.patch_embed.w"), params("lst.patch_embed.b"));
  Var<T> content = zs;
  if (cfg.low_level_enhancement) {
    Var<T> vol = permute(reshape(patches, {n, t, c, p, p}), {0, 2, 1, 3, 4});  // [N,C,T,P,P]
    Var<T> conv = conv3d(vol, params("lst.conv_embed.w"), params("lst.conv_embed.b"), {1, 1, 1},
                         {1, 1, 1});
    const int64_t k = cfg.pool;
    Var<T> pooled = maxpool3d(conv, {1, k, k}, {1, k, k});  // [N,Ct,T,P/k,P/k]
    Var<T> flat =
        reshape(permute(pooled, {0, 2, 1, 3, 4}), {n, t, cfg.pooled_len()});
    Var<T> zt = linear(flat, params("lst.temporal_embed.w"), params("lst.temporal_embed.b"));
    content = mul(zs, sigmoid(zt));
  }
  Var<T> temp = broadcast_leading(reshape(params("lst.temporal_token"), {1, cfg.dim}), {n});
  const Var<T> parts[] = {temp, content};
  return add_broadcast(concat<T>(parts, 1), params("lst.pos_embed"));
}

template <typename T>
Var<T> let_stage(Var<T> tokens, const BoundParams<T>& params, const LstConfig& cfg,
                 int64_t stage, ForwardProbe* probe) {
  if (tokens.value().rank() != 3 || tokens.dim(1) != cfg.tokens() || tokens.dim(2) != cfg.dim) {
    throw DimensionError("let_stage: expected [N," + std::to_string(cfg.tokens()) + "," +
                         std::to_string(cfg.dim) + "], got " + shape_str(tokens.shape()));
  }
  const std::string prefix = "lst.stage" + std::to_string(stage) + ".";
  Var<T> y = tokens;
  for (int64_t b = 0; b < cfg.blocks_per_stage; ++b) {
    y = transformer_block(y, params, prefix + "block" + std::to_string(b) + ".", cfg.heads,
                          cfg.ln_eps, probe, "lst");
  }
  if (!cfg.low_level_enhancement) return y;
  const int64_t t = cfg.frames;
  Var<T> gate = depthwise_temporal_conv(slice(tokens, 1, 1, t), params(prefix + "gate_conv.w"),
                                        params(prefix + "gate_conv.b"));
  Var<T> gated = mul(slice(y, 1, 1, t), sigmoid(gate));
  const Var<T> parts[] = {slice(y, 1, 0, 1), gated};
  return concat<T>(parts, 1);
}

template <typename T>
LstOutput<T> lst_forward(Var<T> patches, const BoundParams<T>& params, const LstConfig& cfg,
                         ForwardProbe* probe) {
  Var<T> z = local_sequence_embedding(patches, params, cfg);
  for (int64_t s = 0; s < cfg.stages; ++s) z = let_stage(z, params, cfg, s, probe);
  const int64_t n = z.dim(0);
  return {reshape(slice(z, 1, 0, 1), {n, cfg.dim}), slice(z, 1, 1, cfg.frames)};
}

#define LTTD_INSTANTIATE(T)                                                                     \
  template Var<T> transformer_block(Var<T>, const BoundParams<T>&, const std::string&, int64_t, \
                                    double, ForwardProbe*, const char*);                        \
  template Var<T> local_sequence_embedding(Var<T>, const BoundParams<T>&, const LstConfig&);   \
  template Var<T> let_stage(Var<T>, const BoundParams<T>&, const LstConfig&, int64_t,          \
                            ForwardProbe*);                                                     \
  template LstOutput<T> lst_forward(Var<T>, const BoundParams<T>&, const LstConfig&,           \
                                    ForwardProbe*);
LTTD_INSTANTIATE(float)
LTTD_INSTANTIATE(double)
#undef LTTD_INSTANTIATE

}  // namespace lttd
