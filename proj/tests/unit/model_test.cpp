#include <gtest/gtest.h>

#include <chrono>

#include "lttd/errors.hpp"
#include "lttd/model.hpp"
#include "lttd/param_gradcheck.hpp"
#include "test_util.hpp"

namespace lttd {
namespace {

using num::Tape;
using num::TensorD;
using num::TensorF;

Clip toy_clip(const ModelConfig& cfg, Label label, uint64_t seed) {
  num::Rng rng(seed);
  const int64_t side = 16, t = cfg.lst.frames;
  Clip clip;
  clip.label = label;
  clip.frames = TensorF({3, t, side, side});
  for (float& v : clip.frames.storage()) v = static_cast<float>(rng.uniform());
  if (label == Label::kFake) {
    clip.mask = TensorF({t, side, side}, 0.0f);
    for (int64_t ti = 0; ti < t; ++ti)
      for (int64_t y = 2; y < 11; ++y)
        for (int64_t x = 3; x < 9; ++x) (*clip.mask)[(ti * side + y) * side + x] = 0.25f * (1 + ti % 4);
  }
  return clip;
}

TEST(Variant, NamesRoundTrip) {
  for (Variant v : {Variant::kFull, Variant::kNoLst, Variant::kNoCpi, Variant::kNoCpa}) {
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  }
  EXPECT_THROW(parse_variant("no_everything"), ParameterError);
}

TEST(ModelConfig, VariantsSwitchArchitecture) {
  const ModelConfig base = ModelConfig::toy();
  EXPECT_TRUE(make_layout(base)->contains("lst.conv_embed.w"));
  EXPECT_FALSE(make_layout(base.with_variant(Variant::kNoLst))->contains("lst.conv_embed.w"));
  EXPECT_FALSE(make_layout(base.with_variant(Variant::kNoCpa))->contains("cpa.class_token"));
  EXPECT_EQ(make_layout(base.with_variant(Variant::kNoCpi))->total_elements(),
            make_layout(base)->total_elements());
  ModelConfig inconsistent = base;
  inconsistent.variant = Variant::kNoLst;
  EXPECT_THROW(make_layout(inconsistent), ParameterError);
}

TEST(ModelForward, ToyShapes) {
  const ModelConfig cfg = ModelConfig::toy();
  ParamSet<double> params = ParamSet<double>::initialized(make_layout(cfg), 1);
  Tape<double> tape;
  BoundParams<double> bound(tape, params, false);
  ModelOutput<double> out;
  clip_loss(cfg, bound, toy_clip(cfg, Label::kFake, 2), 1e-3, CpiConfig{}, &out);
  EXPECT_EQ(out.logit.shape(), (num::Shape{1}));
  EXPECT_EQ(out.temporal_tokens.shape(), (num::Shape{4, 16}));
  EXPECT_EQ(out.content_tokens.shape(), (num::Shape{4, 4, 16}));
  EXPECT_EQ(out.features.shape(), (num::Shape{16}));
}

TEST(ModelLoss, FullGradientCheckOnToyConfig) {
  const auto start = std::chrono::steady_clock::now();
  const ModelConfig cfg = ModelConfig::toy();
  ParamSet<double> params = jittered(ParamSet<double>::initialized(make_layout(cfg), 3), 4, 0.2);
  const Clip clip = toy_clip(cfg, Label::kFake, 5);
  const double lambda = 0.5;
  {
    Tape<double> tape;
    BoundParams<double> bound(tape, params, false);
    LossTerms<double> terms = clip_loss(cfg, bound, clip, lambda, CpiConfig{});
    ASSERT_TRUE(terms.cpi.valid());
    EXPECT_GT(terms.cpi.value().item(), 0.0);
  }
  num::GradCheckOptions opts;
  opts.max_coords = 4;
  opts.seed = 6;
  const ParamGradCheckReport r = param_gradient_check(
      [&](Tape<double>&, const BoundParams<double>& p) {
        return clip_loss(cfg, p, clip, lambda, CpiConfig{}).total;
      },
      params, opts);
  EXPECT_LT(r.max_rel_err, 1e-4) << r.worst_param << "[" << r.worst_index << "] analytic "
                                 << r.analytic << " numeric " << r.numeric;
  EXPECT_GT(r.probed, 100);

  const TensorD patches = clip_patches<double>(cfg, clip);
  const TensorD gt = clip_gt_similarity(clip, 4);
  const double input_err = num::gradient_check(
      [&](Tape<double>& tape, Var<double> x) {
        BoundParams<double> p(tape, params, false);
        return model_loss(model_forward(cfg, p, x), clip.label, &gt, lambda, CpiConfig{}).total;
      },
      patches);
  EXPECT_LT(input_err, 1e-4);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::minutes(2));
}

TEST(ModelLoss, ZeroLambdaIgnoresMasks) {
  const ModelConfig cfg = ModelConfig::toy();
  ParamSet<double> params = ParamSet<double>::initialized(make_layout(cfg), 7);
  Clip fake = toy_clip(cfg, Label::kFake, 8);
  fake.mask.reset();
  Tape<double> tape;
  BoundParams<double> bound(tape, params, false);
  LossTerms<double> terms = clip_loss(cfg, bound, fake, 0.0, CpiConfig{});
  EXPECT_FALSE(terms.cpi.valid());
  EXPECT_EQ(terms.total.value().item(), terms.bce.value().item());
  EXPECT_THROW(clip_loss(cfg, bound, fake, 1e-3, CpiConfig{}), DataError);
}

TEST(ModelLoss, RealClipWithoutMaskUsesAllOnes) {
  Clip real = toy_clip(ModelConfig::toy(), Label::kReal, 9);
  const TensorD gt = clip_gt_similarity(real, 4);
  for (double v : gt.values()) EXPECT_EQ(v, 1.0);
}

TEST(ModelLoss, RejectsWrongClipLength) {
  const ModelConfig cfg = ModelConfig::toy();
  ModelConfig other = cfg;
  other.lst.frames = 5;
  EXPECT_THROW(clip_patches<float>(cfg, toy_clip(other, Label::kReal, 10)), DimensionError);
}

}  // namespace
}  // namespace lttd
