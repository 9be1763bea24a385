#include <gtest/gtest.h>

#include <cmath>

#include "lttd/cpa.hpp"
#include "lttd/errors.hpp"
#include "lttd/param_gradcheck.hpp"
#include "test_util.hpp"

namespace lttd {
namespace {

using num::Tape;
using num::TensorD;
using num::TensorF;
using testing::random_tensor;

CpaConfig small_cpa() {
  CpaConfig c;
  c.heads = 2;
  c.mlp_ratio = 2;
  return c;
}

std::shared_ptr<const ParamLayout> cpa_layout(const CpaConfig& cfg, int64_t dim) {
  auto layout = std::make_shared<ParamLayout>();
  add_cpa_params(*layout, cfg, dim);
  return layout;
}

TEST(CpaForward, ZeroProjectionsAndHeadGiveEvenOdds) {
  const CpaConfig cfg = small_cpa();
  ParamSet<float> params = ParamSet<float>::initialized(cpa_layout(cfg, 8), 1);
  for (int64_t b = 0; b < cfg.blocks; ++b) {
    for (const char* name : {"attn.proj.w", "attn.proj.b", "mlp.fc2.w", "mlp.fc2.b"}) {
      params["cpa.block" + std::to_string(b) + "." + name].fill(0.0f);
    }
  }
  params["cpa.head.w"].fill(0.0f);
  Tape<float> tape;
  BoundParams<float> bound(tape, params, false);
  CpaOutput<float> out = cpa_forward(tape.leaf(random_tensor<float>({5, 8}, 2)), bound, cfg);
  EXPECT_EQ(out.logit.value().item(), 0.0f);
  EXPECT_EQ(Prediction::from_logit(out.logit.value().item()).probability, 0.5);
  // Identity blocks: the features are the class token itself.
  for (int64_t d = 0; d < 8; ++d) EXPECT_EQ(out.features.value()[d], params["cpa.class_token"][d]);
}

TEST(CpaForward, AttentionSpansAllLocationsPlusClassToken) {
  const CpaConfig cfg = small_cpa();
  ParamSet<float> params = jittered(ParamSet<float>::initialized(cpa_layout(cfg, 8), 3), 4, 0.2);
  Tape<float> tape;
  BoundParams<float> bound(tape, params, false);
  ForwardProbe probe;
  cpa_forward(tape.leaf(random_tensor<float>({9, 8}, 5)), bound, cfg, &probe);
  ASSERT_EQ(probe.attention.size(), 3u);
  for (const AttentionRecord& a : probe.attention) {
    EXPECT_EQ(a.batch, 1);
    EXPECT_EQ(a.queries, 10);
    EXPECT_EQ(a.keys, 10);
  }
}

TEST(CpaForward, LogitInvariantToLocationPermutation) {
  const CpaConfig cfg = small_cpa();
  ParamSet<float> params = jittered(ParamSet<float>::initialized(cpa_layout(cfg, 8), 6), 7, 0.3);
  TensorF x = random_tensor<float>({12, 8}, 8);
  num::Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int64_t> perm(12);
    for (int64_t i = 0; i < 12; ++i) perm[static_cast<size_t>(i)] = i;
    for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    TensorF xp({12, 8});
    for (int64_t i = 0; i < 12; ++i)
      for (int64_t d = 0; d < 8; ++d) xp[i * 8 + d] = x[perm[static_cast<size_t>(i)] * 8 + d];
    Tape<float> tape;
    BoundParams<float> bound(tape, params, false);
    const float a = cpa_forward(tape.leaf(x), bound, cfg).logit.value().item();
    const float b = cpa_forward(tape.leaf(xp), bound, cfg).logit.value().item();
    EXPECT_NEAR(a, b, 1e-5);
  }
}

TEST(CpaForward, MeanPoolVariant) {
  CpaConfig cfg = small_cpa();
  cfg.aggregation = false;
  auto layout = cpa_layout(cfg, 4);
  EXPECT_FALSE(layout->contains("cpa.class_token"));
  ParamSet<double> params = jittered(ParamSet<double>::initialized(layout, 10), 11, 0.3);
  TensorD x = random_tensor({3, 4}, 12);
  Tape<double> tape;
  BoundParams<double> bound(tape, params, false);
  CpaOutput<double> out = cpa_forward(tape.leaf(x), bound, cfg);
  double logit = params["cpa.head.b"][0];
  for (int64_t d = 0; d < 4; ++d) {
    const double mean = (x[d] + x[4 + d] + x[8 + d]) / 3.0;
    EXPECT_NEAR(out.features.value()[d], mean, 1e-15);
    logit += mean * params["cpa.head.w"][d];
  }
  EXPECT_NEAR(out.logit.value().item(), logit, 1e-14);
}

TEST(CpaForward, WidthMismatchIsDimensionError) {
  const CpaConfig cfg = small_cpa();
  ParamSet<double> params = ParamSet<double>::initialized(cpa_layout(cfg, 8), 13);
  Tape<double> tape;
  BoundParams<double> bound(tape, params, false);
  EXPECT_THROW(cpa_forward(tape.leaf(TensorD({3, 6}, 0.1)), bound, cfg), DimensionError);
}

TEST(CpaForward, GradientCheck) {
  const CpaConfig cfg = small_cpa();
  ParamSet<double> params = jittered(ParamSet<double>::initialized(cpa_layout(cfg, 8), 14), 15, 0.2);
  TensorD x = random_tensor({4, 8}, 16);
  auto loss = [&](const BoundParams<double>& p, Var<double> in) {
    return bce_loss(cpa_forward(in, p, cfg).logit, Label::kFake);
  };
  const double err = num::gradient_check(
      [&](Tape<double>& tape, Var<double> in) {
        BoundParams<double> p(tape, params, false);
        return loss(p, in);
      },
      x);
  EXPECT_LT(err, 1e-4);
  num::GradCheckOptions opts;
  opts.max_coords = 6;
  const ParamGradCheckReport r = param_gradient_check(
      [&](Tape<double>& tape, const BoundParams<double>& p) { return loss(p, tape.leaf(x)); },
      params, opts);
  EXPECT_LT(r.max_rel_err, 1e-4) << r.worst_param << "[" << r.worst_index << "]";
}

TEST(BceLoss, ReferenceValues) {
  Tape<double> tape;
  Var<double> zero = tape.leaf(TensorD::scalar(0.0));
  EXPECT_NEAR(bce_loss(zero, Label::kReal).value().item(), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(zero, Label::kFake).value().item(), std::log(2.0), 1e-15);
  EXPECT_LT(bce_loss(tape.leaf(TensorD::scalar(20.0)), Label::kFake).value().item(), 1e-8);
  EXPECT_NEAR(bce_loss(tape.leaf(TensorD::scalar(-800.0)), Label::kFake).value().item(), 800.0,
              1e-9);
}

TEST(BceLoss, GradientIsSigmoidMinusLabel) {
  for (double x : {-3.0, -0.4, 0.0, 1.1, 6.0}) {
    for (Label label : {Label::kReal, Label::kFake}) {
      Tape<double> tape;
      Var<double> v = tape.leaf(TensorD::scalar(x), true);
      tape.backward(bce_loss(v, label));
      const double expect = 1.0 / (1.0 + std::exp(-x)) - static_cast<int>(label);
      EXPECT_NEAR(tape.grad(v)[0], expect, 1e-14);
      const double err = num::gradient_check(
          [&](Tape<double>&, Var<double> in) { return bce_loss(in, label); }, TensorD::scalar(x));
      EXPECT_LT(err, 1e-4);
    }
  }
}

TEST(TotalLoss, WeightedSum) {
  Tape<double> tape;
  Var<double> bce = tape.leaf(TensorD::scalar(0.7), true);
  Var<double> cpi = tape.leaf(TensorD::scalar(100.0), true);
  Var<double> total = total_loss(bce, cpi, 1e-3);
  EXPECT_NEAR(total.value().item(), 0.8, 1e-12);
  EXPECT_EQ(total_loss(bce, cpi, 0.0).value().item(), 0.7);
  tape.backward(total);
  EXPECT_EQ(tape.grad(bce)[0], 1.0);
  EXPECT_NEAR(tape.grad(cpi)[0], 1e-3, 1e-18);
  EXPECT_THROW(total_loss(bce, cpi, -1.0), ParameterError);
}

TEST(TotalLoss, MonotoneInEachTerm) {
  Tape<double> tape;
  double prev = -1.0;
  for (double c : {0.0, 1.0, 5.0, 50.0}) {
    const double v = total_loss(tape.leaf(TensorD::scalar(0.3)), tape.leaf(TensorD::scalar(c)), 0.01)
                         .value()
                         .item();
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Prediction, ProbabilityIsStable) {
  EXPECT_EQ(Prediction::from_logit(0.0).probability, 0.5);
  EXPECT_NEAR(Prediction::from_logit(2.0).probability, 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_GT(Prediction::from_logit(-700.0).probability, 0.0);
  EXPECT_TRUE(std::isfinite(Prediction::from_logit(700.0).probability));
}

}  // namespace
}  // namespace lttd
