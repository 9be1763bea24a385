#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lttd/num/gradcheck.hpp"
#include "lttd/num/ops.hpp"
#include "test_util.hpp"

namespace lttd::num {
namespace {

using lttd::testing::distinct_tensor;
using lttd::testing::random_tensor;

constexpr double kTol = 1e-4;
constexpr int kProbes = 5;

// Contracts an op output with a fixed random tensor so every output
// coordinate carries a distinct weight.
Var<double> weighted_sum(Var<double> y, uint64_t seed) {
  Var<double> w = y.tape->leaf(random_tensor(y.shape(), seed ^ 0xabcdef));
  return sum(mul(y, w));
}

Var<double> leaf(Tape<double>& tape, const Tensor<double>& t) { return tape.leaf(t); }

TEST(Tensor, ShapeInvariants) {
  Tensor<float> t({2, 3, 4});
  EXPECT_EQ(t.numel(), 24);
  EXPECT_EQ(t.dim(-1), 4);
  EXPECT_THROW(Tensor<float>(Shape{2, 0}), DimensionError);
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), DimensionError);
  EXPECT_THROW(t.at({0, 3, 0}), RangeError);
}

TEST(Tape, NonFiniteOutputIsAnError) {
  Tape<double> tape;
  Var<double> x = tape.leaf(Tensor<double>({1}, 1e300));
  EXPECT_THROW(mul(x, x), NumericError);
}

TEST(Tape, DiamondGraphAccumulatesFanOut) {
  // y = sigmoid(x) + x*x  => dy/dx = s(1-s) + 2x
  Tape<double> tape;
  Var<double> x = tape.leaf(Tensor<double>({1}, 0.3), true);
  Var<double> y = add(sigmoid(x), mul(x, x));
  tape.backward(y);
  const double s = 1.0 / (1.0 + std::exp(-0.3));
  EXPECT_NEAR(tape.grad(x)[0], s * (1 - s) + 0.6, 1e-15);
}

TEST(Tape, BackwardVisitsReverseOrderOnce) {
  Tape<double> tape;
  Var<double> x = tape.leaf(Tensor<double>({3}, 2.0), true);
  Var<double> a = scale(x, 3.0);
  Var<double> b = add(a, a);
  Var<double> c = sum(b);
  tape.backward(c);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(tape.grad(x)[i], 6.0);
}

TEST(Matmul, IdentityAndHandCases) {
  Tape<double> tape;
  Var<double> eye = leaf(tape, Tensor<double>({2, 2}, {1, 0, 0, 1}));
  Var<double> m = leaf(tape, Tensor<double>({2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(matmul(eye, m).value().storage(), (std::vector<double>{1, 2, 3, 4}));
  Var<double> r = leaf(tape, Tensor<double>({1, 2}, {1, 1}));
  Var<double> c = leaf(tape, Tensor<double>({2, 1}, {2, 3}));
  EXPECT_EQ(matmul(r, c).value().item(), 5.0);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  Tape<double> tape;
  Var<double> a = leaf(tape, Tensor<double>({2, 3}));
  Var<double> b = leaf(tape, Tensor<double>({4, 2}));
  try {
    matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[4x2]"), std::string::npos);
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  for (int probe = 0; probe < kProbes; ++probe) {
    const Tensor<double> a = random_tensor({3, 4}, 10 + probe);
    const Tensor<double> b = random_tensor({4, 2}, 20 + probe);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> x) {
                return weighted_sum(matmul(x, leaf(t, b)), probe);
              }, a), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> x) {
                return weighted_sum(matmul(leaf(t, a), x), probe);
              }, b), kTol);
  }
}

TEST(BatchedMatmul, GradientBothLayouts) {
  for (int probe = 0; probe < kProbes; ++probe) {
    const Tensor<double> a = random_tensor({2, 3, 4}, 30 + probe);
    const Tensor<double> b = random_tensor({2, 4, 5}, 40 + probe);
    const Tensor<double> bt = random_tensor({2, 5, 4}, 50 + probe);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> x) {
                return weighted_sum(batched_matmul(x, leaf(t, b)), probe);
              }, a), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> x) {
                return weighted_sum(batched_matmul(leaf(t, a), x), probe);
              }, b), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> x) {
                return weighted_sum(batched_matmul(x, leaf(t, bt), true), probe);
              }, a), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> x) {
                return weighted_sum(batched_matmul(leaf(t, a), x, true), probe);
              }, bt), kTol);
  }
}

TEST(Linear, GradientAllOperands) {
  for (int probe = 0; probe < kProbes; ++probe) {
    const Tensor<double> x = random_tensor({2, 3, 4}, 60 + probe);
    const Tensor<double> w = random_tensor({4, 5}, 70 + probe);
    const Tensor<double> b = random_tensor({5}, 80 + probe);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(linear(v, leaf(t, w), leaf(t, b)), probe);
              }, x), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(linear(leaf(t, x), v, leaf(t, b)), probe);
              }, w), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(linear(leaf(t, x), leaf(t, w), v), probe);
              }, b), kTol);
  }
}

TEST(Elementwise, HandCases) {
  Tape<double> tape;
  Var<double> z = leaf(tape, Tensor<double>({1}, 0.0));
  EXPECT_DOUBLE_EQ(sigmoid(z).value()[0], 0.5);
  const Tensor<double> x = random_tensor({2, 3}, 1);
  Var<double> xv = leaf(tape, x);
  Var<double> ones = leaf(tape, Tensor<double>({2, 3}, 1.0));
  const Var<double> args[] = {xv, ones};
  EXPECT_EQ(elementwise<double>(Elementwise::kMul, args).value(), x);
  EXPECT_THROW(add(xv, leaf(tape, Tensor<double>({3, 2}))), DimensionError);
  EXPECT_THROW(elementwise<double>(Elementwise::kSigmoid, args), ParameterError);
}

TEST(Elementwise, GeluGradientAtProbePoints) {
  const Tensor<double> x({5}, {-2.0, -0.5, 0.0, 0.5, 2.0});
  EXPECT_LT(gradient_check([](Tape<double>&, Var<double> v) { return sum(gelu(v)); }, x), kTol);
}

TEST(Elementwise, GradientsOnRandomProbes) {
  for (int probe = 0; probe < kProbes; ++probe) {
    const Tensor<double> a = random_tensor({3, 4}, 90 + probe);
    const Tensor<double> b = random_tensor({3, 4}, 100 + probe);
    auto bin = [&](Elementwise op) {
      return gradient_check([&](Tape<double>& t, Var<double> v) {
        const Var<double> args[] = {v, leaf(t, b)};
        return weighted_sum(elementwise<double>(op, args), probe);
      }, a);
    };
    auto un = [&](Elementwise op) {
      return gradient_check([&](Tape<double>&, Var<double> v) {
        const Var<double> args[] = {v};
        return weighted_sum(elementwise<double>(op, args), probe);
      }, a);
    };
    EXPECT_LT(bin(Elementwise::kAdd), kTol);
    EXPECT_LT(bin(Elementwise::kMul), kTol);
    EXPECT_LT(un(Elementwise::kSigmoid), kTol);
    EXPECT_LT(un(Elementwise::kGelu), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(sub(leaf(t, b), v), probe);
              }, a), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>&, Var<double> v) {
                return weighted_sum(scale(v, -1.7), probe);
              }, a), kTol);
  }
}

TEST(GradientCheck, SumAndSigmoid) {
  const Tensor<double> x = random_tensor({4, 3}, 7);
  EXPECT_LT(gradient_check([](Tape<double>&, Var<double> v) { return sum(v); }, x), 1e-9);
  EXPECT_LT(gradient_check([](Tape<double>&, Var<double> v) { return sum(sigmoid(v)); }, x), 1e-6);
  EXPECT_THROW(gradient_check([](Tape<double>&, Var<double> v) { return sum(v); }, x, 1e-2),
               ParameterError);
}

TEST(GradientCheck, NonFiniteIntermediateIsNumericError) {
  const Tensor<double> x({2}, 1e200);
  EXPECT_THROW(gradient_check([](Tape<double>&, Var<double> v) { return sum(mul(v, v)); }, x),
               NumericError);
}

TEST(Broadcast, GradientBothOperands) {
  for (int probe = 0; probe < kProbes; ++probe) {
    const Tensor<double> x = random_tensor({2, 3, 4}, 110 + probe);
    const Tensor<double> y = random_tensor({3, 4}, 120 + probe);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(add_broadcast(v, leaf(t, y)), probe);
              }, x), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(add_broadcast(leaf(t, x), v), probe);
              }, y), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>&, Var<double> v) {
                return weighted_sum(broadcast_leading(v, {2, 5}), probe);
              }, y), kTol);
  }
  Tape<double> tape;
  EXPECT_THROW(add_broadcast(leaf(tape, Tensor<double>({2, 3})), leaf(tape, Tensor<double>({2}))),
               DimensionError);
}

TEST(LayerNorm, HandCases) {
  Tape<double> tape;
  Var<double> g = leaf(tape, Tensor<double>({2}, 1.0));
  Var<double> b = leaf(tape, Tensor<double>({2}, 0.0));
  Var<double> c = leaf(tape, Tensor<double>({1, 2}, 3.5));
  Var<double> yc = layer_norm(c, g, b, 1e-5);
  EXPECT_EQ(yc.value()[0], 0.0);
  EXPECT_EQ(yc.value()[1], 0.0);
  Var<double> r = leaf(tape, Tensor<double>({1, 2}, {1.0, -1.0}));
  Var<double> yr = layer_norm(r, g, b, 1e-15);
  EXPECT_NEAR(yr.value()[0], 1.0, 1e-12);
  EXPECT_NEAR(yr.value()[1], -1.0, 1e-12);
  Var<double> g3 = leaf(tape, Tensor<double>({3}, 1.0));
  EXPECT_THROW(layer_norm(r, g3, g3, 1e-5), DimensionError);
}

TEST(LayerNorm, GradientAllOperands) {
  for (int probe = 0; probe < kProbes; ++probe) {
    const Tensor<double> x = random_tensor({5, 8}, 130 + probe);
    const Tensor<double> g = random_tensor({8}, 140 + probe);
    const Tensor<double> b = random_tensor({8}, 150 + probe);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(layer_norm(v, leaf(t, g), leaf(t, b), 1e-5), probe);
              }, x), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(layer_norm(leaf(t, x), v, leaf(t, b), 1e-5), probe);
              }, g), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(layer_norm(leaf(t, x), leaf(t, g), v, 1e-5), probe);
              }, b), kTol);
  }
}

TEST(Softmax, HandCasesAndStability) {
  Tape<double> tape;
  Var<double> z = leaf(tape, Tensor<double>({1, 3}, 0.0));
  for (double v : softmax(z).value().values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
  Var<double> big = leaf(tape, Tensor<double>({1, 2}, {1000.0, 0.0}));
  const Tensor<double>& y = softmax(big).value();
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  EXPECT_EQ(y[1], 0.0);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  const Tensor<double> x = random_tensor({6, 7}, 3, 5.0);
  Tensor<double> shifted = x;
  for (int64_t r = 0; r < 6; ++r) {
    for (int64_t j = 0; j < 7; ++j) shifted[r * 7 + j] += 3.0 * static_cast<double>(r) - 4.0;
  }
  Tape<double> tape;
  const Tensor<double>& y = softmax(leaf(tape, x)).value();
  const Tensor<double>& ys = softmax(leaf(tape, shifted)).value();
  for (int64_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (int64_t j = 0; j < 7; ++j) {
      s += y[r * 7 + j];
      EXPECT_NEAR(y[r * 7 + j], ys[r * 7 + j], 1e-12);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Softmax, Gradient) {
  for (int probe = 0; probe < kProbes; ++probe) {
    const Tensor<double> x = random_tensor({4, 6}, 160 + probe);
    EXPECT_LT(gradient_check([&](Tape<double>&, Var<double> v) {
                return weighted_sum(softmax(v), probe);
              }, x), kTol);
  }
}

// Direct summation oracle for zero-padded cross-correlation, no batch axis.
Tensor<double> direct_conv3d(const Tensor<double>& x, const Tensor<double>& w, int64_t pad) {
  const int64_t cin = x.dim(0), t = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t cout = w.dim(0), kt = w.dim(2), kh = w.dim(3), kw = w.dim(4);
  const int64_t ot = t + 2 * pad - kt + 1, oh = h + 2 * pad - kh + 1, ow = wd + 2 * pad - kw + 1;
  Tensor<double> out({cout, ot, oh, ow});
  for (int64_t co = 0; co < cout; ++co)
    for (int64_t a = 0; a < ot; ++a)
      for (int64_t b = 0; b < oh; ++b)
        for (int64_t c = 0; c < ow; ++c) {
          double s = 0.0;
          for (int64_t ci = 0; ci < cin; ++ci)
            for (int64_t i = 0; i < kt; ++i)
              for (int64_t j = 0; j < kh; ++j)
                for (int64_t k = 0; k < kw; ++k) {
                  const int64_t ti = a + i - pad, yi = b + j - pad, xi = c + k - pad;
                  if (ti < 0 || ti >= t || yi < 0 || yi >= h || xi < 0 || xi >= wd) continue;
                  s += x.at({ci, ti, yi, xi}) * w.at({co, ci, i, j, k});
                }
          out.at({co, a, b, c}) = s;
        }
  return out;
}

TEST(Conv3d, AllOnesSumsTo27) {
  Tape<double> tape;
  Var<double> x = leaf(tape, Tensor<double>({1, 3, 3, 3}, 1.0));
  Var<double> w = leaf(tape, Tensor<double>({1, 1, 3, 3, 3}, 1.0));
  Var<double> y = conv3d(x, w, Var<double>{}, {1, 1, 1}, {0, 0, 0});
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.value()[0], 27.0);
}

TEST(Conv3d, ImpulseReproducesMirroredKernelAroundImpulse) {
  // Cross-correlation of a centered impulse places w[2-i,2-j,2-k] at offset
  // (i,j,k) - 1 from the impulse.
  Tensor<double> x({1, 5, 5, 5}, 0.0);
  x.at({0, 2, 2, 2}) = 1.0;
  const Tensor<double> w = random_tensor({1, 1, 3, 3, 3}, 5);
  Tape<double> tape;
  Var<double> y = conv3d(leaf(tape, x), leaf(tape, w), Var<double>{}, {1, 1, 1}, {1, 1, 1});
  const Tensor<double> expect = direct_conv3d(x, w, 1);
  ASSERT_EQ(y.shape(), expect.shape());
  for (int64_t i = 0; i < expect.numel(); ++i) EXPECT_DOUBLE_EQ(y.value()[i], expect[i]);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 3; ++j)
      for (int64_t k = 0; k < 3; ++k)
        EXPECT_DOUBLE_EQ(y.value().at({0, 1 + i, 1 + j, 1 + k}), w.at({0, 0, 2 - i, 2 - j, 2 - k}));
}

TEST(Conv3d, MatchesDirectSummationOnRandomInput) {
  const Tensor<double> x = random_tensor({2, 4, 5, 6}, 8);
  const Tensor<double> w = random_tensor({3, 2, 3, 2, 3}, 9);
  Tape<double> tape;
  Var<double> y = conv3d(leaf(tape, x), leaf(tape, w), Var<double>{}, {1, 1, 1}, {1, 1, 1});
  const Tensor<double> expect = direct_conv3d(x, w, 1);
  ASSERT_EQ(y.shape(), expect.shape());
  for (int64_t i = 0; i < expect.numel(); ++i) EXPECT_NEAR(y.value()[i], expect[i], 1e-12);
}

TEST(Conv3d, KernelLargerThanPaddedInput) {
  Tape<double> tape;
  Var<double> x = leaf(tape, Tensor<double>({1, 2, 2, 2}));
  Var<double> w = leaf(tape, Tensor<double>({1, 1, 3, 3, 3}));
  EXPECT_THROW(conv3d(x, w, Var<double>{}, {1, 1, 1}, {0, 0, 0}), DimensionError);
}

TEST(Conv3d, GradientInputWeightBiasBatched) {
  for (int probe = 0; probe < kProbes; ++probe) {
    const Tensor<double> x = random_tensor({2, 2, 3, 4, 4}, 170 + probe);
    const Tensor<double> w = random_tensor({3, 2, 3, 3, 3}, 180 + probe);
    const Tensor<double> b = random_tensor({3}, 190 + probe);
    const Extent3 s{1, 1, 1}, p{1, 1, 1};
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(conv3d(v, leaf(t, w), leaf(t, b), s, p), probe);
              }, x), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(conv3d(leaf(t, x), v, leaf(t, b), s, p), probe);
              }, w), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(conv3d(leaf(t, x), leaf(t, w), v, s, p), probe);
              }, b), kTol);
  }
}

TEST(Conv3d, StridedGradient) {
  const Tensor<double> x = random_tensor({1, 4, 5, 6}, 11);
  const Tensor<double> w = random_tensor({2, 1, 2, 3, 2}, 12);
  EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
              return weighted_sum(conv3d(v, leaf(t, w), Var<double>{}, {2, 1, 2}, {0, 1, 1}), 1);
            }, x), kTol);
}

TEST(Maxpool3d, HandCases) {
  Tape<double> tape;
  Var<double> c = leaf(tape, Tensor<double>({2, 2, 4, 4}, 0.7));
  for (double v : maxpool3d(c, {1, 2, 2}, {1, 2, 2}).value().values()) EXPECT_EQ(v, 0.7);
  Var<double> q = leaf(tape, Tensor<double>({1, 1, 2, 2}, {1, 2, 3, 4}));
  Var<double> y = maxpool3d(q, {1, 2, 2}, {1, 2, 2});
  EXPECT_EQ(y.numel(), 1);
  EXPECT_EQ(y.value()[0], 4.0);
  EXPECT_THROW(maxpool3d(leaf(tape, Tensor<double>({1, 1, 3, 4})), {1, 2, 2}, {1, 2, 2}),
               DimensionError);
}

TEST(Maxpool3d, TiesRouteToFirstIndex) {
  Tape<double> tape;
  Var<double> x = tape.leaf(Tensor<double>({1, 1, 2, 2}, 5.0), true);
  tape.backward(sum(maxpool3d(x, {1, 2, 2}, {1, 2, 2})));
  EXPECT_EQ(tape.grad(x).storage(), (std::vector<double>{1, 0, 0, 0}));
}

TEST(Maxpool3d, GradientAndConservation) {
  for (int probe = 0; probe < kProbes; ++probe) {
    const Tensor<double> x = distinct_tensor({2, 3, 2, 4, 4}, 200 + probe);
    EXPECT_LT(gradient_check([&](Tape<double>&, Var<double> v) {
                return weighted_sum(maxpool3d(v, {1, 2, 2}, {1, 2, 2}), probe);
              }, x), kTol);
    Tape<double> tape;
    Var<double> v = tape.leaf(x, true);
    Var<double> y = maxpool3d(v, {2, 2, 2}, {2, 2, 2});
    const Tensor<double> upstream = random_tensor(y.shape(), 300 + probe);
    tape.backward(sum(mul(y, tape.leaf(upstream))));
    double in_mass = 0.0, out_mass = 0.0;
    for (double g : tape.grad(v).values()) in_mass += g;
    for (double g : upstream.values()) out_mass += g;
    EXPECT_NEAR(in_mass, out_mass, 1e-12);
  }
}

TEST(DepthwiseTemporalConv, MatchesDirectSumAndGradients) {
  const Tensor<double> x = random_tensor({2, 5, 3}, 13);
  const Tensor<double> w = random_tensor({3, 3}, 14);
  const Tensor<double> b = random_tensor({3}, 15);
  Tape<double> tape;
  const Tensor<double>& y =
      depthwise_temporal_conv(leaf(tape, x), leaf(tape, w), leaf(tape, b)).value();
  for (int64_t bi = 0; bi < 2; ++bi)
    for (int64_t t = 0; t < 5; ++t)
      for (int64_t c = 0; c < 3; ++c) {
        double s = b[c];
        for (int64_t j = 0; j < 3; ++j) {
          const int64_t src = t + j - 1;
          if (src >= 0 && src < 5) s += w.at({c, j}) * x.at({bi, src, c});
        }
        EXPECT_NEAR(y.at({bi, t, c}), s, 1e-14);
      }
  for (int probe = 0; probe < kProbes; ++probe) {
    const Tensor<double> xp = random_tensor({2, 4, 3}, 210 + probe);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(depthwise_temporal_conv(v, leaf(t, w), leaf(t, b)), probe);
              }, xp), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(depthwise_temporal_conv(leaf(t, xp), v, leaf(t, b)), probe);
              }, w), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return weighted_sum(depthwise_temporal_conv(leaf(t, xp), leaf(t, w), v), probe);
              }, b), kTol);
  }
}

TEST(ShapeOps, MeanAxisConcatSliceRoundTrip) {
  Tape<double> tape;
  Tensor<double> rows({3, 4});
  for (int64_t r = 0; r < 3; ++r)
    for (int64_t j = 0; j < 4; ++j) rows.at({r, j}) = static_cast<double>(j) * 0.5 - 1.0;
  const Tensor<double>& m = mean_axis(leaf(tape, rows), 0).value();
  for (int64_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(m[j], static_cast<double>(j) * 0.5 - 1.0);
  EXPECT_THROW(mean_axis(leaf(tape, rows), 2), DimensionError);

  const Tensor<double> a = random_tensor({2, 3, 4}, 16);
  const Tensor<double> b = random_tensor({2, 5, 4}, 17);
  const Var<double> parts[] = {leaf(tape, a), leaf(tape, b)};
  Var<double> c = concat<double>(parts, 1);
  EXPECT_EQ(c.shape(), (Shape{2, 8, 4}));
  EXPECT_EQ(slice(c, 1, 0, 3).value(), a);
  EXPECT_EQ(slice(c, 1, 3, 5).value(), b);
  EXPECT_THROW(slice(c, 1, 6, 3), DimensionError);
}

TEST(ShapeOps, Gradients) {
  for (int probe = 0; probe < kProbes; ++probe) {
    const Tensor<double> x = random_tensor({3, 4, 5}, 220 + probe);
    const Tensor<double> y = random_tensor({3, 2, 5}, 230 + probe);
    for (int64_t axis = 0; axis < 3; ++axis) {
      EXPECT_LT(gradient_check([&](Tape<double>&, Var<double> v) {
                  return weighted_sum(mean_axis(v, axis), probe);
                }, x), kTol);
    }
    EXPECT_LT(gradient_check([&](Tape<double>&, Var<double> v) {
                return weighted_sum(permute(v, {2, 0, 1}), probe);
              }, x), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>&, Var<double> v) {
                return weighted_sum(reshape(v, {12, 5}), probe);
              }, x), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>&, Var<double> v) {
                return weighted_sum(slice(v, 1, 1, 2), probe);
              }, x), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                const Var<double> parts[] = {leaf(t, y), v, v};
                return weighted_sum(concat<double>(parts, 1), probe);
              }, x), kTol);
  }
}

TEST(ShapeOps, PermuteMatchesIndexMap) {
  const Tensor<double> x = random_tensor({2, 3, 4, 5}, 18);
  Tape<double> tape;
  const Tensor<double>& y = permute(leaf(tape, x), {2, 0, 3, 1}).value();
  ASSERT_EQ(y.shape(), (Shape{4, 2, 5, 3}));
  for (int64_t a = 0; a < 2; ++a)
    for (int64_t b = 0; b < 3; ++b)
      for (int64_t c = 0; c < 4; ++c)
        for (int64_t d = 0; d < 5; ++d) EXPECT_EQ(y.at({c, a, d, b}), x.at({a, b, c, d}));
}

TEST(Losses, CosineMarginBceGradients) {
  for (int probe = 0; probe < kProbes; ++probe) {
    const Tensor<double> z = random_tensor({4, 3}, 240 + probe);
    EXPECT_LT(gradient_check([&](Tape<double>&, Var<double> v) {
                return weighted_sum(cosine_similarity_matrix(v), probe);
              }, z), kTol);
    const Tensor<double> target = random_tensor({3, 3}, 250 + probe, 0.5);
    const Tensor<double> pred = random_tensor({3, 3}, 260 + probe, 0.5);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return margin_hinge_squared(v, leaf(t, target), 0.1, Reduction::kSum);
              }, pred), kTol);
    EXPECT_LT(gradient_check([&](Tape<double>& t, Var<double> v) {
                return margin_hinge_squared(v, leaf(t, target), 0.1, Reduction::kMean);
              }, pred), kTol);
  }
  for (double logit : {-3.0, -0.2, 0.0, 0.7, 4.0}) {
    for (int label : {0, 1}) {
      EXPECT_LT(gradient_check([&](Tape<double>&, Var<double> v) { return bce_with_logits(v, label); },
                               Tensor<double>({1}, logit)),
                kTol);
    }
  }
}

}  // namespace
}  // namespace lttd::num
