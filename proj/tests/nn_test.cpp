#include "mbul/nn.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mbul/common.hpp"

namespace mbul {
namespace {

void fill_random(MatX<double>& m, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (long i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
}

Batch<double> random_batch(int c, int h, int w, int n, Rng& rng) {
  Batch<double> b = Batch<double>::make(c, h, w, n);
  fill_random(b.m, rng);
  return b;
}

// Reference convolution written as the plain definition, one output cell at
// a time. Weight layout matches Conv2D: row oc, column ci*k*k + ky*k + kx.
Batch<double> naive_conv(const Batch<double>& x, const MatX<double>& w,
                         const MatX<double>& b, int out_c, int k, int stride,
                         int pad) {
  const int oh = conv_out_extent(x.h, k, stride, pad);
  const int ow = conv_out_extent(x.w, k, stride, pad);
  Batch<double> y = Batch<double>::make(out_c, oh, ow, x.n());
  for (int i = 0; i < x.n(); ++i)
    for (int oc = 0; oc < out_c; ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = b(oc, 0);
          for (int ci = 0; ci < x.c; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int yy = oy * stride + ky - pad;
                const int xx = ox * stride + kx - pad;
                if (yy < 0 || yy >= x.h || xx < 0 || xx >= x.w) continue;
                acc += w(oc, (ci * k + ky) * k + kx) *
                       x.m(ci * x.plane() + yy * x.w + xx, i);
              }
          y.m(oc * oh * ow + oy * ow + ox, i) = acc;
        }
  return y;
}

// Scalar probe used by the finite-difference checks: a fixed random
// weighting of every output entry.
double weighted_output(LayerBase<double>& layer, const Batch<double>& x,
                       const MatX<double>& r) {
  return (layer.forward(x, false).m.array() * r.array()).sum();
}

// Checks the analytic parameter and input gradients of one layer against
// central differences of the weighted-output probe.
void expect_layer_gradients_match(LayerBase<double>& layer, Batch<double> x,
                                  Rng& rng) {
  Batch<double> y = layer.forward(x, true);
  MatX<double> r(y.m.rows(), y.m.cols());
  fill_random(r, rng);

  for (auto* blob : layer.params()) blob->zero_grad();
  Batch<double> dy = y;
  dy.m = r;
  const Batch<double> dx = layer.backward(dy);
  ASSERT_EQ(dx.c, x.c);
  ASSERT_EQ(dx.h, x.h);
  ASSERT_EQ(dx.w, x.w);

  const double h = 1e-6;
  const auto expect_close = [](double analytic, double fd) {
    EXPECT_NEAR(analytic, fd, 1e-7 + 1e-5 * std::abs(fd));
  };
  for (auto* blob : layer.params()) {
    for (long i = 0; i < blob->w.size(); ++i) {
      const double keep = blob->w.data()[i];
      blob->w.data()[i] = keep + h;
      const double up = weighted_output(layer, x, r);
      blob->w.data()[i] = keep - h;
      const double down = weighted_output(layer, x, r);
      blob->w.data()[i] = keep;
      expect_close(blob->g.data()[i], (up - down) / (2 * h));
    }
  }
  for (long i = 0; i < x.m.size(); ++i) {
    const double keep = x.m.data()[i];
    x.m.data()[i] = keep + h;
    const double up = weighted_output(layer, x, r);
    x.m.data()[i] = keep - h;
    const double down = weighted_output(layer, x, r);
    x.m.data()[i] = keep;
    expect_close(dx.m.data()[i], (up - down) / (2 * h));
  }
}

TEST(ConvOutExtent, FollowsTheStridePlan) {
  int e = 299;
  const int expected[] = {150, 75, 38, 19, 10};
  for (int stage = 0; stage < 5; ++stage) {
    e = conv_out_extent(e, 3, 2, 1);
    EXPECT_EQ(e, expected[stage]);
  }
  EXPECT_EQ(conv_out_extent(19, 1, 1, 0), 19);
}

TEST(Conv2DTest, MatchesTheNaiveReference) {
  Rng rng(41);
  Conv2D<double> conv("c", 2, 3, 3, 2, 1);
  conv.init_he(rng);
  auto params = conv.params();
  fill_random(params[1]->w, rng);  // nonzero bias
  const Batch<double> x = random_batch(2, 7, 6, 3, rng);
  const Batch<double> got = conv.forward(x, false);
  const Batch<double> want =
      naive_conv(x, params[0]->w, params[1]->w, 3, 3, 2, 1);
  ASSERT_EQ(got.c, 3);
  ASSERT_EQ(got.h, 4);
  ASSERT_EQ(got.w, 3);
  EXPECT_LT((got.m - want.m).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Conv2DTest, PointwiseKernelMatchesTheNaiveReference) {
  Rng rng(42);
  Conv2D<double> conv("c", 3, 2, 1, 1, 0);
  conv.init_he(rng);
  const Batch<double> x = random_batch(3, 5, 4, 2, rng);
  const Batch<double> got = conv.forward(x, false);
  const Batch<double> want = naive_conv(x, conv.params()[0]->w,
                                        conv.params()[1]->w, 2, 1, 1, 0);
  EXPECT_LT((got.m - want.m).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Conv2DTest, BatchColumnsAreIndependent) {
  Rng rng(43);
  Conv2D<double> conv("c", 2, 4, 3, 2, 1);
  conv.init_he(rng);
  const Batch<double> x = random_batch(2, 6, 6, 4, rng);
  const Batch<double> batched = conv.forward(x, false);
  for (int i = 0; i < x.n(); ++i) {
    Batch<double> single = Batch<double>::make(2, 6, 6, 1);
    single.m = x.m.col(i);
    const Batch<double> y = conv.forward(single, false);
    EXPECT_LT((y.m.col(0) - batched.m.col(i)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(DepthwiseConv2DTest, MatchesAPerChannelNaiveReference) {
  Rng rng(44);
  DepthwiseConv2D<double> conv("d", 3, 3, 2, 1);
  conv.init_he(rng);
  auto params = conv.params();
  fill_random(params[1]->w, rng);
  const Batch<double> x = random_batch(3, 5, 7, 2, rng);
  const Batch<double> got = conv.forward(x, false);
  // A depthwise layer is one single-channel convolution per channel.
  for (int ch = 0; ch < 3; ++ch) {
    Batch<double> xc = Batch<double>::make(1, 5, 7, 2);
    xc.m = x.m.middleRows(ch * x.plane(), x.plane());
    MatX<double> w = params[0]->w.row(ch);
    MatX<double> b = params[1]->w.row(ch);
    const Batch<double> want = naive_conv(xc, w, b, 1, 3, 2, 1);
    EXPECT_LT((got.m.middleRows(ch * got.plane(), got.plane()) - want.m)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
  }
}

TEST(DenseTest, ComputesAffineMapPerColumn) {
  Dense<double> dense("f", 2, 3);
  auto params = dense.params();
  params[0]->w << 1, 2, 3, 4, 5, 6;
  params[1]->w << 10, 20, 30;
  Batch<double> x;
  x.c = 2;
  x.h = x.w = 1;
  x.m.resize(2, 2);
  x.m << 1, 0, 1, 1;
  const Batch<double> y = dense.forward(x, false);
  MatX<double> want(3, 2);
  want << 13, 12, 27, 24, 41, 36;
  EXPECT_LT((y.m - want).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ReLUTest, ClampsForwardAndMasksBackward) {
  ReLU<double> relu;
  Batch<double> x;
  x.c = 4;
  x.h = x.w = 1;
  x.m.resize(4, 1);
  x.m << -2, -0.5, 0.25, 3;
  const Batch<double> y = relu.forward(x, true);
  EXPECT_EQ(y.m(0, 0), 0);
  EXPECT_EQ(y.m(1, 0), 0);
  EXPECT_EQ(y.m(2, 0), 0.25);
  EXPECT_EQ(y.m(3, 0), 3);
  Batch<double> dy = y;
  dy.m << 1, 1, 1, 1;
  const Batch<double> dx = relu.backward(dy);
  EXPECT_EQ(dx.m(0, 0), 0);
  EXPECT_EQ(dx.m(1, 0), 0);
  EXPECT_EQ(dx.m(2, 0), 1);
  EXPECT_EQ(dx.m(3, 0), 1);
}

TEST(GlobalAvgPoolTest, AveragesEachChannelPlane) {
  GlobalAvgPool<double> gap;
  Batch<double> x = Batch<double>::make(2, 2, 2, 1);
  x.m << 1, 2, 3, 4, 10, 20, 30, 40;
  const Batch<double> y = gap.forward(x, true);
  EXPECT_DOUBLE_EQ(y.m(0, 0), 2.5);
  EXPECT_DOUBLE_EQ(y.m(1, 0), 25.0);
  Batch<double> dy = y;
  dy.m << 4, 8;
  const Batch<double> dx = gap.backward(dy);
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(dx.m(i, 0), 1.0);
    EXPECT_DOUBLE_EQ(dx.m(4 + i, 0), 2.0);
  }
}

TEST(SoftArgmaxTest, UniformMapLandsOnTheCentre) {
  SoftArgmax2D<double> sam;
  Batch<double> x = Batch<double>::make(1, 5, 7, 2);
  x.m.setConstant(0.37);
  const Batch<double> y = sam.forward(x, false);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(y.m(0, i), 0.0, 1e-12);
    EXPECT_NEAR(y.m(1, i), 0.0, 1e-12);
  }
}

TEST(SoftArgmaxTest, SharpPeakLandsOnTheCellCentre) {
  SoftArgmax2D<double> sam;
  Batch<double> x = Batch<double>::make(1, 6, 8, 1);
  const int px = 5, py = 2;
  x.m(py * 8 + px, 0) = 60.0;  // softmax mass collapses onto this cell
  const Batch<double> y = sam.forward(x, false);
  EXPECT_NEAR(y.m(0, 0), (px + 0.5) / 8.0 - 0.5, 1e-9);
  EXPECT_NEAR(y.m(1, 0), (py + 0.5) / 6.0 - 0.5, 1e-9);
}

TEST(SoftArgmaxTest, OutputsStayInsideTheUnitBox) {
  SoftArgmax2D<double> sam;
  Rng rng(45);
  Batch<double> x = random_batch(1, 9, 9, 16, rng);
  x.m *= 40.0;
  const Batch<double> y = sam.forward(x, false);
  for (int i = 0; i < y.n(); ++i) {
    EXPECT_GT(y.m(0, i), -0.5);
    EXPECT_LT(y.m(0, i), 0.5);
    EXPECT_GT(y.m(1, i), -0.5);
    EXPECT_LT(y.m(1, i), 0.5);
  }
}

TEST(Gradients, Conv2DMatchesFiniteDifferences) {
  Rng rng(46);
  Conv2D<double> conv("c", 2, 3, 3, 2, 1);
  conv.init_he(rng);
  expect_layer_gradients_match(conv, random_batch(2, 5, 6, 2, rng), rng);
}

TEST(Gradients, PointwiseConv2DMatchesFiniteDifferences) {
  Rng rng(47);
  Conv2D<double> conv("c", 3, 2, 1, 1, 0);
  conv.init_he(rng);
  expect_layer_gradients_match(conv, random_batch(3, 4, 4, 2, rng), rng);
}

TEST(Gradients, DepthwiseConv2DMatchesFiniteDifferences) {
  Rng rng(48);
  DepthwiseConv2D<double> conv("d", 3, 3, 2, 1);
  conv.init_he(rng);
  expect_layer_gradients_match(conv, random_batch(3, 5, 5, 2, rng), rng);
}

TEST(Gradients, DenseMatchesFiniteDifferences) {
  Rng rng(49);
  Dense<double> dense("f", 4, 3);
  dense.init_he(rng);
  expect_layer_gradients_match(dense, random_batch(4, 1, 1, 3, rng), rng);
}

TEST(Gradients, GlobalAvgPoolMatchesFiniteDifferences) {
  Rng rng(50);
  GlobalAvgPool<double> gap;
  expect_layer_gradients_match(gap, random_batch(3, 4, 5, 2, rng), rng);
}

TEST(Gradients, SoftArgmaxMatchesFiniteDifferences) {
  Rng rng(51);
  SoftArgmax2D<double> sam;
  expect_layer_gradients_match(sam, random_batch(1, 4, 5, 2, rng), rng);
}

TEST(Activations, MatchTheNaiveFormulasAtModerateArguments) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(3.0), 1.0 / (1.0 + std::exp(-3.0)), 1e-15);
  EXPECT_NEAR(sigmoid(-3.0), 1.0 - sigmoid(3.0), 1e-15);
  EXPECT_DOUBLE_EQ(softplus(0.0), std::log(2.0));
  EXPECT_NEAR(softplus(2.5), std::log1p(std::exp(2.5)), 1e-15);
  EXPECT_NEAR(bce_with_logit(0.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_with_logit(3.0, 1.0), -std::log(sigmoid(3.0)), 1e-15);
  EXPECT_NEAR(bce_with_logit(3.0, 0.0), -std::log(1.0 - sigmoid(3.0)), 1e-12);
  EXPECT_DOUBLE_EQ(bce_with_logit_grad(1.3, 1.0), sigmoid(1.3) - 1.0);
}

TEST(Activations, StayFiniteAndCorrectAtExtremeArguments) {
  EXPECT_DOUBLE_EQ(softplus(1000.0), 1000.0);
  EXPECT_DOUBLE_EQ(softplus(-1000.0), 0.0);
  EXPECT_DOUBLE_EQ(bce_with_logit(1000.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(bce_with_logit(-1000.0, 1.0), 1000.0);
  EXPECT_DOUBLE_EQ(bce_with_logit(1000.0, 0.0), 1000.0);
  EXPECT_GE(sigmoid(-800.0), 0.0);
  EXPECT_LT(sigmoid(-800.0), 1e-200);
  EXPECT_TRUE(std::isfinite(sigmoid(800.0)));
  EXPECT_DOUBLE_EQ(sigmoid(800.0), 1.0);
}

TEST(AdamTest, MatchesAScalarReferenceOverSeveralSteps) {
  ParamBlob<double> p("p", 1, 1);
  p.w(0, 0) = 0.4;
  Adam<double> opt({&p}, 0.05);
  double w = 0.4, m = 0.0, v = 0.0;
  const double grads[] = {0.5, -0.2, 0.9, 0.0};
  for (int t = 1; t <= 4; ++t) {
    const double g = grads[t - 1];
    p.g(0, 0) = g;
    opt.step();
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    w -= 0.05 * mhat / (std::sqrt(vhat) + 1e-8);
    EXPECT_NEAR(p.w(0, 0), w, 1e-14);
  }
}

TEST(AdamTest, FirstStepMovesByALearningRateRegardlessOfGradientScale) {
  // Bias correction makes the first update lr * g / (|g| + eps).
  for (const double g : {1e-4, 1.0, 250.0}) {
    ParamBlob<double> p("p", 1, 1);
    Adam<double> opt({&p}, 0.01);
    p.g(0, 0) = g;
    opt.step();
    EXPECT_NEAR(p.w(0, 0), -0.01, 1e-6);
  }
}

TEST(AdamTest, ZeroGradClearsEveryAccumulator) {
  ParamBlob<double> a("a", 2, 3), b("b", 1, 1);
  a.g.setConstant(7.0);
  b.g.setConstant(-2.0);
  Adam<double> opt({&a, &b}, 0.1);
  opt.zero_grad();
  EXPECT_EQ(a.g.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(b.g.cwiseAbs().maxCoeff(), 0.0);
}

}  // namespace
}  // namespace mbul
