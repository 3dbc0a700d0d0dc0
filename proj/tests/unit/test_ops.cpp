#include <gtest/gtest.h>

#include <cmath>

#include "cxrseg/errors.hpp"
#include "cxrseg/gradcheck.hpp"
#include "cxrseg/ops.hpp"
#include "support.hpp"

using namespace cxrseg;
using testsupport::random_tensor;

namespace {

// Direct nested-loop cross-correlation with implicit zero padding.
std::vector<double> conv_oracle(const Tensor& x, const Tensor& k, const Tensor& b, int stride,
                                int pad, std::size_t& oh, std::size_t& ow) {
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  oh = (h + 2 * pad - kh) / stride + 1;
  ow = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> out(n * cout * oh * ow, 0.0);
  for (std::size_t in = 0; in < n; ++in)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = b.defined() ? b.at(co) : 0.0;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long sy = static_cast<long>(y * stride + i) - pad;
                const long sx = static_cast<long>(xx * stride + j) - pad;
                if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w))
                  continue;
                acc += x.at(((in * cin + ci) * h + sy) * w + sx) *
                       k.at(((co * cin + ci) * kh + i) * kw + j);
              }
          out[((in * cout + co) * oh + y) * ow + xx] = acc;
        }
  return out;
}

void expect_pass(const GradcheckReport& r) {
  EXPECT_TRUE(r.passed) << "max rel error " << r.max_rel_error();
  for (const auto& e : r.entries) EXPECT_LT(e.max_rel_error, 1e-4) << e.name;
}

}  // namespace

TEST(Conv2d, OnesGiveNine) {
  const Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
  const Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
  const Tensor y = conv2d(x, k, Tensor(), 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.item(), 9.0);
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  const Tensor x = random_tensor({2, 1, 4, 5}, rng);
  const Tensor y = conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0), Tensor::zeros({1}));
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.at(i), x.at(i));
}

TEST(Conv2d, MatchesLoopOracle) {
  Rng rng(2);
  struct Case {
    Shape x, k;
    int stride, pad;
    bool bias;
  };
  const std::vector<Case> cases{{{1, 2, 5, 5}, {3, 2, 3, 3}, 1, 1, false},
                                {{2, 3, 7, 6}, {4, 3, 3, 3}, 1, 1, true},
                                {{1, 2, 8, 8}, {2, 2, 2, 2}, 2, 0, false},
                                {{2, 1, 9, 7}, {3, 1, 3, 3}, 2, 1, true},
                                {{1, 4, 4, 4}, {5, 4, 1, 1}, 1, 0, true}};
  for (const auto& c : cases) {
    const Tensor x = random_tensor(c.x, rng), k = random_tensor(c.k, rng);
    const Tensor b = c.bias ? random_tensor({c.k[0]}, rng) : Tensor();
    std::size_t oh = 0, ow = 0;
    const auto expected = conv_oracle(x, k, b, c.stride, c.pad, oh, ow);
    const Tensor y = conv2d(x, k, b, c.stride, c.pad);
    ASSERT_EQ(y.shape(), (Shape{c.x[0], c.k[0], oh, ow}));
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(y.at(i), expected[i], 1e-12);
  }
}

TEST(Conv2d, ChannelMismatchNamesBothShapes) {
  try {
    conv2d(Tensor({1, 2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor());
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1,2,4,4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[1,3,3,3]"), std::string::npos) << msg;
  }
}

TEST(Conv2d, Gradcheck) {
  expect_pass(gradcheck(
      [](const std::vector<Tensor>& in) { return conv2d(in[0], in[1], in[2], 1, 1); },
      {{1, 2, 4, 4}, {3, 2, 3, 3}, {3}}, 11));
  expect_pass(gradcheck(
      [](const std::vector<Tensor>& in) { return conv2d(in[0], in[1], Tensor(), 2, 0); },
      {{2, 2, 6, 6}, {3, 2, 2, 2}}, 12));
}

TEST(Conv2d, ZeroUpstreamGivesZeroGradients) {
  Rng rng(3);
  Tensor x = random_tensor({1, 2, 4, 4}, rng), k = random_tensor({2, 2, 3, 3}, rng);
  Tensor b = random_tensor({2}, rng);
  for (auto* t : {&x, &k, &b}) t->set_requires_grad(true);
  const Tensor y = conv2d(x, k, b, 1, 1);
  y.backward(std::vector<double>(y.numel(), 0.0));
  for (const auto* t : {&x, &k, &b})
    for (double g : t->grad()) EXPECT_EQ(g, 0.0);
}

TEST(Conv2d, BiasGradientIsUpstreamSum) {
  Rng rng(4);
  Tensor x = random_tensor({2, 2, 4, 4}, rng), k = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = Tensor::zeros({3}, true);
  const Tensor y = conv2d(x, k, b, 1, 1);
  std::vector<double> up(y.numel());
  for (auto& u : up) u = rng.uniform(-1, 1);
  y.backward(up);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t i = 0; i < 16; ++i) s += up[(n * 3 + c) * 16 + i];
    EXPECT_NEAR(b.grad()[c], s, 1e-12);
  }
}

TEST(MaxPool, SingleWindow) {
  const Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(max_pool2d(x).item(), 4.0);
}

TEST(MaxPool, ConstantInputRoutesGradientToFirstElement) {
  Tensor x = Tensor::full({1, 1, 4, 4}, 3.0, true);
  const Tensor y = max_pool2d(x);
  for (double v : y.values()) EXPECT_EQ(v, 3.0);
  y.backward(std::vector<double>(4, 1.0));
  const auto g = x.grad();
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      EXPECT_EQ(g[r * 4 + c], (r % 2 == 0 && c % 2 == 0) ? 1.0 : 0.0) << r << "," << c;
}

TEST(MaxPool, MatchesLoopOracle) {
  Rng rng(5);
  const Tensor x = random_tensor({1, 1, 8, 8}, rng);
  const Tensor y = max_pool2d(x);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      double m = -INFINITY;
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) m = std::max(m, x.at((2 * r + i) * 8 + 2 * c + j));
      EXPECT_EQ(y.at(r * 4 + c), m);
    }
}

TEST(MaxPool, NonDivisibleIsShapeError) {
  EXPECT_THROW(max_pool2d(Tensor({1, 1, 5, 4})), ShapeError);
}

TEST(MaxPool, Gradcheck) {
  expect_pass(gradcheck([](const std::vector<Tensor>& in) { return max_pool2d(in[0]); },
                        {{2, 3, 6, 4}}, 13));
}

TEST(Activations, Values) {
  EXPECT_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_EQ(relu(Tensor({2}, {-1.0, 2.0})).at(0), 0.0);
  EXPECT_EQ(relu(Tensor({2}, {-1.0, 2.0})).at(1), 2.0);
  EXPECT_NEAR(tanh(Tensor::scalar(0.3)).item(), std::tanh(0.3), 1e-15);
  // large logits stay finite
  EXPECT_EQ(sigmoid(Tensor::scalar(-800.0)).item(), 0.0);
  EXPECT_EQ(sigmoid(Tensor::scalar(800.0)).item(), 1.0);
}

TEST(Activations, Gradcheck) {
  const std::vector<Shape> s{{2, 3, 3, 3}};
  expect_pass(gradcheck([](const std::vector<Tensor>& in) { return sigmoid(in[0]); }, s, 14));
  expect_pass(gradcheck([](const std::vector<Tensor>& in) { return relu(in[0]); }, s, 15));
  expect_pass(gradcheck([](const std::vector<Tensor>& in) { return tanh(in[0]); }, s, 16));
  expect_pass(gradcheck(
      [](const std::vector<Tensor>& in) { return sigmoid(tanh(sigmoid(in[0]))); }, s, 17));
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  Rng rng(6);
  const Tensor x = random_tensor({2, 3, 2, 2}, rng, -5, 5);
  const Tensor y = softmax_channels(x);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < 3; ++c) s += y.at((n * 3 + c) * 4 + i);
      EXPECT_NEAR(s, 1.0, 1e-15);
    }
  Tensor shifted = x.clone();
  for (auto& v : shifted.values()) v += 1000.0;
  const Tensor y2 = softmax_channels(shifted);
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y.at(i), y2.at(i), 1e-12);
}

TEST(Softmax, Gradcheck) {
  expect_pass(gradcheck([](const std::vector<Tensor>& in) { return softmax_channels(in[0]); },
                        {{2, 3, 3, 2}}, 18));
}

TEST(Structural, ConcatSliceUpsample) {
  const Tensor a = Tensor::full({1, 3, 2, 2}, 1.0), b = Tensor::full({1, 5, 2, 2}, 2.0);
  const Tensor c = concat_channels(a, b);
  EXPECT_EQ(c.shape(), (Shape{1, 8, 2, 2}));
  EXPECT_EQ(c.at(3 * 4), 2.0);
  EXPECT_THROW(concat_channels(a, Tensor({1, 5, 3, 2})), ShapeError);
  const Tensor s = slice_channels(c, 2, 2);
  EXPECT_EQ(s.shape(), (Shape{1, 2, 2, 2}));
  EXPECT_EQ(s.at(0), 1.0);
  EXPECT_EQ(s.at(4), 2.0);

  const Tensor u = upsample_nearest2x(Tensor({1, 1, 1, 2}, {1.0, 2.0}));
  EXPECT_EQ(u.shape(), (Shape{1, 1, 2, 4}));
  EXPECT_EQ((std::vector<double>(u.values().begin(), u.values().end())),
            (std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2}));
}

TEST(Structural, AddAndMulShapeErrors) {
  EXPECT_THROW(add(Tensor({1, 2, 2, 2}), Tensor({1, 3, 2, 2})), ShapeError);
  EXPECT_THROW(mul(Tensor({1, 2, 2, 2}), Tensor({1, 2, 3, 2})), ShapeError);
}

TEST(Structural, Gradcheck) {
  expect_pass(gradcheck(
      [](const std::vector<Tensor>& in) { return concat_channels(in[0], in[1]); },
      {{2, 2, 3, 3}, {2, 1, 3, 3}}, 19));
  expect_pass(gradcheck(
      [](const std::vector<Tensor>& in) { return slice_channels(in[0], 1, 2); }, {{2, 4, 2, 2}},
      20));
  expect_pass(gradcheck([](const std::vector<Tensor>& in) { return upsample_nearest2x(in[0]); },
                        {{1, 2, 3, 2}}, 21));
  expect_pass(gradcheck([](const std::vector<Tensor>& in) { return add(in[0], in[1]); },
                        {{1, 2, 3, 3}, {1, 2, 3, 3}}, 22));
  expect_pass(gradcheck([](const std::vector<Tensor>& in) { return mul(in[0], in[1]); },
                        {{2, 3, 3, 3}, {2, 3, 3, 3}}, 23));
  expect_pass(gradcheck([](const std::vector<Tensor>& in) { return mul(in[0], in[1]); },
                        {{2, 3, 3, 3}, {2, 1, 3, 3}}, 24));
  expect_pass(gradcheck([](const std::vector<Tensor>& in) { return sum(scale(in[0], -2.5)); },
                        {{3, 4}}, 25));
}

TEST(BatchNorm, TrainingModeStandardizesPerChannel) {
  Rng rng(7);
  // wide spread so the variance tolerance is not trivially met
  const Tensor x = random_tensor({4, 3, 5, 5}, rng, -40, 60);
  auto p = BatchNormParams::make(3);
  const Tensor y = batch_norm(x, p, true);
  const std::size_t hw = 25;
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0, xmean = 0.0, xvar = 0.0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < hw; ++i) {
        mean += y.at((n * 3 + c) * hw + i);
        xmean += x.at((n * 3 + c) * hw + i);
      }
    mean /= 100.0;
    xmean /= 100.0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < hw; ++i) {
        var += std::pow(y.at((n * 3 + c) * hw + i) - mean, 2);
        xvar += std::pow(x.at((n * 3 + c) * hw + i) - xmean, 2);
      }
    var /= 100.0;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-5);
    // running statistics after one step from (0, 1)
    EXPECT_NEAR(p.running_mean.at(c), 0.1 * xmean, 1e-12);
    EXPECT_NEAR(p.running_var.at(c), 0.9 + 0.1 * xvar / 99.0, 1e-9);
  }
}

TEST(BatchNorm, EvalModeUsesRunningStatsAndMutatesNothing) {
  auto p = BatchNormParams::make(2);
  p.running_mean.at(0) = 1.0;
  p.running_var.at(0) = 4.0;
  p.scale.at(1) = 2.0;
  p.shift.at(1) = 0.5;
  const Tensor x({1, 2, 1, 2}, {3.0, 5.0, 1.0, -1.0});
  const Tensor y = batch_norm(x, p, false);
  EXPECT_NEAR(y.at(0), 2.0 / std::sqrt(4.0 + kBatchNormEps), 1e-12);
  EXPECT_NEAR(y.at(2), 2.0 / std::sqrt(1.0 + kBatchNormEps) + 0.5, 1e-12);
  EXPECT_EQ(p.running_mean.at(0), 1.0);
  EXPECT_EQ(p.running_var.at(0), 4.0);
}

TEST(BatchNorm, Gradcheck) {
  auto p = BatchNormParams::make(3);
  Rng rng(8);
  for (auto& v : p.scale.values()) v = rng.uniform(0.5, 1.5);
  for (auto& v : p.shift.values()) v = rng.uniform(-0.5, 0.5);
  const Tensor x = random_tensor({2, 3, 3, 3}, rng);
  expect_pass(gradcheck(
      [&p](const std::vector<Tensor>& in) { return batch_norm(in[0], p, true); },
      {x, p.scale, p.shift}, {"x", "scale", "shift"}, 26));
}

TEST(Gradcheck, ReportsCorruptedBackward) {
  // forward: 2x, backward claims 3
  auto broken = [](const std::vector<Tensor>& in) {
    Tensor out(in[0].shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) = 2.0 * in[0].at(i);
    Tensor x = in[0];
    return Tensor::record(std::move(out), "broken", {x},
                          [x](std::span<const double>, std::span<const double> gy) {
                            auto gx = x.grad_mut();
                            for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += 3.0 * gy[i];
                          });
  };
  const auto report = gradcheck(broken, {{2, 2}}, 27);
  EXPECT_FALSE(report.passed);
  EXPECT_GT(report.max_rel_error(), 0.1);
}
