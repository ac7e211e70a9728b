#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coopseg/error.hpp"
#include "coopseg/gradcheck.hpp"
#include "coopseg/graph.hpp"
#include "coopseg/ops.hpp"
#include "coopseg/optim.hpp"
#include "test_util.hpp"

using namespace coopseg;
using coopseg::testing::at4;
using coopseg::testing::bit_equal;
using coopseg::testing::max_abs_diff;
using coopseg::testing::random_labels;
using coopseg::testing::random_tensor;

namespace {

Tensor naive_conv(const Tensor& in, const Tensor& w, const Tensor& b, int stride, int pad) {
  const auto n = in.dim(0), cin = in.dim(1), h = in.dim(2), wd = in.dim(3);
  const auto cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const auto ho = (h + 2 * pad - kh) / stride + 1, wo = (wd + 2 * pad - kw) / stride + 1;
  std::vector<real> out(n * cout * ho * wo);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t x = 0; x < wo; ++x) {
          double acc = b.data()[o];
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t dy = 0; dy < kh; ++dy)
              for (std::size_t dx = 0; dx < kw; ++dx) {
                const long sy = long(y * stride + dy) - pad, sx = long(x * stride + dx) - pad;
                if (sy < 0 || sx < 0 || sy >= long(h) || sx >= long(wd)) continue;
                acc += double(at4(in, i, c, sy, sx)) * double(at4(w, o, c, dy, dx));
              }
          out[((i * cout + o) * ho + y) * wo + x] = static_cast<real>(acc);
        }
  return Tensor::from({n, cout, ho, wo}, out);
}

double bilinear_at(const Tensor& in, std::size_t n, std::size_t c, std::size_t oy, std::size_t ox, std::size_t oh,
                   std::size_t ow) {
  const double h = double(in.dim(2)), w = double(in.dim(3));
  auto coord = [](double d, double in_size, double out_size) {
    return std::clamp((d + 0.5) * in_size / out_size - 0.5, 0.0, in_size - 1);
  };
  const double sy = coord(double(oy), h, double(oh)), sx = coord(double(ox), w, double(ow));
  const auto y0 = std::size_t(std::floor(sy)), x0 = std::size_t(std::floor(sx));
  const auto y1 = std::min(y0 + 1, in.dim(2) - 1), x1 = std::min(x0 + 1, in.dim(3) - 1);
  const double fy = sy - double(y0), fx = sx - double(x0);
  return (1 - fy) * ((1 - fx) * at4(in, n, c, y0, x0) + fx * at4(in, n, c, y0, x1)) +
         fy * ((1 - fx) * at4(in, n, c, y1, x0) + fx * at4(in, n, c, y1, x1));
}

std::vector<real> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

// conv2d

TEST(Conv2d, OneByOneKernelScales) {
  Graph g;
  auto y = conv2d(g, Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4}), Tensor::from({1, 1, 1, 1}, {2}),
                  Tensor::from({1}, {0}), 1, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(values(y), (std::vector<real>{2, 4, 6, 8}));
}

TEST(Conv2d, IdentityKernelWithPadding) {
  Rng rng(3);
  auto x = random_tensor(rng, {1, 1, 5, 6});
  std::vector<real> k(9, 0);
  k[4] = 1;
  Graph g;
  auto y = conv2d(g, x, Tensor::from({1, 1, 3, 3}, k), Tensor::zeros({1}), 1, 1);
  EXPECT_TRUE(bit_equal(x, y));
}

TEST(Conv2d, MatchesSlidingWindowOracle) {
  Rng rng(11);
  auto x = random_tensor(rng, {2, 3, 5, 5});
  auto w = random_tensor(rng, {4, 3, 3, 3});
  auto b = random_tensor(rng, {4});
  for (auto [stride, pad] : {std::pair{1, 0}, std::pair{1, 1}, std::pair{2, 1}}) {
    Graph g;
    auto y = conv2d(g, x, w, b, stride, pad);
    auto ref = naive_conv(x, w, b, stride, pad);
    ASSERT_EQ(y.shape(), ref.shape());
    EXPECT_LT(max_abs_diff(y, ref), 1e-5) << "stride " << stride << " pad " << pad;
  }
}

TEST(Conv2d, Errors) {
  Graph g;
  auto w = Tensor::zeros({2, 3, 3, 3});
  auto b = Tensor::zeros({2});
  EXPECT_THROW(conv2d(g, Tensor::zeros({1, 2, 5, 5}), w, b, 1, 1), ShapeError);
  EXPECT_THROW(conv2d(g, Tensor::zeros({1, 3, 2, 2}), w, b, 1, 0), ShapeError);
  EXPECT_THROW(conv2d(g, Tensor::zeros({1, 3, 6, 6}), w, b, 2, 0), ShapeError);
  EXPECT_THROW(conv2d(g, Tensor::zeros({1, 3, 5, 5}), w, Tensor::zeros({3}), 1, 1), ShapeError);
  EXPECT_THROW(conv2d(g, Tensor::zeros({0, 3, 5, 5}), w, b, 1, 1), ShapeError);
  EXPECT_THROW(conv2d(g, Tensor::zeros({1, 3, 5, 5}), w, b, 0, 1), ShapeError);
}

// relu

TEST(Relu, Examples) {
  Graph g;
  EXPECT_EQ(values(relu(g, Tensor::from({3}, {-1, 0, 2}))), (std::vector<real>{0, 0, 2}));
  auto pos = Tensor::from({2, 2}, {0.5, 1, 2, 3});
  EXPECT_TRUE(bit_equal(relu(g, pos), pos));
}

TEST(Relu, MatchesElementwiseOracleAndZeroSubgradient) {
  Rng rng(5);
  auto x = random_tensor(rng, {2, 3, 4, 4}, 1.0, true);
  x.mutable_data()[0] = 0;
  Graph g;
  auto y = relu(g, x);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.data()[i], std::max<real>(0, x.data()[i]));
  backward(sum(g, y), g);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x.grad()[i], x.data()[i] > 0 ? 1 : 0);
  EXPECT_EQ(x.grad()[0], 0);
}

// max_pool2d

TEST(MaxPool, Examples) {
  Graph g;
  EXPECT_EQ(values(max_pool2d(g, Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4}), 2)), (std::vector<real>{4}));
  auto c = max_pool2d(g, Tensor::filled({1, 2, 4, 6}, 1.5), 2);
  EXPECT_EQ(c.shape(), (Shape{1, 2, 2, 3}));
  for (real v : c.data()) EXPECT_EQ(v, 1.5);
  EXPECT_THROW(max_pool2d(g, Tensor::zeros({1, 1, 5, 4}), 2), ShapeError);
}

TEST(MaxPool, MatchesWindowScanOracle) {
  Rng rng(9);
  auto x = random_tensor(rng, {1, 2, 4, 4});
  Graph g;
  auto y = max_pool2d(g, x, 2);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        real m = -1e30f;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, at4(x, 0, c, 2 * i + dy, 2 * j + dx));
        EXPECT_EQ(at4(y, 0, c, i, j), m);
      }
}

TEST(MaxPool, TiedWindowRoutesGradientToFirstMaximum) {
  auto x = Tensor::from({1, 1, 2, 2}, {3, 3, 3, 3}, true);
  Graph g;
  backward(sum(g, max_pool2d(g, x, 2)), g);
  EXPECT_EQ(values(Tensor::from({4}, {x.grad().begin(), x.grad().end()})), (std::vector<real>{1, 0, 0, 0}));
}

// upsample_bilinear

TEST(Upsample, ConstantIsPreserved) {
  Graph g;
  for (auto [oh, ow] : {std::pair{7, 3}, std::pair{1, 1}, std::pair{16, 9}}) {
    auto y = upsample_bilinear(g, Tensor::filled({1, 2, 3, 5}, 5.0), oh, ow);
    for (real v : y.data()) EXPECT_FLOAT_EQ(v, 5.0f);
  }
}

TEST(Upsample, SameSizeIsIdentity) {
  Rng rng(2);
  auto x = random_tensor(rng, {2, 3, 4, 5});
  Graph g;
  EXPECT_TRUE(bit_equal(upsample_bilinear(g, x, 4, 5), x));
}

TEST(Upsample, TwoByTwoToFourByFour) {
  auto x = Tensor::from({1, 1, 2, 2}, {0, 1, 2, 3});
  Graph g;
  auto y = upsample_bilinear(g, x, 4, 4);
  // Source coordinates are -0.25 (clamped), 0.25, 0.75, 1.25 (clamped) on both axes.
  const std::vector<real> expected{0,   0.25, 0.75, 1,   0.5, 0.75, 1.25, 1.5,
                                   1.5, 1.75, 2.25, 2.5, 2,   2.25, 2.75, 3};
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(y.data()[i], expected[i], 1e-6);
  for (std::size_t oy = 0; oy < 4; ++oy)
    for (std::size_t ox = 0; ox < 4; ++ox) EXPECT_NEAR(at4(y, 0, 0, oy, ox), bilinear_at(x, 0, 0, oy, ox, 4, 4), 1e-6);
}

TEST(Upsample, MatchesPerPixelFormulaOnRandomSizes) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = std::size_t(rng.uniform_int(1, 6)), w = std::size_t(rng.uniform_int(1, 6));
    const auto oh = std::size_t(rng.uniform_int(1, 12)), ow = std::size_t(rng.uniform_int(1, 12));
    auto x = random_tensor(rng, {1, 2, h, w});
    Graph g;
    auto y = upsample_bilinear(g, x, int(oh), int(ow));
    ASSERT_EQ(y.shape(), (Shape{1, 2, oh, ow}));
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          EXPECT_NEAR(at4(y, 0, c, oy, ox), bilinear_at(x, 0, c, oy, ox, oh, ow), 1e-5);
        }
  }
}

TEST(Upsample, IsLinear) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto h = std::size_t(rng.uniform_int(1, 8)), w = std::size_t(rng.uniform_int(1, 8));
    const int oh = int(rng.uniform_int(1, 16)), ow = int(rng.uniform_int(1, 16));
    auto a = random_tensor(rng, {2, 3, h, w});
    auto b = random_tensor(rng, {2, 3, h, w});
    Graph g;
    auto lhs = upsample_bilinear(g, add(g, a, b), oh, ow);
    auto ua = upsample_bilinear(g, a, oh, ow);
    auto ub = upsample_bilinear(g, b, oh, ow);
    EXPECT_LT(max_abs_diff(lhs, add(g, ua, ub)), 1e-5);
  }
}

// concat_channels

TEST(Concat, Examples) {
  Rng rng(4);
  Graph g;
  auto a = random_tensor(rng, {2, 16, 3, 3});
  EXPECT_EQ(concat_channels(g, a, random_tensor(rng, {2, 16, 3, 3})).dim(1), 32u);
  EXPECT_TRUE(bit_equal(concat_channels(g, a, Tensor::zeros({2, 0, 3, 3})), a));
  EXPECT_THROW(concat_channels(g, a, Tensor::zeros({2, 1, 3, 4})), ShapeError);
}

TEST(Concat, SliceBackRecoversInputs) {
  Rng rng(6);
  auto a = random_tensor(rng, {2, 3, 4, 5});
  auto b = random_tensor(rng, {2, 2, 4, 5});
  Graph g;
  auto y = concat_channels(g, a, b);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 5; ++c)
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
          EXPECT_EQ(at4(y, n, c, i, j), c < 3 ? at4(a, n, c, i, j) : at4(b, n, c - 3, i, j));
        }
}

// softmax_cross_entropy

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  Graph g;
  LabelMap l{1, 2, 3, {0, 5, 18, 7, 3, 11}};
  EXPECT_NEAR(softmax_cross_entropy(g, Tensor::zeros({1, 19, 2, 3}), l).item(), std::log(19.0), 1e-6);
}

TEST(CrossEntropy, SaturatedCorrectPrediction) {
  Rng rng(1);
  auto labels = random_labels(rng, 2, 3, 3, 4);
  std::vector<real> v(2 * 4 * 9, 0);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t p = 0; p < 9; ++p) v[(n * 4 + labels.values[n * 9 + p]) * 9 + p] = 30;
  Graph g;
  EXPECT_LT(softmax_cross_entropy(g, Tensor::from({2, 4, 3, 3}, v), labels).item(), 1e-9);
}

TEST(CrossEntropy, BinaryClosedForm) {
  Graph g;
  auto loss = softmax_cross_entropy(g, Tensor::from({1, 2, 1, 1}, {1.0, 0.0}), LabelMap{1, 1, 1, {0}});
  EXPECT_NEAR(loss.item(), std::log1p(std::exp(-1.0)), 1e-6);
  EXPECT_NEAR(loss.item(), 0.31326, 1e-5);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHotOverPixels) {
  Rng rng(12);
  auto x = random_tensor(rng, {1, 3, 2, 2}, 1.0, true);
  auto labels = random_labels(rng, 1, 2, 2, 3);
  Graph g;
  backward(softmax_cross_entropy(g, x, labels), g);
  for (std::size_t p = 0; p < 4; ++p) {
    double z = 0;
    for (std::size_t c = 0; c < 3; ++c) z += std::exp(double(x.data()[c * 4 + p]));
    for (std::size_t c = 0; c < 3; ++c) {
      const double prob = std::exp(double(x.data()[c * 4 + p])) / z;
      EXPECT_NEAR(x.grad()[c * 4 + p], (prob - (labels.values[p] == c ? 1.0 : 0.0)) / 4.0, 1e-6);
    }
  }
}

TEST(CrossEntropy, Errors) {
  Graph g;
  EXPECT_THROW(softmax_cross_entropy(g, Tensor::zeros({1, 3, 1, 1}), LabelMap{1, 1, 1, {3}}), DataError);
  EXPECT_THROW(softmax_cross_entropy(g, Tensor::zeros({1, 3, 2, 1}), LabelMap{1, 1, 1, {0}}), ShapeError);
  EXPECT_THROW(Tensor::from({2}, {1, std::nanf("")}), NumericalError);
}

// backward / graph

TEST(Backward, SumGivesOnes) {
  Rng rng(1);
  auto x = random_tensor(rng, {3, 1, 2}, 1.0, true);
  Graph g;
  backward(sum(g, x), g);
  for (real v : x.grad()) EXPECT_EQ(v, 1);
}

TEST(Backward, UnusedParameterGetsZeroGradient) {
  auto x = Tensor::filled({2, 2}, 1, true);
  auto unused = Tensor::filled({3}, 7, true);
  Graph g;
  relu(g, unused);  // recorded, but off the loss path
  backward(sum(g, x), g);
  ASSERT_TRUE(unused.has_grad());
  for (real v : unused.grad()) EXPECT_EQ(v, 0);
}

TEST(Backward, GradientsAccumulateAcrossUses) {
  auto x = Tensor::from({2}, {1, 2}, true);
  Graph g;
  backward(sum(g, add(g, x, x)), g);
  EXPECT_EQ(x.grad()[0], 2);
  EXPECT_EQ(x.grad()[1], 2);
}

TEST(Backward, Errors) {
  auto x = Tensor::filled({2}, 1, true);
  Graph g;
  auto y = add(g, x, x);
  EXPECT_THROW(backward(y, g), GraphError);
  auto loss = sum(g, y);
  backward(loss, g);
  EXPECT_THROW(backward(loss, g), GraphError);
  EXPECT_THROW(sum(g, x), GraphError);
}

TEST(Backward, InferenceGraphRecordsNothing) {
  auto x = Tensor::filled({1, 1, 4, 4}, 1, true);
  Graph g = Graph::inference();
  auto y = relu(g, max_pool2d(g, x, 2));
  EXPECT_EQ(g.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Backward, DetachCutsTheGraph) {
  auto x = Tensor::filled({2}, 3, true);
  auto d = x.detach();
  EXPECT_FALSE(d.requires_grad());
  EXPECT_FALSE(d.same_storage(x));
  Graph g;
  auto y = Tensor::filled({2}, 1, true);
  backward(sum(g, add(g, d, y)), g);
  EXPECT_FALSE(x.has_grad());
}

TEST(Backward, DeterministicForwardAndBackward) {
  auto run = [] {
    Rng rng(77);
    auto x = random_tensor(rng, {2, 3, 8, 8}, 1.0, true);
    auto w = random_tensor(rng, {4, 3, 3, 3}, 0.3, true);
    auto b = random_tensor(rng, {4}, 0.1, true);
    auto labels = random_labels(rng, 2, 8, 8, 4);
    Graph g;
    auto h = relu(g, conv2d(g, x, w, b, 1, 1));
    auto up = upsample_bilinear(g, max_pool2d(g, h, 2), 8, 8);
    auto loss = softmax_cross_entropy(g, up, labels);
    backward(loss, g);
    std::vector<real> out{loss.item()};
    for (const auto* t : {&x, &w, &b}) out.insert(out.end(), t->grad().begin(), t->grad().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

// Shape algebra over randomized valid configurations.
TEST(ShapeAlgebra, ClosedFormsHold) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = std::size_t(rng.uniform_int(1, 2)), c = std::size_t(rng.uniform_int(1, 3));
    const auto k = std::size_t(rng.uniform_int(1, 3));
    const int stride = int(rng.uniform_int(1, 2)), pad = int(rng.uniform_int(0, 1));
    const auto ho = std::size_t(rng.uniform_int(1, 4)), wo = std::size_t(rng.uniform_int(1, 4));
    // Choose the input so (H + 2p - k) is a multiple of the stride.
    const long h = long((ho - 1) * stride + k) - 2 * pad, w = long((wo - 1) * stride + k) - 2 * pad;
    if (h < 1 || w < 1) continue;
    const auto cout = std::size_t(rng.uniform_int(1, 3));
    Graph g;
    auto y = conv2d(g, Tensor::zeros({n, c, std::size_t(h), std::size_t(w)}), Tensor::zeros({cout, c, k, k}),
                    Tensor::zeros({cout}), stride, pad);
    EXPECT_EQ(y.shape(), (Shape{n, cout, ho, wo}));

    const auto pk = std::size_t(rng.uniform_int(1, 3));
    auto p = max_pool2d(g, Tensor::zeros({n, c, ho * pk, wo * pk}), int(pk));
    EXPECT_EQ(p.shape(), (Shape{n, c, ho, wo}));

    const auto uh = std::size_t(rng.uniform_int(1, 9)), uw = std::size_t(rng.uniform_int(1, 9));
    EXPECT_EQ(upsample_bilinear(g, Tensor::zeros({n, c, ho, wo}), int(uh), int(uw)).shape(), (Shape{n, c, uh, uw}));

    const auto c2 = std::size_t(rng.uniform_int(0, 3));
    EXPECT_EQ(concat_channels(g, Tensor::zeros({n, c, ho, wo}), Tensor::zeros({n, c2, ho, wo})).shape(),
              (Shape{n, c + c2, ho, wo}));
  }
}

// Sgd

TEST(Sgd, PlainStep) {
  auto p = Tensor::from({1}, {1.0}, true);
  p.grad()[0] = 2.0;
  Sgd opt(0.1, 0.0);
  opt.step({p});
  EXPECT_NEAR(p.data()[0], 0.8, 1e-7);
}

TEST(Sgd, ZeroGradientLeavesParameters) {
  Rng rng(3);
  auto p = random_tensor(rng, {5}, 1.0, true);
  const auto before = values(p);
  zero_grads({p});
  Sgd opt(0.5, 0.9);
  opt.step({p});
  EXPECT_EQ(values(p), before);
}

TEST(Sgd, MomentumRecurrence) {
  const double lr = 0.1, g = 0.5;
  auto p = Tensor::from({1}, {2.0}, true);
  Sgd opt(lr, 0.9);
  p.grad()[0] = static_cast<real>(g);
  opt.step({p});
  EXPECT_NEAR(p.data()[0], 2.0 - lr * g, 1e-6);
  opt.step({p});
  EXPECT_NEAR(p.data()[0], 2.0 - lr * g - lr * 1.9 * g, 1e-6);
}

TEST(Sgd, Errors) {
  EXPECT_THROW(Sgd(0.0, 0.5), ConfigError);
  EXPECT_THROW(Sgd(0.1, 1.0), ConfigError);
  Sgd opt(0.1, 0.0);
  EXPECT_THROW(opt.step({Tensor::zeros({2}, true)}), GraphError);
}

TEST(ClipGradNorm, ScalesJointNormAcrossTensors) {
  // Joint norm of (3) and (4, 0) is 5.
  auto a = Tensor::from({1}, {0.0}, true);
  auto b = Tensor::from({2}, {0.0, 0.0}, true);
  a.grad()[0] = 3;
  b.grad()[0] = 4;
  EXPECT_NEAR(clip_grad_norm({a, b}, 1.0), 5.0, 1e-12);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-7);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-7);
  EXPECT_EQ(b.grad()[1], 0);
  EXPECT_NEAR(clip_grad_norm({a, b}, 1.0), 1.0, 1e-6);
}

TEST(ClipGradNorm, SmallGradientsAreUntouched) {
  Rng rng(8);
  auto p = random_tensor(rng, {10}, 1.0, true);
  for (auto& g : p.grad()) g = static_cast<real>(rng.normal(0.0, 0.1));
  const std::vector<real> before(p.grad().begin(), p.grad().end());
  clip_grad_norm({p, Tensor::zeros({3})}, 100.0);
  EXPECT_EQ(std::vector<real>(p.grad().begin(), p.grad().end()), before);
  EXPECT_THROW(clip_grad_norm({p}, 0.0), ConfigError);
}

// Finite differences, float build.

TEST(Gradcheck, EveryOpPassesInFloat) {
  const auto opts = default_gradcheck_options();
  EXPECT_DOUBLE_EQ(opts.eps, 1e-3);
  EXPECT_DOUBLE_EQ(opts.tolerance, 1e-2);
  const auto checks = run_gradient_suite(opts);
  std::vector<std::string> names;
  for (const auto& c : checks) {
    names.push_back(c.op);
    EXPECT_TRUE(c.pass) << c.op << " rel err " << c.worst_rel_error;
    EXPECT_LT(c.worst_rel_error, 1e-2) << c.op;
    EXPECT_GT(c.coordinates, 0u);
  }
  EXPECT_EQ(names, (std::vector<std::string>{"conv2d", "relu", "max_pool2d", "upsample_bilinear", "concat_channels",
                                             "softmax_cross_entropy", "add", "sum"}));
}

TEST(Gradcheck, CorruptedBackwardIsCaught) {
  auto opts = default_gradcheck_options();
  opts.corrupt_op = "upsample_bilinear";
  for (const auto& c : run_gradient_suite(opts)) EXPECT_EQ(c.pass, c.op != "upsample_bilinear") << c.op;
}
