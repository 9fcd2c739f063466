// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "demc/ad/grad_check.hpp"
#include "demc/ad/graph.hpp"
#include "test_support.hpp"

using namespace demc;
using namespace demc::ad;
using demc::testing::dot;
using demc::testing::naiveConv2d;
using demc::testing::randomTensor;

namespace {

  Tensor<float> vec(std::initializer_list<float> v)
  {
    return Tensor<float>({int(v.size()), 1, 1, 1}, std::vector<float>(v));
  }

  // sum(node * R) for a fixed random R: a generic scalar probe of any op.
  NodeRef project(Graph<double>& g, NodeRef node, std::uint64_t seed)
  {
    const Shape s = g.value(node).shape();
    return g.sum(g.mul(node, g.input(randomTensor<double>(s, seed))));
  }

  GradCheckOptions probes(int n)
  {
    GradCheckOptions o;
    o.probes = n;
    return o;
  }

  GradCheckOptions seeded(std::uint64_t seed)
  {
    GradCheckOptions o;
    o.probes = 10;
    o.step = 1e-6;
    o.seed = seed;
    return o;
  }

  GradCheckOptions stepped(double step)
  {
    GradCheckOptions o;
    o.step = step;
    return o;
  }

} // namespace

TEST(Conv2d, IdentityKernel)
{
  Graph<float> g;
  auto x = g.input(Tensor<float>({1, 1, 3, 3}, 1.0f));
  auto y = g.conv2d(x, g.input(Tensor<float>({1, 1, 1, 1}, 1.0f)), g.input(vec({0.0f})), 1, 0);
  EXPECT_TRUE(g.value(y).identical(g.value(x)));
}

TEST(Conv2d, OnesKernelSumsWindow)
{
  Graph<float> g;
  auto y = g.conv2d(g.input(Tensor<float>({1, 1, 3, 3}, 1.0f)), g.input(Tensor<float>({1, 1, 3, 3}, 1.0f)),
                    g.input(vec({0.0f})), 1, 0);
  ASSERT_EQ(g.value(y).shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(g.value(y)[0], 9.0f);
}

TEST(Conv2d, SamePaddedShape)
{
  Graph<float> g;
  auto y = g.conv2d(g.input(Tensor<float>({1, 15, 64, 64})), g.input(Tensor<float>({32, 15, 3, 3})),
                    g.input(Tensor<float>({32, 1, 1, 1})), 1, 1);
  EXPECT_EQ(g.value(y).shape(), (Shape{1, 32, 64, 64}));
}

TEST(Conv2d, RejectsChannelMismatchAndInexactSize)
{
  Graph<float> g;
  auto x = g.input(Tensor<float>({1, 3, 8, 8}));
  auto b = g.input(Tensor<float>({4, 1, 1, 1}));
  EXPECT_THROW(g.conv2d(x, g.input(Tensor<float>({4, 2, 3, 3})), b, 1, 1), ShapeError);
  EXPECT_THROW(g.conv2d(x, g.input(Tensor<float>({4, 3, 3, 3})), b, 2, 0), ShapeError);
  EXPECT_THROW(g.conv2d(x, g.input(Tensor<float>({4, 3, 2, 2})), b, 1, 0), ShapeError);
}

TEST(Conv2d, MatchesDirectConvolution)
{
  struct Case { int kernel, stride, pad, h, w; };
  for (Case c : {Case{3, 1, 1, 7, 9}, Case{1, 1, 0, 5, 4}, Case{3, 2, 1, 9, 7}, Case{4, 2, 1, 8, 6}, Case{5, 1, 2, 6, 6}})
  {
    auto x = randomTensor<double>({2, 3, c.h, c.w}, 1);
    auto w = randomTensor<double>({4, 3, c.kernel, c.kernel}, 2);
    auto b = randomTensor<double>({4, 1, 1, 1}, 3);
    Graph<double> g;
    auto y = g.conv2d(g.input(x), g.input(w), g.input(b), c.stride, c.pad);
    auto expected = naiveConv2d(x, w, &b, c.stride, c.pad);
    ASSERT_EQ(g.value(y).shape(), expected.shape());
    for (std::size_t i = 0; i < expected.size(); ++i)
      EXPECT_NEAR(g.value(y)[i], expected[i], 1e-12);
  }
}

TEST(Deconv2d, BilinearKernelPreservesConstantInterior)
{
  const float row[4] = {0.25f, 0.75f, 0.75f, 0.25f};
  Tensor<float> w({2, 2, 4, 4});
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        w.at(c, c, i, j) = row[i] * row[j];
  Graph<float> g;
  auto y = g.deconv2d(g.input(Tensor<float>({1, 2, 4, 4}, 3.5f)), g.input(w), g.input(vec({0.0f, 0.0f})));
  const auto& out = g.value(y);
  ASSERT_EQ(out.shape(), (Shape{1, 2, 8, 8}));
  for (int c = 0; c < 2; ++c)
    for (int yy = 1; yy < 7; ++yy)
      for (int xx = 1; xx < 7; ++xx)
        EXPECT_FLOAT_EQ(out.at(0, c, yy, xx), 3.5f);
}

TEST(Deconv2d, ShapeAndKernelContract)
{
  Graph<float> g;
  auto y = g.deconv2d(g.input(Tensor<float>({1, 512, 4, 4})), g.input(Tensor<float>({512, 256, 4, 4})),
                      g.input(Tensor<float>({256, 1, 1, 1})));
  EXPECT_EQ(g.value(y).shape(), (Shape{1, 256, 8, 8}));
  EXPECT_THROW(g.deconv2d(g.input(Tensor<float>({1, 2, 4, 4})), g.input(Tensor<float>({2, 2, 3, 3})),
                          g.input(Tensor<float>({2, 1, 1, 1}))),
               ShapeError);
}

TEST(Deconv2d, AdjointOfConv2d)
{
  for (std::uint64_t seed = 0; seed < 10; ++seed)
  {
    auto w = randomTensor<double>({3, 5, 4, 4}, seed * 3 + 1);
    auto x = randomTensor<double>({2, 5, 8, 6}, seed * 3 + 2);
    auto y = randomTensor<double>({2, 3, 4, 3}, seed * 3 + 3);
    Graph<double> g;
    auto conv = g.conv2d(g.input(x), g.input(w), g.input(Tensor<double>({3, 1, 1, 1})), 2, 1);
    auto deconv = g.deconv2d(g.input(y), g.input(w), g.input(Tensor<double>({5, 1, 1, 1})));
    const double lhs = dot(g.value(conv), y);
    const double rhs = dot(x, g.value(deconv));
    EXPECT_NEAR(lhs, rhs, 1e-5 * std::max(std::abs(lhs), 1.0));
  }
}

TEST(MaxPool2, PicksWindowMaximum)
{
  Graph<float> g;
  auto y = g.maxPool2(g.input(Tensor<float>({1, 1, 2, 2}, {1, 2, 3, 4})));
  EXPECT_EQ(g.value(y)[0], 4.0f);
  auto big = g.maxPool2(g.input(Tensor<float>({1, 3, 128, 128})));
  EXPECT_EQ(g.value(big).shape(), (Shape{1, 3, 64, 64}));
  EXPECT_THROW(g.maxPool2(g.input(Tensor<float>({1, 1, 3, 4}))), ShapeError);
}

TEST(MaxPool2, TiesRouteToFirstElement)
{
  ParameterSet<double> p;
  p.add("x", {1, 1, 4, 4}) = Tensor<double>({1, 1, 4, 4}, 2.0);
  Graph<double> g(&p);
  auto y = g.maxPool2(g.parameter("x"));
  for (std::size_t i = 0; i < g.value(y).size(); ++i)
    EXPECT_EQ(g.value(y)[i], 2.0);
  auto grad = g.backward(g.sum(y)).at("x");
  for (int yy = 0; yy < 4; ++yy)
    for (int xx = 0; xx < 4; ++xx)
      EXPECT_EQ(grad.at(0, 0, yy, xx), (yy % 2 == 0 && xx % 2 == 0) ? 1.0 : 0.0);
}

TEST(MaxPool2, BackwardConservesGradientMass)
{
  for (std::uint64_t seed = 0; seed < 20; ++seed)
  {
    ParameterSet<double> p;
    p.add("x", {2, 3, 6, 8}) = randomTensor<double>({2, 3, 6, 8}, seed);
    Graph<double> g(&p);
    auto y = g.maxPool2(g.parameter("x"));
    auto r = randomTensor<double>(g.value(y).shape(), seed + 100);
    auto grad = g.backward(g.sum(g.mul(y, g.input(r)))).at("x");
    double in = 0, out = 0;
    for (double v : r.data()) in += v;
    for (double v : grad.data()) out += v;
    EXPECT_NEAR(in, out, 1e-12);
  }
}

TEST(Relu, ValuesGradientsAndIdempotence)
{
  ParameterSet<double> p;
  p.add("x", {1, 1, 1, 4}) = Tensor<double>({1, 1, 1, 4}, {-1.0, 2.0, 3.0, -3.0});
  Graph<double> g(&p);
  auto y = g.relu(g.parameter("x"));
  EXPECT_EQ(g.value(y)[0], 0.0);
  EXPECT_EQ(g.value(y)[1], 2.0);
  auto grad = g.backward(g.sum(y)).at("x");
  EXPECT_EQ(grad[2], 1.0);
  EXPECT_EQ(grad[3], 0.0);

  Graph<float> h;
  auto x = h.input(randomTensor<float>({1, 2, 5, 5}, 9));
  auto once = h.relu(x);
  EXPECT_TRUE(h.value(h.relu(once)).identical(h.value(once)));
}

TEST(BatchNorm, ConstantInputNormalizesToZero)
{
  Graph<float> g;
  auto y = g.batchNormTrain(g.input(Tensor<float>({2, 3, 4, 4}, 7.0f)), g.input(Tensor<float>({3, 1, 1, 1}, 1.0f)),
                            g.input(Tensor<float>({3, 1, 1, 1})), nullptr);
  for (float v : g.value(y).data())
    EXPECT_EQ(v, 0.0f);
}

TEST(BatchNorm, TrainModeStatistics)
{
  auto x = randomTensor<double>({2, 3, 5, 4}, 4, -3.0, 5.0);
  Graph<double> g;
  auto y = g.batchNormTrain(g.input(x), g.input(Tensor<double>({3, 1, 1, 1}, 1.0)),
                            g.input(Tensor<double>({3, 1, 1, 1})), nullptr);
  const auto& out = g.value(y);
  for (int c = 0; c < 3; ++c)
  {
    double mean = 0, sq = 0;
    int count = 0;
    for (int n = 0; n < 2; ++n)
      for (int yy = 0; yy < 5; ++yy)
        for (int xx = 0; xx < 4; ++xx, ++count)
          mean += out.at(n, c, yy, xx);
    mean /= count;
    for (int n = 0; n < 2; ++n)
      for (int yy = 0; yy < 5; ++yy)
        for (int xx = 0; xx < 4; ++xx)
          sq += (out.at(n, c, yy, xx) - mean) * (out.at(n, c, yy, xx) - mean);
    EXPECT_NEAR(mean, 0.0, 1e-5);
    EXPECT_NEAR(sq / count, 1.0, 1e-5);
  }
}

TEST(BatchNorm, AffineLaw)
{
  auto x = randomTensor<double>({1, 1, 8, 8}, 5);
  Graph<double> g;
  auto gamma = g.input(Tensor<double>({1, 1, 1, 1}, 1.0));
  auto beta = g.input(Tensor<double>({1, 1, 1, 1}, 0.0));
  auto normalized = g.batchNormTrain(g.input(x), gamma, beta, nullptr);
  auto y = g.batchNormTrain(normalized, g.input(Tensor<double>({1, 1, 1, 1}, 2.0)),
                            g.input(Tensor<double>({1, 1, 1, 1}, 5.0)), nullptr);
  double mean = 0, sq = 0;
  for (double v : g.value(y).data()) mean += v;
  mean /= 64;
  for (double v : g.value(y).data()) sq += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 5.0, 1e-5);
  EXPECT_NEAR(std::sqrt(sq / 64), 2.0, 1e-4);
}

TEST(BatchNorm, RunningStatisticsAndInferMode)
{
  BatchNormStats<double> stats(1);
  Graph<double> g;
  auto gamma = g.input(Tensor<double>({1, 1, 1, 1}, 1.0));
  auto beta = g.input(Tensor<double>({1, 1, 1, 1}, 0.0));
  auto x = g.input(Tensor<double>({1, 1, 1, 4}, {1.0, 2.0, 3.0, 4.0}));
  // fresh statistics (mean 0, variance 1) are usable as-is
  EXPECT_NEAR(g.value(g.batchNormInfer(x, gamma, beta, stats))[3], 4.0 / std::sqrt(1.0 + 1e-5), 1e-12);
  g.batchNormTrain(x, gamma, beta, &stats);
  EXPECT_EQ(stats.tracked, 1);
  EXPECT_NEAR(stats.mean[0], 0.1 * 2.5, 1e-12);
  // unbiased batch variance is 5/3
  EXPECT_NEAR(stats.var[0], 0.9 + 0.1 * (5.0 / 3.0), 1e-12);
  auto y = g.batchNormInfer(x, gamma, beta, stats);
  EXPECT_NEAR(g.value(y)[0], (1.0 - stats.mean[0]) / std::sqrt(stats.var[0] + 1e-5), 1e-12);
  EXPECT_THROW(g.batchNormTrain(g.input(Tensor<double>({1, 1, 1, 1})), gamma, beta, nullptr), ShapeError);
}

TEST(Concat, StacksAndSlicesBack)
{
  Graph<float> g;
  auto a = g.input(randomTensor<float>({1, 32, 8, 8}, 1));
  auto b = g.input(randomTensor<float>({1, 32, 8, 8}, 2));
  auto c = g.input(randomTensor<float>({1, 32, 8, 8}, 3));
  auto cat = g.concatChannels({a, b, c});
  EXPECT_EQ(g.value(cat).shape(), (Shape{1, 96, 8, 8}));
  EXPECT_TRUE(g.value(g.sliceChannels(cat, 32, 32)).identical(g.value(b)));
  EXPECT_TRUE(g.value(g.sliceChannels(cat, 64, 32)).identical(g.value(c)));
  EXPECT_TRUE(g.value(g.concatChannels({a})).identical(g.value(a)));
  EXPECT_THROW(g.concatChannels({a, g.input(Tensor<float>({1, 2, 4, 8}))}), ShapeError);
}

TEST(Backward, HalfSumOfSquaresGivesInput)
{
  ParameterSet<double> p;
  auto x = randomTensor<double>({2, 2, 3, 3}, 11);
  p.add("x", x.shape()) = x;
  Graph<double> g(&p);
  auto xn = g.parameter("x");
  auto grad = g.backward(g.scale(g.sum(g.mul(xn, xn)), 0.5)).at("x");
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_DOUBLE_EQ(grad[i], x[i]);
}

TEST(Backward, SumOfReluGivesIndicator)
{
  ParameterSet<double> p;
  auto x = randomTensor<double>({1, 3, 4, 4}, 12);
  p.add("x", x.shape()) = x;
  Graph<double> g(&p);
  auto grad = g.backward(g.sum(g.relu(g.parameter("x")))).at("x");
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_EQ(grad[i], x[i] > 0 ? 1.0 : 0.0);
}

TEST(Backward, RejectsNonScalarLossAndZeroesUnreachable)
{
  ParameterSet<double> p;
  p.add("used", {1, 1, 2, 2}) = randomTensor<double>({1, 1, 2, 2}, 1);
  p.add("unused", {3, 1, 1, 1}) = randomTensor<double>({3, 1, 1, 1}, 2);
  Graph<double> g(&p);
  auto used = g.parameter("used");
  EXPECT_THROW(g.backward(used), ShapeError);
  auto grads = g.backward(g.sum(used));
  ASSERT_TRUE(grads.contains("unused"));
  for (double v : grads.at("unused").data())
    EXPECT_EQ(v, 0.0);
}

TEST(Backward, ComposedGraphMatchesFiniteDifferences)
{
  ParameterSet<double> p;
  p.add("w", {4, 2, 3, 3}) = randomTensor<double>({4, 2, 3, 3}, 21);
  p.add("b", {4, 1, 1, 1}) = randomTensor<double>({4, 1, 1, 1}, 22);
  auto x = randomTensor<double>({2, 2, 8, 8}, 23);
  LossBuilder build = [&](Graph<double>& g) {
    auto y = g.conv2d(g.input(x), g.parameter("w"), g.parameter("b"), 1, 1);
    return project(g, g.maxPool2(g.relu(y)), 24);
  };
  EXPECT_LT(gradCheck(p, "w", build, probes(30)), 1e-4);
  EXPECT_LT(gradCheck(p, "b", build, probes(4)), 1e-4);
}

TEST(GradCheck, ConvDeconvBatchNormExamples)
{
  ParameterSet<double> p;
  p.add("w", {3, 2, 3, 3}) = randomTensor<double>({3, 2, 3, 3}, 31);
  p.add("b", {3, 1, 1, 1}) = randomTensor<double>({3, 1, 1, 1}, 32);
  p.add("dw", {3, 2, 4, 4}) = randomTensor<double>({3, 2, 4, 4}, 33);
  p.add("db", {2, 1, 1, 1}) = randomTensor<double>({2, 1, 1, 1}, 34);
  p.add("gamma", {2, 1, 1, 1}) = randomTensor<double>({2, 1, 1, 1}, 35, 0.5, 1.5);
  p.add("beta", {2, 1, 1, 1}) = randomTensor<double>({2, 1, 1, 1}, 36);
  p.add("x", {2, 2, 6, 6}) = randomTensor<double>({2, 2, 6, 6}, 37);

  LossBuilder conv = [&](Graph<double>& g) {
    return project(g, g.conv2d(g.parameter("x"), g.parameter("w"), g.parameter("b"), 1, 1), 40);
  };
  EXPECT_LT(gradCheck(p, "w", conv, probes(20)), 1e-4);

  LossBuilder bn = [&](Graph<double>& g) {
    return project(g, g.batchNormTrain(g.parameter("x"), g.parameter("gamma"), g.parameter("beta"), nullptr), 41);
  };
  EXPECT_LT(gradCheck(p, "x", bn, probes(20)), 1e-4);
  EXPECT_LT(gradCheck(p, "gamma", bn, probes(2)), 1e-4);

  LossBuilder deconv = [&](Graph<double>& g) {
    auto y = g.deconv2d(g.conv2d(g.parameter("x"), g.parameter("w"), g.parameter("b"), 1, 1), g.parameter("dw"),
                        g.parameter("db"));
    return project(g, y, 42);
  };
  EXPECT_LT(gradCheck(p, "dw", deconv, probes(20)), 1e-4);
  EXPECT_LT(gradCheck(p, "x", deconv, probes(20)), 1e-4);
}

TEST(GradCheck, RejectsStepOutsideRange)
{
  ParameterSet<double> p;
  p.add("x", {1, 1, 1, 1});
  LossBuilder build = [](Graph<double>& g) { return g.sum(g.parameter("x")); };
  EXPECT_THROW(gradCheck(p, "x", build, stepped(1e-3)), Error);
}

// Every differentiable op, random small shapes, 100 seeds.
TEST(GradCheck, EveryOpOnRandomShapes)
{
  using Builder = std::function<NodeRef(Graph<double>&, Shape, std::uint64_t)>;
  struct OpCase { const char* name; Builder build; double lo; };
  const std::vector<OpCase> cases = {
    {"conv2d", [](Graph<double>& g, Shape, std::uint64_t seed) {
       auto w = g.parameter("w3");
       return project(g, g.conv2d(g.parameter("x"), w, g.parameter("b"), 1, 1), seed);
     }, -1.0},
    {"deconv2d", [](Graph<double>& g, Shape, std::uint64_t seed) {
       return project(g, g.deconv2d(g.parameter("x"), g.parameter("w4"), g.parameter("b")), seed);
     }, -1.0},
    {"maxpool2", [](Graph<double>& g, Shape, std::uint64_t seed) {
       return project(g, g.maxPool2(g.parameter("x")), seed);
     }, -1.0},
    {"relu", [](Graph<double>& g, Shape, std::uint64_t seed) {
       return project(g, g.relu(g.parameter("x")), seed);
     }, -1.0},
    {"batch_norm", [](Graph<double>& g, Shape, std::uint64_t seed) {
       return project(g, g.batchNormTrain(g.parameter("x"), g.parameter("gamma"), g.parameter("beta"), nullptr), seed);
     }, -1.0},
    {"concat_channels", [](Graph<double>& g, Shape, std::uint64_t seed) {
       auto x = g.parameter("x");
       return project(g, g.concatChannels({x, g.relu(x), x}), seed);
     }, -1.0},
    {"slice_channels", [](Graph<double>& g, Shape, std::uint64_t seed) {
       return project(g, g.sliceChannels(g.parameter("x"), 0, 1), seed);
     }, -1.0},
    {"add", [](Graph<double>& g, Shape, std::uint64_t seed) {
       auto x = g.parameter("x");
       return project(g, g.add(x, g.relu(x)), seed);
     }, -1.0},
    {"mul", [](Graph<double>& g, Shape, std::uint64_t seed) {
       auto x = g.parameter("x");
       return project(g, g.mul(x, x), seed);
     }, -1.0},
    {"scale", [](Graph<double>& g, Shape, std::uint64_t seed) {
       return project(g, g.scale(g.parameter("x"), -1.7), seed);
     }, -1.0},
    {"pow", [](Graph<double>& g, Shape, std::uint64_t seed) {
       return project(g, g.pow(g.parameter("x"), 2.2), seed);
     }, 0.1},
    {"sum", [](Graph<double>& g, Shape, std::uint64_t) {
       return g.sum(g.mul(g.parameter("x"), g.parameter("x")));
     }, -1.0},
    {"relmse", [](Graph<double>& g, Shape s, std::uint64_t seed) {
       return g.relMse(g.parameter("x"), g.input(randomTensor<double>(s, seed, 0.0, 2.0)), 1e-3);
     }, 0.0},
  };
  ASSERT_EQ(cases.size(), differentiableOps().size());

  for (const auto& op : cases)
  {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
    {
      std::mt19937_64 rng(seed);
      auto dim = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
      const int c = dim(1, 4);
      Shape s{dim(1, 2), c, 2 * dim(1, 4), 2 * dim(1, 4)};
      if (std::string(op.name) == "batch_norm" && s.n * s.h * s.w < 2)
        s.h = 2;
      ParameterSet<double> p;
      p.add("x", s) = randomTensor<double>(s, seed + 1000, op.lo, 1.0);
      p.add("w3", {3, c, 3, 3}) = randomTensor<double>({3, c, 3, 3}, seed + 2000);
      p.add("w4", {c, 3, 4, 4}) = randomTensor<double>({c, 3, 4, 4}, seed + 3000);
      p.add("b", {3, 1, 1, 1}) = randomTensor<double>({3, 1, 1, 1}, seed + 4000);
      p.add("gamma", {c, 1, 1, 1}) = randomTensor<double>({c, 1, 1, 1}, seed + 5000, 0.5, 1.5);
      p.add("beta", {c, 1, 1, 1}) = randomTensor<double>({c, 1, 1, 1}, seed + 6000);
      LossBuilder build = [&](Graph<double>& g) { return op.build(g, s, seed + 7000); };
      worst = std::max(worst, gradCheck(p, "x", build, seeded(seed)));
    }
    EXPECT_LE(worst, 1e-4) << op.name;
  }
}

TEST(Purity, OpsNeverMutateInputs)
{
  auto x = randomTensor<float>({1, 4, 8, 8}, 50);
  auto w = randomTensor<float>({4, 4, 3, 3}, 51);
  const auto xCopy = x;
  const auto wCopy = w;
  Graph<float> g;
  auto xn = g.input(x);
  auto y = g.conv2d(xn, g.input(w), g.input(Tensor<float>({4, 1, 1, 1})), 1, 1);
  g.maxPool2(g.relu(y));
  EXPECT_TRUE(g.value(xn).identical(xCopy));
  EXPECT_TRUE(x.identical(xCopy));
  EXPECT_TRUE(w.identical(wCopy));
}

TEST(Numerics, NonFiniteResultIsReported)
{
  Graph<float> g;
  auto x = g.input(Tensor<float>({1, 1, 1, 1}, 1e30f));
  EXPECT_THROW(g.mul(x, x), NumericError);
}
