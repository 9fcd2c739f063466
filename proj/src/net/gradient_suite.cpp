// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/net/gradient_suite.hpp"

#include <random>

#include "demc/net/demc_net.hpp"
#include "demc/net/pipeline.hpp"

namespace demc::net {

  namespace {

    using ad::OpKind;
    using ad::Shape;
    using D = double;

    Tensor<D> uniform(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
    {
      std::uniform_real_distribution<double> dist(lo, hi);
      Tensor<D> t(s);
      for (auto& v : t.data())
        v = dist(rng);
      return t;
    }

    // Scalar probe sum(node * R) with a fixed random R.
    NodeRef project(Graph<D>& g, NodeRef node, const Tensor<D>& weights)
    {
      return g.sum(g.mul(node, g.input(weights)));
    }

  } // namespace

  double checkOp(OpKind op, std::uint64_t seed, const ad::GraphOptions& graph)
  {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + std::uint64_t(op));
    auto dim = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const int c = dim(1, 4);
    const Shape s{dim(1, 2), c, 2 * dim(1, 4), 2 * dim(1, 4)};
    const bool positive = op == OpKind::Pow || op == OpKind::RelMse;

    ParameterSet<D> p;
    p.add("x", s) = uniform(s, rng, positive ? 0.1 : -1.0, 1.0);
    p.add("w3", {3, c, 3, 3}) = uniform({3, c, 3, 3}, rng);
    p.add("w4", {c, 3, 4, 4}) = uniform({c, 3, 4, 4}, rng);
    p.add("b", {3, 1, 1, 1}) = uniform({3, 1, 1, 1}, rng);
    p.add("gamma", {c, 1, 1, 1}) = uniform({c, 1, 1, 1}, rng, 0.5, 1.5);
    p.add("beta", {c, 1, 1, 1}) = uniform({c, 1, 1, 1}, rng);
    const Tensor<D> reference = uniform(s, rng, 0.0, 2.0);

    // Projection weights are drawn lazily per output shape but fixed across evaluations.
    std::map<std::string, Tensor<D>> weights;
    auto weightsFor = [&](const Shape& shape) -> const Tensor<D>& {
      auto [it, inserted] = weights.try_emplace(shape.str());
      if (inserted)
        it->second = uniform(shape, rng);
      return it->second;
    };
    auto projected = [&](Graph<D>& g, NodeRef node) { return project(g, node, weightsFor(g.value(node).shape())); };

    ad::LossBuilder build;
    std::string target = "x";
    switch (op)
    {
    case OpKind::Conv2d:
      build = [&](Graph<D>& g) {
        return projected(g, g.conv2d(g.parameter("x"), g.parameter("w3"), g.parameter("b"), 1, 1));
      };
      target = "w3";
      break;
    case OpKind::Deconv2d:
      build = [&](Graph<D>& g) {
        return projected(g, g.deconv2d(g.parameter("x"), g.parameter("w4"), g.parameter("b")));
      };
      break;
    case OpKind::MaxPool2:
      build = [&](Graph<D>& g) { return projected(g, g.maxPool2(g.parameter("x"))); };
      break;
    case OpKind::Relu:
      build = [&](Graph<D>& g) { return projected(g, g.relu(g.parameter("x"))); };
      break;
    case OpKind::BatchNorm:
      build = [&](Graph<D>& g) {
        return projected(g, g.batchNormTrain(g.parameter("x"), g.parameter("gamma"), g.parameter("beta"), nullptr));
      };
      break;
    case OpKind::Concat:
      build = [&](Graph<D>& g) {
        NodeRef x = g.parameter("x");
        return projected(g, g.concatChannels({x, g.scale(x, 2.0)}));
      };
      break;
    case OpKind::Slice:
      build = [&](Graph<D>& g) { return projected(g, g.sliceChannels(g.parameter("x"), c - 1, 1)); };
      break;
    case OpKind::Add:
      build = [&](Graph<D>& g) {
        NodeRef x = g.parameter("x");
        return projected(g, g.add(x, g.mul(x, x)));
      };
      break;
    case OpKind::Mul:
      build = [&](Graph<D>& g) {
        NodeRef x = g.parameter("x");
        return projected(g, g.mul(x, x));
      };
      break;
    case OpKind::Scale:
      build = [&](Graph<D>& g) { return projected(g, g.scale(g.parameter("x"), -1.7)); };
      break;
    case OpKind::Pow:
      build = [&](Graph<D>& g) { return projected(g, g.pow(g.parameter("x"), 2.2)); };
      break;
    case OpKind::Sum:
      build = [&](Graph<D>& g) {
        NodeRef x = g.parameter("x");
        return g.scale(g.sum(g.mul(x, x)), 0.5);
      };
      break;
    case OpKind::RelMse:
      build = [&](Graph<D>& g) { return g.relMse(g.parameter("x"), g.input(reference), kLossEps); };
      break;
    default:
      throw Error("operator " + std::string(ad::opName(op)) + " has no gradient check");
    }
    ad::GradCheckOptions options;
    options.probes = 20;
    options.step = 1e-6;
    options.seed = seed;
    options.graph = graph;
    return ad::gradCheck(p, target, build, options);
  }

  double checkEndToEnd(std::uint64_t seed, int probes, const ad::GraphOptions& graph)
  {
    DemcNet<D> net(makeSpec(Variant::DEMC, seed));
    std::mt19937_64 rng(seed ^ 0xe2e);
    const Tensor<D> color = uniform({1, 3, 32, 32}, rng, 0.0, 1.0);
    const Tensor<D> features = uniform({1, 12, 32, 32}, rng, -1.5, 1.5);
    const Tensor<D> reference = uniform({1, 3, 32, 32}, rng, 0.05, 1.0);

    // The identity skip init and zero biases put many ReLU inputs exactly on
    // the kink at 0, where central differences are one-sided. Jitter biases off it.
    auto& params = net.parameters();
    for (auto& [name, t] : params.tensors())
      if (name.ends_with(".bias") || name.ends_with(".beta"))
        t = uniform(t.shape(), rng, -0.05, 0.05);
    std::vector<std::string> names;
    for (const auto& [name, t] : params.tensors())
      names.push_back(name);
    std::vector<ad::GradProbe> list;
    for (int i = 0; i < probes; ++i)
    {
      const std::string& name = names[std::uniform_int_distribution<std::size_t>(0, names.size() - 1)(rng)];
      list.push_back({name, std::uniform_int_distribution<std::size_t>(0, params.at(name).size() - 1)(rng)});
    }

    ad::LossBuilder build = [&](Graph<D>& g) {
      const ForwardOutput out = net.build(g, g.input(color), g.input(features), Mode::Probe);
      return hdrLoss(g, out.output, g.input(reference));
    };
    ad::GradCheckOptions options;
    options.step = 1e-5;
    // Parameters feeding batch norm have an exactly zero gradient; their central
    // differences are pure roundoff of order 1e-11 at this loss scale.
    options.floor = 1e-6;
    options.graph = graph;
    return ad::gradCheck(params, list, build, options);
  }

  std::vector<GradSuiteEntry> runGradientSuite(const GradSuiteOptions& options)
  {
    std::vector<GradSuiteEntry> entries;
    for (OpKind op : ad::differentiableOps())
    {
      double worst = 0.0;
      for (int k = 0; k < options.seedsPerOp; ++k)
        worst = std::max(worst, checkOp(op, options.seed * 1000 + std::uint64_t(k), options.graph));
      entries.push_back({std::string(ad::opName(op)), worst, kOpThreshold});
    }
    entries.push_back({kEndToEndName, checkEndToEnd(options.seed, options.endToEndProbes, options.graph),
                       kModelThreshold});
    return entries;
  }

} // namespace demc::net
