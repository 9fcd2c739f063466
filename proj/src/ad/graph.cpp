// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/ad/graph.hpp"

#include <array>
#include <cmath>

#include "ad/kernels.hpp"
#include "demc/ad/losses.hpp"

namespace demc::ad {

  namespace {

    constexpr std::array kDifferentiable = {
      OpKind::Conv2d, OpKind::Deconv2d, OpKind::MaxPool2, OpKind::Relu,
      OpKind::BatchNorm, OpKind::Concat, OpKind::Slice, OpKind::Add,
      OpKind::Mul, OpKind::Scale, OpKind::Pow, OpKind::Sum, OpKind::RelMse,
    };

    template<typename T>
    void requireSameShape(const char* op, const Tensor<T>& a, const Tensor<T>& b)
    {
      if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": operand shapes " + a.shape().str() + " and " + b.shape().str() +
                         " differ");
    }

    template<typename T>
    void requireVector(const char* op, const char* what, const Tensor<T>& v, int channels)
    {
      const Shape expected{channels, 1, 1, 1};
      if (v.shape() != expected)
        throw ShapeError(std::string(op) + ": " + what + " has shape " + v.shape().str() + ", expected " +
                         expected.str());
    }

  } // namespace

  std::string_view opName(OpKind kind)
  {
    switch (kind)
    {
    case OpKind::Input:     return "input";
    case OpKind::Parameter: return "parameter";
    case OpKind::Conv2d:    return "conv2d";
    case OpKind::Deconv2d:  return "deconv2d";
    case OpKind::MaxPool2:  return "maxpool2";
    case OpKind::Relu:      return "relu";
    case OpKind::BatchNorm: return "batch_norm";
    case OpKind::Concat:    return "concat_channels";
    case OpKind::Slice:     return "slice_channels";
    case OpKind::Add:       return "add";
    case OpKind::Mul:       return "mul";
    case OpKind::Scale:     return "scale";
    case OpKind::Pow:       return "pow";
    case OpKind::Sum:       return "sum";
    case OpKind::RelMse:    return "relmse";
    }
    return "unknown";
  }

  std::span<const OpKind> differentiableOps()
  {
    return kDifferentiable;
  }

  template<typename T>
  Graph<T>::Graph(const ParameterSet<T>* params, GraphOptions options)
    : params_(params), options_(options) {}

  template<typename T>
  NodeRef Graph<T>::push(Node n)
  {
    if (!n.external && !n.value.allFinite())
      throw NumericError(std::string(opName(n.kind)) + ": produced a non-finite value");
    n.requiresGrad = n.requiresGrad || anyRequiresGrad(n.inputs);
    nodes_.push_back(std::move(n));
    return {std::uint32_t(nodes_.size() - 1)};
  }

  template<typename T>
  const typename Graph<T>::Node& Graph<T>::node(NodeRef ref) const
  {
    if (ref.index >= nodes_.size())
      throw Error("graph: node " + std::to_string(ref.index) + " does not exist");
    return nodes_[ref.index];
  }

  template<typename T>
  bool Graph<T>::anyRequiresGrad(std::span<const std::uint32_t> inputs) const
  {
    for (std::uint32_t i : inputs)
      if (nodes_[i].requiresGrad)
        return true;
    return false;
  }

  template<typename T>
  void Graph<T>::accumulate(std::uint32_t index, Tensor<T>&& contribution)
  {
    Node& n = nodes_[index];
    if (contribution.shape() != n.out().shape())
      throw ShapeError("graph: gradient " + contribution.shape().str() + " does not match value " +
                       n.out().shape().str() + " of " + std::string(opName(n.kind)));
    if (n.grad.shape() != contribution.shape())
    {
      n.grad = std::move(contribution);
      return;
    }
    T* g = n.grad.ptr();
    const T* c = contribution.ptr();
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      g[i] += c[i];
  }

  template<typename T>
  const Tensor<T>& Graph<T>::value(NodeRef ref) const
  {
    return node(ref).out();
  }

  template<typename T>
  OpKind Graph<T>::kind(NodeRef ref) const
  {
    return node(ref).kind;
  }

  template<typename T>
  const Tensor<T>& Graph<T>::gradient(NodeRef ref) const
  {
    return node(ref).grad;
  }

  template<typename T>
  NodeRef Graph<T>::input(Tensor<T> value)
  {
    Node n;
    n.kind = OpKind::Input;
    n.value = std::move(value);
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::parameter(const std::string& name)
  {
    if (!params_)
      throw Error("graph: no parameter set bound; cannot reference '" + name + "'");
    Node n;
    n.kind = OpKind::Parameter;
    n.external = &params_->at(name);
    n.requiresGrad = true;
    n.name = name;
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::conv2d(NodeRef x, NodeRef weight, NodeRef bias, int stride, int pad)
  {
    const Tensor<T>& w = value(weight);
    requireVector("conv2d", "bias", value(bias), w.shape().n);
    Node n;
    n.kind = OpKind::Conv2d;
    n.inputs = {x.index, weight.index, bias.index};
    n.value = kernels::conv2dForward(value(x), w, &value(bias), stride, pad);
    n.backward = [stride, pad](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      const auto in = nd.inputs;
      const Tensor<T>& dy = nd.grad;
      if (g.needsGrad(in[0]))
        g.accumulate(in[0], kernels::conv2dBackwardData(dy, g.val(in[1]), g.val(in[0]).shape(), stride, pad));
      if (g.needsGrad(in[1]))
        g.accumulate(in[1], kernels::conv2dBackwardWeight(dy, g.val(in[0]), g.val(in[1]).shape(), stride, pad));
      if (g.needsGrad(in[2]))
        g.accumulate(in[2], kernels::channelSum(dy));
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::deconv2d(NodeRef x, NodeRef weight, NodeRef bias)
  {
    const Tensor<T>& xv = value(x);
    const Tensor<T>& w = value(weight);
    const Shape& ws = w.shape();
    if (ws.h != 4 || ws.w != 4)
      throw ShapeError("deconv2d: kernel must be 4x4, got " + std::to_string(ws.h) + "x" + std::to_string(ws.w));
    if (ws.n != xv.shape().c)
      throw ShapeError("deconv2d: input has " + std::to_string(xv.shape().c) + " channels but weight " + ws.str() +
                       " expects " + std::to_string(ws.n));
    requireVector("deconv2d", "bias", value(bias), ws.c);
    const Shape outShape{xv.shape().n, ws.c, 2 * xv.shape().h, 2 * xv.shape().w};

    Node n;
    n.kind = OpKind::Deconv2d;
    n.inputs = {x.index, weight.index, bias.index};
    n.value = kernels::conv2dBackwardData(xv, w, outShape, 2, 1);
    kernels::addChannelBias(n.value, value(bias));
    n.backward = [](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      const auto in = nd.inputs;
      const Tensor<T>& dy = nd.grad;
      if (g.needsGrad(in[0]))
        g.accumulate(in[0], kernels::conv2dForward(dy, g.val(in[1]), static_cast<const Tensor<T>*>(nullptr), 2, 1));
      if (g.needsGrad(in[1]))
        g.accumulate(in[1], kernels::conv2dBackwardWeight(g.val(in[0]), dy, g.val(in[1]).shape(), 2, 1));
      if (g.needsGrad(in[2]))
        g.accumulate(in[2], kernels::channelSum(dy));
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::maxPool2(NodeRef x)
  {
    std::vector<std::uint32_t> argmax;
    Node n;
    n.kind = OpKind::MaxPool2;
    n.inputs = {x.index};
    n.value = kernels::maxPool2Forward(value(x), argmax);
    n.backward = [argmax = std::move(argmax)](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      const std::uint32_t in = nd.inputs[0];
      if (g.needsGrad(in))
        g.accumulate(in, kernels::maxPool2Backward(nd.grad, g.val(in).shape(), argmax));
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::relu(NodeRef x)
  {
    const Tensor<T>& xv = value(x);
    Tensor<T> y(xv.shape());
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = xv[i] > T(0) ? xv[i] : T(0);
    Node n;
    n.kind = OpKind::Relu;
    n.inputs = {x.index};
    n.value = std::move(y);
    n.backward = [](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      const std::uint32_t in = nd.inputs[0];
      if (!g.needsGrad(in))
        return;
      const Tensor<T>& xv = g.val(in);
      Tensor<T> dx(xv.shape());
      for (std::size_t i = 0; i < dx.size(); ++i)
        dx[i] = xv[i] > T(0) ? nd.grad[i] : T(0);
      g.accumulate(in, std::move(dx));
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::batchNormTrain(NodeRef x, NodeRef gamma, NodeRef beta, BatchNormStats<T>* stats,
                                   double momentum, double eps)
  {
    const Tensor<T>& xv = value(x);
    const Shape& s = xv.shape();
    requireVector("batch_norm", "gamma", value(gamma), s.c);
    requireVector("batch_norm", "beta", value(beta), s.c);
    const std::size_t count = std::size_t(s.n) * s.planeSize();
    if (count < 2)
      throw ShapeError("batch_norm: training mode needs at least 2 values per channel, got " + std::to_string(count));
    if (stats && (stats->mean.size() != std::size_t(s.c) || stats->var.size() != std::size_t(s.c)))
      throw ShapeError("batch_norm: running statistics do not match " + std::to_string(s.c) + " channels");

    const Tensor<T>& gv = value(gamma);
    const Tensor<T>& bv = value(beta);
    const std::size_t plane = s.planeSize();
    Tensor<T> xhat(s);
    Tensor<T> y(s);
    std::vector<double> invStd(s.c);
    for (int c = 0; c < s.c; ++c)
    {
      double mean = 0.0;
      for (int b = 0; b < s.n; ++b)
      {
        const T* p = xv.plane(b, c);
        for (std::size_t i = 0; i < plane; ++i)
          mean += p[i];
      }
      mean /= double(count);
      double var = 0.0;
      for (int b = 0; b < s.n; ++b)
      {
        const T* p = xv.plane(b, c);
        for (std::size_t i = 0; i < plane; ++i)
        {
          const double d = p[i] - mean;
          var += d * d;
        }
      }
      var /= double(count);
      invStd[c] = 1.0 / std::sqrt(var + eps);
      for (int b = 0; b < s.n; ++b)
      {
        const T* p = xv.plane(b, c);
        T* xh = xhat.plane(b, c);
        T* out = y.plane(b, c);
        for (std::size_t i = 0; i < plane; ++i)
        {
          xh[i] = T((p[i] - mean) * invStd[c]);
          out[i] = gv[c] * xh[i] + bv[c];
        }
      }
      if (stats)
      {
        const double unbiased = var * double(count) / double(count - 1);
        stats->mean[c] = T((1.0 - momentum) * stats->mean[c] + momentum * mean);
        stats->var[c] = T((1.0 - momentum) * stats->var[c] + momentum * unbiased);
      }
    }
    if (stats)
      ++stats->tracked;

    Node n;
    n.kind = OpKind::BatchNorm;
    n.inputs = {x.index, gamma.index, beta.index};
    n.value = std::move(y);
    n.backward = [xhat = std::move(xhat), invStd = std::move(invStd)](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      const auto in = nd.inputs;
      const Tensor<T>& dy = nd.grad;
      const Shape& s = dy.shape();
      const std::size_t plane = s.planeSize();
      const double count = double(s.n) * double(plane);
      const Tensor<T>& gv = g.val(in[1]);
      Tensor<T> dx(s);
      Tensor<T> dgamma({s.c, 1, 1, 1});
      Tensor<T> dbeta({s.c, 1, 1, 1});
      for (int c = 0; c < s.c; ++c)
      {
        double sumDy = 0.0;
        double sumDyXhat = 0.0;
        for (int b = 0; b < s.n; ++b)
        {
          const T* d = dy.plane(b, c);
          const T* xh = xhat.plane(b, c);
          for (std::size_t i = 0; i < plane; ++i)
          {
            sumDy += d[i];
            sumDyXhat += double(d[i]) * xh[i];
          }
        }
        dgamma[c] = T(sumDyXhat);
        dbeta[c] = T(sumDy);
        const double k = double(gv[c]) * invStd[c] / count;
        for (int b = 0; b < s.n; ++b)
        {
          const T* d = dy.plane(b, c);
          const T* xh = xhat.plane(b, c);
          T* out = dx.plane(b, c);
          for (std::size_t i = 0; i < plane; ++i)
            out[i] = T(k * (count * d[i] - sumDy - xh[i] * sumDyXhat));
        }
      }
      if (g.needsGrad(in[0]))
        g.accumulate(in[0], std::move(dx));
      if (g.needsGrad(in[1]))
        g.accumulate(in[1], std::move(dgamma));
      if (g.needsGrad(in[2]))
        g.accumulate(in[2], std::move(dbeta));
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::batchNormInfer(NodeRef x, NodeRef gamma, NodeRef beta, const BatchNormStats<T>& stats, double eps)
  {
    const Tensor<T>& xv = value(x);
    const Shape& s = xv.shape();
    requireVector("batch_norm", "gamma", value(gamma), s.c);
    requireVector("batch_norm", "beta", value(beta), s.c);
    if (stats.mean.size() != std::size_t(s.c) || stats.var.size() != std::size_t(s.c))
      throw ShapeError("batch_norm: running statistics do not match " + std::to_string(s.c) + " channels");

    const Tensor<T>& gv = value(gamma);
    const Tensor<T>& bv = value(beta);
    const std::size_t plane = s.planeSize();
    Tensor<T> xhat(s);
    Tensor<T> y(s);
    std::vector<double> invStd(s.c);
    for (int c = 0; c < s.c; ++c)
    {
      invStd[c] = 1.0 / std::sqrt(double(stats.var[c]) + eps);
      const double mean = stats.mean[c];
      for (int b = 0; b < s.n; ++b)
      {
        const T* p = xv.plane(b, c);
        T* xh = xhat.plane(b, c);
        T* out = y.plane(b, c);
        for (std::size_t i = 0; i < plane; ++i)
        {
          xh[i] = T((p[i] - mean) * invStd[c]);
          out[i] = gv[c] * xh[i] + bv[c];
        }
      }
    }

    Node n;
    n.kind = OpKind::BatchNorm;
    n.inputs = {x.index, gamma.index, beta.index};
    n.value = std::move(y);
    n.backward = [xhat = std::move(xhat), invStd = std::move(invStd)](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      const auto in = nd.inputs;
      const Tensor<T>& dy = nd.grad;
      const Shape& s = dy.shape();
      const std::size_t plane = s.planeSize();
      const Tensor<T>& gv = g.val(in[1]);
      Tensor<T> dx(s);
      Tensor<T> dgamma({s.c, 1, 1, 1});
      Tensor<T> dbeta({s.c, 1, 1, 1});
      for (int c = 0; c < s.c; ++c)
      {
        double sumDy = 0.0;
        double sumDyXhat = 0.0;
        const double k = double(gv[c]) * invStd[c];
        for (int b = 0; b < s.n; ++b)
        {
          const T* d = dy.plane(b, c);
          const T* xh = xhat.plane(b, c);
          T* out = dx.plane(b, c);
          for (std::size_t i = 0; i < plane; ++i)
          {
            sumDy += d[i];
            sumDyXhat += double(d[i]) * xh[i];
            out[i] = T(k * d[i]);
          }
        }
        dgamma[c] = T(sumDyXhat);
        dbeta[c] = T(sumDy);
      }
      if (g.needsGrad(in[0]))
        g.accumulate(in[0], std::move(dx));
      if (g.needsGrad(in[1]))
        g.accumulate(in[1], std::move(dgamma));
      if (g.needsGrad(in[2]))
        g.accumulate(in[2], std::move(dbeta));
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::concatChannels(std::span<const NodeRef> inputs)
  {
    if (inputs.empty())
      throw ShapeError("concat_channels: needs at least one input");
    const Shape first = value(inputs.front()).shape();
    int channels = 0;
    for (NodeRef r : inputs)
    {
      const Shape& s = value(r).shape();
      if (s.n != first.n || s.h != first.h || s.w != first.w)
        throw ShapeError("concat_channels: input " + s.str() + " does not match " + first.str() +
                         " in batch or spatial size");
      channels += s.c;
    }
    Tensor<T> y({first.n, channels, first.h, first.w});
    const std::size_t plane = first.planeSize();
    Node n;
    n.kind = OpKind::Concat;
    int offset = 0;
    for (NodeRef r : inputs)
    {
      const Tensor<T>& v = value(r);
      for (int b = 0; b < first.n; ++b)
        std::copy_n(v.plane(b, 0), plane * v.shape().c, y.plane(b, offset));
      offset += v.shape().c;
      n.inputs.push_back(r.index);
    }
    n.value = std::move(y);
    n.backward = [](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      int offset = 0;
      for (std::uint32_t in : nd.inputs)
      {
        const int c = g.val(in).shape().c;
        if (g.needsGrad(in))
          g.accumulate(in, nd.grad.sliceChannels(offset, c));
        offset += c;
      }
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::sliceChannels(NodeRef x, int begin, int count)
  {
    Node n;
    n.kind = OpKind::Slice;
    n.inputs = {x.index};
    n.value = value(x).sliceChannels(begin, count);
    n.backward = [begin, count](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      const std::uint32_t in = nd.inputs[0];
      if (!g.needsGrad(in))
        return;
      const Shape& s = g.val(in).shape();
      Tensor<T> dx(s);
      const std::size_t plane = s.planeSize();
      for (int b = 0; b < s.n; ++b)
        std::copy_n(nd.grad.plane(b, 0), plane * count, dx.plane(b, begin));
      g.accumulate(in, std::move(dx));
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::add(NodeRef a, NodeRef b)
  {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    requireSameShape("add", av, bv);
    Tensor<T> y(av.shape());
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = av[i] + bv[i];
    Node n;
    n.kind = OpKind::Add;
    n.inputs = {a.index, b.index};
    n.value = std::move(y);
    n.backward = [](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      for (std::uint32_t in : nd.inputs)
        if (g.needsGrad(in))
          g.accumulate(in, Tensor<T>(nd.grad));
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::mul(NodeRef a, NodeRef b)
  {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    requireSameShape("mul", av, bv);
    Tensor<T> y(av.shape());
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = av[i] * bv[i];
    Node n;
    n.kind = OpKind::Mul;
    n.inputs = {a.index, b.index};
    n.value = std::move(y);
    n.backward = [](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      const auto in = nd.inputs;
      for (int k = 0; k < 2; ++k)
      {
        if (!g.needsGrad(in[k]))
          continue;
        const Tensor<T>& other = g.val(in[1 - k]);
        Tensor<T> d(other.shape());
        for (std::size_t i = 0; i < d.size(); ++i)
          d[i] = nd.grad[i] * other[i];
        g.accumulate(in[k], std::move(d));
      }
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::scale(NodeRef x, double factor)
  {
    const Tensor<T>& xv = value(x);
    Tensor<T> y(xv.shape());
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = T(xv[i] * factor);
    Node n;
    n.kind = OpKind::Scale;
    n.inputs = {x.index};
    n.value = std::move(y);
    n.backward = [factor](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      const std::uint32_t in = nd.inputs[0];
      if (!g.needsGrad(in))
        return;
      Tensor<T> d(nd.grad.shape());
      for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = T(nd.grad[i] * factor);
      g.accumulate(in, std::move(d));
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::pow(NodeRef x, double exponent)
  {
    const Tensor<T>& xv = value(x);
    Tensor<T> y(xv.shape());
    for (std::size_t i = 0; i < y.size(); ++i)
    {
      if (xv[i] < T(0))
        throw Error("pow: negative input " + std::to_string(double(xv[i])) + " at index " + std::to_string(i));
      y[i] = T(std::pow(xv[i], T(exponent)));
    }
    Node n;
    n.kind = OpKind::Pow;
    n.inputs = {x.index};
    n.value = std::move(y);
    n.backward = [exponent](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      const std::uint32_t in = nd.inputs[0];
      if (!g.needsGrad(in))
        return;
      const Tensor<T>& xv = g.val(in);
      Tensor<T> d(xv.shape());
      for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = xv[i] > T(0) ? T(nd.grad[i] * exponent * std::pow(xv[i], T(exponent - 1.0))) : T(0);
      g.accumulate(in, std::move(d));
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::sum(NodeRef x)
  {
    const Tensor<T>& xv = value(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i)
      acc += xv[i];
    Node n;
    n.kind = OpKind::Sum;
    n.inputs = {x.index};
    n.value = Tensor<T>({1, 1, 1, 1}, T(acc));
    n.backward = [](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      const std::uint32_t in = nd.inputs[0];
      if (g.needsGrad(in))
        g.accumulate(in, Tensor<T>(g.val(in).shape(), nd.grad[0]));
    };
    return push(std::move(n));
  }

  template<typename T>
  NodeRef Graph<T>::relMse(NodeRef pred, NodeRef ref, double eps)
  {
    const double loss = ad::relMse(value(pred), value(ref), eps);
    Node n;
    n.kind = OpKind::RelMse;
    n.inputs = {pred.index, ref.index};
    n.value = Tensor<T>({1, 1, 1, 1}, T(loss));
    n.backward = [eps](Graph& g, std::uint32_t self) {
      const Node& nd = g.nodes_[self];
      const auto in = nd.inputs;
      const Tensor<T>& p = g.val(in[0]);
      const Tensor<T>& r = g.val(in[1]);
      const Shape& s = p.shape();
      const double k = double(nd.grad[0]) / (double(s.n) * double(s.h) * double(s.w));
      if (g.needsGrad(in[0]))
      {
        Tensor<T> d(s);
        for (std::size_t i = 0; i < d.size(); ++i)
        {
          const double rv = r[i];
          d[i] = T(k * 2.0 * (double(p[i]) - rv) / (rv * rv + eps));
        }
        g.accumulate(in[0], std::move(d));
      }
      if (g.needsGrad(in[1]))
      {
        Tensor<T> d(s);
        for (std::size_t i = 0; i < d.size(); ++i)
        {
          const double rv = r[i];
          const double diff = rv - double(p[i]);
          const double den = rv * rv + eps;
          d[i] = T(k * (2.0 * diff * den - diff * diff * 2.0 * rv) / (den * den));
        }
        g.accumulate(in[1], std::move(d));
      }
    };
    return push(std::move(n));
  }

  template<typename T>
  GradientMap<T> Graph<T>::backward(NodeRef loss)
  {
    const Node& root = node(loss);
    if (root.out().shape() != Shape{1, 1, 1, 1})
      throw ShapeError("backward: loss must be a 1x1x1x1 scalar, got " + root.out().shape().str());
    for (std::uint32_t i = 0; i <= loss.index; ++i)
      for (std::uint32_t in : nodes_[i].inputs)
        if (in >= i)
          throw Error("backward: cycle detected at node " + std::to_string(i) + " (" +
                      std::string(opName(nodes_[i].kind)) + ")");

    for (Node& n : nodes_)
      n.grad = Tensor<T>();
    nodes_[loss.index].grad = Tensor<T>({1, 1, 1, 1}, T(1));

    for (std::uint32_t i = loss.index + 1; i-- > 0;)
    {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.requiresGrad || !n.backward)
        continue;
      if (options_.faultOp && *options_.faultOp == n.kind)
        for (T& v : n.grad.data())
          v = T(v * options_.faultScale);
      n.backward(*this, i);
    }

    GradientMap<T> grads;
    for (Node& n : nodes_)
    {
      if (n.kind != OpKind::Parameter || n.grad.empty())
        continue;
      auto [it, inserted] = grads.try_emplace(n.name, std::move(n.grad));
      if (!inserted)
        for (std::size_t i = 0; i < it->second.size(); ++i)
          it->second[i] += n.grad[i];
    }
    if (params_)
      for (const auto& [name, t] : params_->tensors())
        if (!grads.contains(name))
          grads.emplace(name, Tensor<T>(t.shape()));
    return grads;
  }

  template class Graph<float>;
  template class Graph<double>;

} // namespace demc::ad
