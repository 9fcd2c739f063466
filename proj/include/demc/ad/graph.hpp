// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "demc/ad/parameters.hpp"
#include "demc/ad/tensor.hpp"

namespace demc::ad {

  enum class OpKind : std::uint8_t
  {
    Input,
    Parameter,
    Conv2d,
    Deconv2d,
    MaxPool2,
    Relu,
    BatchNorm,
    Concat,
    Slice,
    Add,
    Mul,
    Scale,
    Pow,
    Sum,
    RelMse,
  };

  std::string_view opName(OpKind kind);

  // Every operator with a backward rule, in declaration order.
  std::span<const OpKind> differentiableOps();

  struct NodeRef
  {
    std::uint32_t index = 0;
  };

  constexpr double kBatchNormEps = 1e-5;
  constexpr double kBatchNormMomentum = 0.1;

  struct GraphOptions
  {
    // Scales the output gradient seen by every backward rule of this kind.
    // Used only to prove that the gradient checks catch broken rules.
    std::optional<OpKind> faultOp;
    double faultScale = 0.5;
  };

  // Define-by-run reverse-mode graph. Each op evaluates eagerly when it is
  // added; backward() replays the recorded rules in reverse order. Nodes can
  // only reference earlier nodes, so the graph is acyclic by construction.
  template<typename T>
  class Graph
  {
  public:
    explicit Graph(const ParameterSet<T>* params = nullptr, GraphOptions options = {});

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    NodeRef input(Tensor<T> value);
    NodeRef parameter(const std::string& name);

    // Cross-correlation. weight: [co, ci, kh, kw]; bias: [co, 1, 1, 1].
    NodeRef conv2d(NodeRef x, NodeRef weight, NodeRef bias, int stride, int pad);
    // Transposed conv2d, 4x4 kernel, stride 2, pad 1. weight: [ci, co, 4, 4].
    NodeRef deconv2d(NodeRef x, NodeRef weight, NodeRef bias);
    NodeRef maxPool2(NodeRef x);
    NodeRef relu(NodeRef x);
    // Batch statistics over (n, h, w); stats are updated when non-null.
    NodeRef batchNormTrain(NodeRef x, NodeRef gamma, NodeRef beta, BatchNormStats<T>* stats,
                           double momentum = kBatchNormMomentum, double eps = kBatchNormEps);
    NodeRef batchNormInfer(NodeRef x, NodeRef gamma, NodeRef beta, const BatchNormStats<T>& stats,
                           double eps = kBatchNormEps);
    NodeRef concatChannels(std::span<const NodeRef> inputs);
    NodeRef concatChannels(std::initializer_list<NodeRef> inputs)
    {
      return concatChannels(std::span<const NodeRef>(inputs.begin(), inputs.size()));
    }
    NodeRef sliceChannels(NodeRef x, int begin, int count);
    NodeRef add(NodeRef a, NodeRef b);
    NodeRef mul(NodeRef a, NodeRef b);
    NodeRef scale(NodeRef x, double factor);
    // Elementwise x^exponent for x >= 0.
    NodeRef pow(NodeRef x, double exponent);
    NodeRef sum(NodeRef x);
    // sum_{n,c,y,x} (ref - pred)^2 / (ref^2 + eps) divided by the pixel count n*h*w.
    NodeRef relMse(NodeRef pred, NodeRef ref, double eps);

    const Tensor<T>& value(NodeRef node) const;
    OpKind kind(NodeRef node) const;
    std::size_t size() const { return nodes_.size(); }

    // Reverse accumulation from a 1x1x1x1 node. Returns the gradient of every
    // parameter of the bound ParameterSet; unreachable ones get zeros.
    GradientMap<T> backward(NodeRef loss);

    // Gradient of a non-parameter node after backward(); empty when unreachable.
    // Parameter gradients are moved into the map returned by backward().
    const Tensor<T>& gradient(NodeRef node) const;

  private:
    using BackwardFn = std::function<void(Graph&, std::uint32_t)>;

    struct Node
    {
      OpKind kind = OpKind::Input;
      std::vector<std::uint32_t> inputs;
      Tensor<T> value;
      const Tensor<T>* external = nullptr;
      Tensor<T> grad;
      bool requiresGrad = false;
      std::string name;
      BackwardFn backward;

      const Tensor<T>& out() const { return external ? *external : value; }
    };

    NodeRef push(Node node);
    const Node& node(NodeRef ref) const;
    const Tensor<T>& val(std::uint32_t index) const { return nodes_[index].out(); }
    const Tensor<T>& gradOf(std::uint32_t index) const { return nodes_[index].grad; }
    bool needsGrad(std::uint32_t index) const { return nodes_[index].requiresGrad; }
    void accumulate(std::uint32_t index, Tensor<T>&& contribution);
    bool anyRequiresGrad(std::span<const std::uint32_t> inputs) const;

    const ParameterSet<T>* params_;
    GraphOptions options_;
    std::vector<Node> nodes_;
  };

  extern template class Graph<float>;
  extern template class Graph<double>;

} // namespace demc::ad
