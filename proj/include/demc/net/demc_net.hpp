// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "demc/ad/graph.hpp"
#include "demc/net/model_spec.hpp"

namespace demc::net {

  using ad::Graph;
  using ad::NodeRef;
  using ad::ParameterSet;
  using ad::Tensor;

  enum class Mode
  {
    Train, // batch statistics, running statistics updated
    Probe, // batch statistics, running statistics untouched
    Infer, // running statistics
  };

  struct EncoderOutput
  {
    NodeRef latent;
    std::vector<NodeRef> taps; // pre-pool activation of each unit, finest first
  };

  struct ForwardOutput
  {
    NodeRef output;
    NodeRef latent;
    NodeRef fused; // fusion sub-network output; unset for DEMCnoSN
    std::vector<NodeRef> hdrTaps;
    std::vector<NodeRef> featureTaps; // empty for SEMC
  };

  // Parameter declaration and graph assembly for the building blocks. Every
  // block owns the parameters under its name prefix.
  template<typename T>
  void declareFusion(ParameterSet<T>& params, const ModelSpec& spec);
  template<typename T>
  NodeRef buildFusion(Graph<T>& g, ParameterSet<T>& params, NodeRef features, Mode mode);

  template<typename T>
  void declareEncoder(ParameterSet<T>& params, const std::string& prefix, int inChannels,
                      std::span<const int> widths);
  template<typename T>
  EncoderOutput buildEncoder(Graph<T>& g, const std::string& prefix, NodeRef input);

  template<typename T>
  void declareSkipFuse(ParameterSet<T>& params, const std::string& prefix, int channels, int arity);
  // relu(W . concat(taps) + b) with a 1x1 convolution.
  template<typename T>
  NodeRef skipFuse(Graph<T>& g, const std::string& prefix, std::span<const NodeRef> taps);

  template<typename T>
  void declareDecoder(ParameterSet<T>& params, const ModelSpec& spec);
  // tapSets holds one list of five taps per encoder, feature encoder first.
  template<typename T>
  NodeRef buildDecoder(Graph<T>& g, const ModelSpec& spec, NodeRef latent,
                       std::span<const std::vector<NodeRef>> tapSets);

  // Xavier for convolutions, bilinear deconvolutions, [I ... I] skip fusion,
  // unit batch-norm scale. Each tensor draws from its own seed(name) stream.
  template<typename T>
  void initParameters(ParameterSet<T>& params, std::uint64_t seed);

  // Full dual-encoder model and its ablation variants.
  template<typename T>
  class DemcNet
  {
  public:
    explicit DemcNet(ModelSpec spec);

    const ModelSpec& spec() const { return spec_; }
    ParameterSet<T>& parameters() { return params_; }
    const ParameterSet<T>& parameters() const { return params_; }

    // noisyGamma: n x 3 x h x w; features: n x 12 x h x w, h and w multiples of 32.
    ForwardOutput build(Graph<T>& g, NodeRef noisyGamma, NodeRef features, Mode mode);

    // Inference-mode forward returning the gamma-domain prediction.
    Tensor<T> forward(const Tensor<T>& noisyGamma, const Tensor<T>& features);

  private:
    ModelSpec spec_;
    ParameterSet<T> params_;
  };

  // Encoder/decoder prefixes used in parameter names.
  inline constexpr const char* kFeatureEncoder = "enc_feat";
  inline constexpr const char* kHdrEncoder = "enc_hdr";
  inline constexpr const char* kSingleEncoder = "enc";

  extern template class DemcNet<float>;
  extern template class DemcNet<double>;

} // namespace demc::net
