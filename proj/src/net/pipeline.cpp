// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/net/pipeline.hpp"

namespace demc::net {

  NetworkInput prepareInput(const data::Sample& sample, data::GammaConfig gamma)
  {
    data::validate(sample);
    return {data::gammaForward(sample.noisy, gamma), data::zscoreFeatures(sample.features).features};
  }

  template<typename T>
  NodeRef hdrLoss(Graph<T>& g, NodeRef outputGamma, NodeRef reference, data::GammaConfig gamma, double eps)
  {
    return g.relMse(g.pow(outputGamma, gamma.gamma), reference, eps);
  }

  template NodeRef hdrLoss<float>(Graph<float>&, NodeRef, NodeRef, data::GammaConfig, double);
  template NodeRef hdrLoss<double>(Graph<double>&, NodeRef, NodeRef, data::GammaConfig, double);

  data::Image denoiseGamma(DemcNet<float>& net, const NetworkInput& input)
  {
    const auto color = data::padToMultiple(input.noisyGamma);
    const auto features = data::padToMultiple(input.features);
    return data::unpad(net.forward(color.image, features.image), color.crop);
  }

  data::Image denoise(DemcNet<float>& net, const data::Sample& sample, data::GammaConfig gamma)
  {
    return data::gammaInverse(denoiseGamma(net, prepareInput(sample, gamma)), gamma);
  }

} // namespace demc::net
