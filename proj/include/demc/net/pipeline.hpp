// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "demc/data/transforms.hpp"
#include "demc/net/demc_net.hpp"

namespace demc::net {

  inline constexpr double kLossEps = 1e-3;

  // Network-domain tensors for one sample: gamma-encoded color and z-scored features.
  struct NetworkInput
  {
    data::Image noisyGamma;
    data::Image features;
  };

  NetworkInput prepareInput(const data::Sample& sample, data::GammaConfig gamma = {});

  // RelMSE between the inverse-gamma network output and an HDR reference.
  template<typename T>
  NodeRef hdrLoss(Graph<T>& g, NodeRef outputGamma, NodeRef reference, data::GammaConfig gamma = {},
                  double eps = kLossEps);

  // Full-image inference: reflect-pad to a multiple of 32, forward with
  // running statistics, crop back and return linear HDR radiance.
  data::Image denoise(DemcNet<float>& net, const data::Sample& sample, data::GammaConfig gamma = {});

  // Same on already prepared inputs; returns the gamma-domain prediction.
  data::Image denoiseGamma(DemcNet<float>& net, const NetworkInput& input);

} // namespace demc::net
