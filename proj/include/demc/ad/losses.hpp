// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "demc/ad/tensor.hpp"

namespace demc::ad {

  // Relative MSE: sum over batch, channels and pixels of (ref - pred)^2 / (ref^2 + eps),
  // divided by the pixel count n*h*w (channels are summed, not averaged).
  // Accumulates in double, in memory order; shared by the loss op and the metric.
  template<typename T>
  double relMse(const Tensor<T>& pred, const Tensor<T>& ref, double eps)
  {
    if (pred.shape() != ref.shape())
      throw ShapeError("relmse: prediction " + pred.shape().str() + " and reference " + ref.shape().str() +
                       " differ in shape");
    const Shape& s = pred.shape();
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
    {
      const double r = ref[i];
      const double d = r - double(pred[i]);
      acc += d * d / (r * r + eps);
    }
    const double pixels = double(s.n) * double(s.h) * double(s.w);
    return pixels > 0 ? acc / pixels : 0.0;
  }

} // namespace demc::ad
