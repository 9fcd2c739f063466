// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "demc/ad/tensor.hpp"

namespace demc::ad::kernels {

  // Output shape of conv2d; throws ShapeError on any contract violation.
  Shape convOutputShape(const Shape& x, const Shape& w, int stride, int pad);

  template<typename T>
  Tensor<T> conv2dForward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, int stride, int pad);

  // Gradient w.r.t. the conv input; also the forward pass of the transposed conv.
  template<typename T>
  Tensor<T> conv2dBackwardData(const Tensor<T>& dy, const Tensor<T>& w, const Shape& xShape, int stride, int pad);

  template<typename T>
  Tensor<T> conv2dBackwardWeight(const Tensor<T>& dy, const Tensor<T>& x, const Shape& wShape, int stride, int pad);

  // Per-channel sum over (n, h, w), shaped [c, 1, 1, 1].
  template<typename T>
  Tensor<T> channelSum(const Tensor<T>& x);

  template<typename T>
  void addChannelBias(Tensor<T>& y, const Tensor<T>& bias);

  // 2x2/2 max pooling; argmax holds the winning in-plane offset per output.
  template<typename T>
  Tensor<T> maxPool2Forward(const Tensor<T>& x, std::vector<std::uint32_t>& argmax);

  template<typename T>
  Tensor<T> maxPool2Backward(const Tensor<T>& dy, const Shape& xShape, std::span<const std::uint32_t> argmax);

} // namespace demc::ad::kernels
