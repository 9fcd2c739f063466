// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "demc/data/transforms.hpp"

namespace demc::metrics {

  inline constexpr double kRelMseEps = 1e-3;
  inline constexpr int kSsimWindow = 11;
  inline constexpr double kSsimSigma = 1.5;

  // Relative MSE of HDR images; same formula as the training loss.
  double relmse(const data::Image& predHdr, const data::Image& refHdr, double eps = kRelMseEps);

  // Single-scale SSIM of display-domain images in [0, 1]: 11x11 Gaussian
  // window (sigma 1.5), K1 = 0.01, K2 = 0.03, range 1, averaged over channels,
  // batch items and valid window positions. Throws ShapeError for mismatched
  // shapes or images smaller than the window.
  double ssim(const data::Image& predLdr, const data::Image& refLdr);

  // Gamma encoding followed by a clamp to [0, 1].
  data::Image toDisplay(const data::Image& hdr, data::GammaConfig gamma = {});

  // SSIM of two HDR images after mapping both to the display domain.
  double ssimHdr(const data::Image& predHdr, const data::Image& refHdr, data::GammaConfig gamma = {});

} // namespace demc::metrics
