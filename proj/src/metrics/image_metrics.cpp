// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/metrics/image_metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "demc/ad/losses.hpp"

namespace demc::metrics {

  namespace {

    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;

    std::array<double, kSsimWindow> gaussianWindow()
    {
      std::array<double, kSsimWindow> w{};
      double sum = 0.0;
      for (int i = 0; i < kSsimWindow; ++i)
      {
        const double d = i - kSsimWindow / 2;
        w[std::size_t(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[std::size_t(i)];
      }
      for (double& v : w)
        v /= sum;
      return w;
    }

    // Valid-mode separable Gaussian filter of an h x w plane.
    std::vector<double> filterValid(const std::vector<double>& plane, int h, int w)
    {
      static const auto window = gaussianWindow();
      const int ow = w - kSsimWindow + 1;
      const int oh = h - kSsimWindow + 1;
      std::vector<double> rows(std::size_t(h) * std::size_t(ow));
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x)
        {
          double acc = 0.0;
          for (int k = 0; k < kSsimWindow; ++k)
            acc += window[std::size_t(k)] * plane[std::size_t(y) * std::size_t(w) + std::size_t(x + k)];
          rows[std::size_t(y) * std::size_t(ow) + std::size_t(x)] = acc;
        }
      std::vector<double> out(std::size_t(oh) * std::size_t(ow));
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
        {
          double acc = 0.0;
          for (int k = 0; k < kSsimWindow; ++k)
            acc += window[std::size_t(k)] * rows[std::size_t(y + k) * std::size_t(ow) + std::size_t(x)];
          out[std::size_t(y) * std::size_t(ow) + std::size_t(x)] = acc;
        }
      return out;
    }

  } // namespace

  double relmse(const data::Image& predHdr, const data::Image& refHdr, double eps)
  {
    return ad::relMse(predHdr, refHdr, eps);
  }

  double ssim(const data::Image& predLdr, const data::Image& refLdr)
  {
    const ad::Shape& s = predLdr.shape();
    if (s != refLdr.shape())
      throw ShapeError("ssim: images " + s.str() + " and " + refLdr.shape().str() + " differ in shape");
    if (s.h < kSsimWindow || s.w < kSsimWindow)
      throw ShapeError("ssim: image " + s.str() + " is smaller than the " + std::to_string(kSsimWindow) + "x" +
                       std::to_string(kSsimWindow) + " window");
    const std::size_t planeSize = std::size_t(s.h) * std::size_t(s.w);
    std::vector<double> a(planeSize), b(planeSize), aa(planeSize), bb(planeSize), ab(planeSize);
    double total = 0.0;
    std::size_t count = 0;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
      {
        const auto pa = predLdr.plane(n, c);
        const auto pb = refLdr.plane(n, c);
        for (std::size_t i = 0; i < planeSize; ++i)
        {
          a[i] = pa[i];
          b[i] = pb[i];
          aa[i] = a[i] * a[i];
          bb[i] = b[i] * b[i];
          ab[i] = a[i] * b[i];
        }
        const auto muA = filterValid(a, s.h, s.w);
        const auto muB = filterValid(b, s.h, s.w);
        const auto eAA = filterValid(aa, s.h, s.w);
        const auto eBB = filterValid(bb, s.h, s.w);
        const auto eAB = filterValid(ab, s.h, s.w);
        for (std::size_t i = 0; i < muA.size(); ++i)
        {
          const double varA = eAA[i] - muA[i] * muA[i];
          const double varB = eBB[i] - muB[i] * muB[i];
          const double cov = eAB[i] - muA[i] * muB[i];
          const double num = (2.0 * muA[i] * muB[i] + kC1) * (2.0 * cov + kC2);
          const double den = (muA[i] * muA[i] + muB[i] * muB[i] + kC1) * (varA + varB + kC2);
          total += num / den;
        }
        count += muA.size();
      }
    return count > 0 ? total / double(count) : 1.0;
  }

  data::Image toDisplay(const data::Image& hdr, data::GammaConfig gamma)
  {
    data::Image out(hdr.shape());
    for (std::size_t i = 0; i < hdr.size(); ++i)
      out[i] = float(std::clamp(data::gammaForward(std::max(double(hdr[i]), 0.0), gamma), 0.0, 1.0));
    return out;
  }

  double ssimHdr(const data::Image& predHdr, const data::Image& refHdr, data::GammaConfig gamma)
  {
    return ssim(toDisplay(predHdr, gamma), toDisplay(refHdr, gamma));
  }

} // namespace demc::metrics
