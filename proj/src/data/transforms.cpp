// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/data/transforms.hpp"

#include <cmath>

namespace demc::data {

  namespace {

    void checkGamma(GammaConfig config)
    {
      if (!(config.gamma > 0.0))
        throw Error("gamma must be positive, got " + std::to_string(config.gamma));
    }

    double checkedBase(double x)
    {
      if (!(x >= 0.0))
        throw Error("gamma transform needs non-negative input, got " + std::to_string(x));
      return x;
    }

    Image powImage(const Image& in, double exponent)
    {
      Image out(in.shape());
      for (std::size_t i = 0; i < in.size(); ++i)
        out[i] = float(std::pow(checkedBase(in[i]), exponent));
      return out;
    }

  } // namespace

  double gammaForward(double x, GammaConfig config)
  {
    checkGamma(config);
    return std::pow(checkedBase(x), 1.0 / config.gamma);
  }

  double gammaInverse(double x, GammaConfig config)
  {
    checkGamma(config);
    return std::pow(checkedBase(x), config.gamma);
  }

  Image gammaForward(const Image& hdr, GammaConfig config)
  {
    checkGamma(config);
    return powImage(hdr, 1.0 / config.gamma);
  }

  Image gammaInverse(const Image& encoded, GammaConfig config)
  {
    checkGamma(config);
    return powImage(encoded, config.gamma);
  }

  ZScoreResult zscoreFeatures(const Image& features)
  {
    const auto& s = features.shape();
    if (s.n != 1)
      throw ShapeError("z-score expects a single image, got " + s.str());
    ZScoreResult result{Image(s), {}};
    const std::size_t plane = s.planeSize();
    for (int c = 0; c < s.c; ++c)
    {
      const float* src = features.plane(0, c);
      double mean = 0.0;
      for (std::size_t i = 0; i < plane; ++i)
        mean += src[i];
      mean /= double(plane);
      double var = 0.0;
      for (std::size_t i = 0; i < plane; ++i)
        var += (src[i] - mean) * (src[i] - mean);
      const double std = std::sqrt(var / double(plane));
      const double inv = 1.0 / std::max(std, kZScoreStdFloor);
      float* dst = result.features.plane(0, c);
      for (std::size_t i = 0; i < plane; ++i)
        dst[i] = float((src[i] - mean) * inv);
      result.stats.mean.push_back(mean);
      result.stats.std.push_back(std);
    }
    return result;
  }

  int regularAnchorCount(int extent, int patch, int stride)
  {
    if (patch < 1 || stride < 1)
      throw Error("patch and stride must be positive");
    if (extent < patch)
      throw ShapeError("image extent " + std::to_string(extent) + " is smaller than patch " + std::to_string(patch));
    return (extent - patch) / stride + 1;
  }

  std::vector<int> patchAnchors(int extent, int patch, int stride)
  {
    const int count = regularAnchorCount(extent, patch, stride);
    std::vector<int> anchors;
    for (int i = 0; i < count; ++i)
      anchors.push_back(i * stride);
    if (anchors.back() + patch < extent)
      anchors.push_back(extent - patch);
    return anchors;
  }

  std::vector<PatchOrigin> patchGrid(int height, int width, int patch, int stride)
  {
    std::vector<PatchOrigin> grid;
    const auto ys = patchAnchors(height, patch, stride);
    const auto xs = patchAnchors(width, patch, stride);
    for (int y : ys)
      for (int x : xs)
        grid.push_back({y, x});
    return grid;
  }

  Image crop(const Image& image, int y, int x, int height, int width)
  {
    const auto& s = image.shape();
    if (y < 0 || x < 0 || height < 0 || width < 0 || y + height > s.h || x + width > s.w)
      throw ShapeError("crop " + std::to_string(height) + "x" + std::to_string(width) + " at (" + std::to_string(y) +
                       ", " + std::to_string(x) + ") exceeds " + s.str());
    Image out({s.n, s.c, height, width});
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int r = 0; r < height; ++r)
          std::copy_n(&image.plane(n, c)[std::size_t(y + r) * s.w + x], width, &out.plane(n, c)[std::size_t(r) * width]);
    return out;
  }

  Sample cropSample(const Sample& sample, int y, int x, int height, int width)
  {
    Sample out;
    out.id = sample.id;
    out.noisy = crop(sample.noisy, y, x, height, width);
    out.features = crop(sample.features, y, x, height, width);
    if (sample.reference)
      out.reference = crop(*sample.reference, y, x, height, width);
    return out;
  }

  std::vector<Sample> extractPatches(const Sample& sample, int patch, int stride)
  {
    std::vector<Sample> patches;
    for (const auto& origin : patchGrid(sample.height(), sample.width(), patch, stride))
    {
      patches.push_back(cropSample(sample, origin.y, origin.x, patch, patch));
      patches.back().id = sample.id + "@" + std::to_string(origin.y) + "," + std::to_string(origin.x);
    }
    return patches;
  }

  int reflectIndex(int i, int extent)
  {
    if (extent == 1)
      return 0;
    const int period = 2 * (extent - 1);
    i %= period;
    if (i < 0)
      i += period;
    return i < extent ? i : period - i;
  }

  Padded padToMultiple(const Image& image, int multiple)
  {
    if (multiple < 1)
      throw Error("padding multiple must be positive");
    const auto& s = image.shape();
    if (s.h < 1 || s.w < 1)
      throw ShapeError("cannot pad empty image " + s.str());
    const int h = (s.h + multiple - 1) / multiple * multiple;
    const int w = (s.w + multiple - 1) / multiple * multiple;
    Padded result{Image({s.n, s.c, h, w}), {s.h, s.w, h - s.h, w - s.w}};
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < h; ++y)
        {
          const int sy = reflectIndex(y, s.h);
          for (int x = 0; x < w; ++x)
            result.image.at(n, c, y, x) = image.at(n, c, sy, reflectIndex(x, s.w));
        }
    return result;
  }

  Image unpad(const Image& image, const CropRecord& record)
  {
    return crop(image, 0, 0, record.height, record.width);
  }

} // namespace demc::data
