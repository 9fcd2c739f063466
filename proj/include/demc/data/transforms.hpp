// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "demc/data/sample.hpp"

namespace demc::data {

  struct GammaConfig
  {
    double gamma = 2.2;
  };

  double gammaForward(double x, GammaConfig config = {});
  double gammaInverse(double x, GammaConfig config = {});

  // Elementwise x^(1/gamma) and x^gamma; negative entries are rejected.
  Image gammaForward(const Image& hdr, GammaConfig config = {});
  Image gammaInverse(const Image& encoded, GammaConfig config = {});

  inline constexpr double kZScoreStdFloor = 1e-5;

  struct ZScoreStats
  {
    std::vector<double> mean;
    std::vector<double> std; // population deviation before flooring
  };

  struct ZScoreResult
  {
    Image features;
    ZScoreStats stats;
  };

  // Per-image, per-channel (x - mean) / max(std, 1e-5). Expects n == 1.
  ZScoreResult zscoreFeatures(const Image& features);

  // Top-left anchors along one axis: multiples of stride, plus one flush with
  // the far edge when the last regular patch stops short of it. Covers every
  // pixel whenever stride <= patch.
  std::vector<int> patchAnchors(int extent, int patch, int stride);
  int regularAnchorCount(int extent, int patch, int stride);

  struct PatchOrigin
  {
    int y = 0;
    int x = 0;
  };

  std::vector<PatchOrigin> patchGrid(int height, int width, int patch, int stride);

  Image crop(const Image& image, int y, int x, int height, int width);
  Sample cropSample(const Sample& sample, int y, int x, int height, int width);

  std::vector<Sample> extractPatches(const Sample& sample, int patch = 128, int stride = 80);

  // Original extent plus the amount added on the bottom and right.
  struct CropRecord
  {
    int height = 0;
    int width = 0;
    int padBottom = 0;
    int padRight = 0;
  };

  struct Padded
  {
    Image image;
    CropRecord crop;
  };

  // Mirror index into [0, extent) without repeating the edge sample.
  int reflectIndex(int i, int extent);

  Padded padToMultiple(const Image& image, int multiple = 32);
  Image unpad(const Image& image, const CropRecord& record);

} // namespace demc::data
