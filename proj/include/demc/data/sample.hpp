// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "demc/data/pfm.hpp"

namespace demc::data {

  inline constexpr int kColorChannels = 3;
  inline constexpr int kFeatureChannels = 12;

  // Feature planes in stacking order, three channels each.
  inline constexpr std::array<const char*, 4> kFeatureFiles = {"normal.pfm", "position.pfm", "albedo1.pfm",
                                                               "albedo2.pfm"};
  inline constexpr const char* kColorFile = "color.pfm";
  inline constexpr const char* kReferenceFile = "reference.pfm";

  // One scene: noisy HDR color, raw auxiliary features and the optional
  // converged reference. All tensors are 1 x c x h x w.
  struct Sample
  {
    std::string id;
    Image noisy;
    Image features;
    std::optional<Image> reference;

    int height() const { return noisy.shape().h; }
    int width() const { return noisy.shape().w; }
  };

  // Throws ShapeError/NumericError if planes disagree or colors are negative or non-finite.
  void validate(const Sample& sample);

  Sample loadSample(const std::filesystem::path& dir);
  // Loads in input order, spread over ad::workerThreads() threads.
  std::vector<Sample> loadSamples(const std::vector<std::filesystem::path>& dirs);
  void saveSample(const std::filesystem::path& dir, const Sample& sample);

  // One sample directory per line; blank lines and '#' comments skipped.
  // Relative entries resolve against the manifest's directory.
  std::vector<std::filesystem::path> readManifest(const std::filesystem::path& path);
  void writeManifest(const std::filesystem::path& path, const std::vector<std::filesystem::path>& entries);

} // namespace demc::data
