// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>

#include "demc/data/sample.hpp"

namespace demc::synth {

  struct SceneRecipe
  {
    std::uint64_t seed = 0;
    int height = 96;
    int width = 96;
    int primitives = 12;
    std::optional<std::array<double, 3>> light; // drawn from the seed when unset
    int sppNoisy = 4;
    int sppReference = 4096;

    // Throws Error on invalid fields.
    void validate() const;
  };

  // Noise-free buffers of a layered scene.
  struct AnalyticScene
  {
    data::Image radiance; // 1x3xHxW
    data::Image features; // 1x12xHxW in data-io stacking order
    std::array<double, 3> light{};
  };

  AnalyticScene buildScene(const SceneRecipe& recipe);

  // Mean of spp exponential draws with per-pixel mean equal to the radiance.
  // Each (pixel, channel) has its own counter-keyed generator.
  data::Image renderNoisy(const data::Image& radiance, std::uint64_t seed, std::uint64_t stream, int spp);

  data::Sample generateScene(const SceneRecipe& recipe);

  // Writes scene_XXX directories under outDir plus manifest.txt; scene i uses
  // seed baseSeed + i. Returns the manifest path.
  std::filesystem::path generateDataset(const std::filesystem::path& outDir, int scenes, std::uint64_t baseSeed,
                                        const SceneRecipe& defaults = {});

} // namespace demc::synth
