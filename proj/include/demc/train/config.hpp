// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "demc/data/transforms.hpp"

namespace demc::train {

  struct TrainConfig
  {
    double lrStart = 1e-4;
    double lrEnd = 5e-6;
    std::int64_t totalIterations = 250000;
    int batchSize = 8;
    double epsLoss = 1e-3;
    std::uint64_t seed = 0;
    std::int64_t checkpointEvery = 0; // 0: only the final state
    double validationFraction = 0.1;
    std::int64_t validateEvery = 1000; // 0: only after the last iteration
    int patchSize = 128;
    int patchStride = 80;
    data::GammaConfig gamma;

    // Throws Error on any violated invariant.
    void validate() const;
  };

  // Sets one field from its snake_case key, e.g. "lr_start" or "batch_size".
  // Throws Error for unknown keys or unparsable values.
  void applyConfigEntry(TrainConfig& config, std::string_view key, std::string_view value);

  // Applies a key=value file: one entry per line, blank lines and '#'
  // comments skipped, whitespace around keys and values ignored. Throws
  // IoError if unreadable and Error naming the line for bad entries.
  void applyConfigFile(TrainConfig& config, const std::filesystem::path& path);

  // Geometric decay lrStart * (lrEnd / lrStart)^(iteration / total); the
  // iteration is clamped to [0, total].
  double lrSchedule(std::int64_t iteration, const TrainConfig& config);

} // namespace demc::train
