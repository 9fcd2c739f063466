// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/train/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

namespace demc::train {

  namespace {

    template<typename N>
    N parseNumber(std::string_view key, std::string_view text)
    {
      N value{};
      const char* end = text.data() + text.size();
      const auto [ptr, ec] = std::from_chars(text.data(), end, value);
      if (ec != std::errc() || ptr != end)
        throw Error("config: cannot parse '" + std::string(text) + "' for " + std::string(key));
      return value;
    }

  } // namespace

  void TrainConfig::validate() const
  {
    if (!(lrEnd > 0.0) || !(lrStart >= lrEnd))
      throw Error("config: need lr_start >= lr_end > 0, got " + std::to_string(lrStart) + " and " +
                  std::to_string(lrEnd));
    if (batchSize < 1)
      throw Error("config: batch_size must be >= 1, got " + std::to_string(batchSize));
    if (totalIterations < 0)
      throw Error("config: total_iterations must be >= 0");
    if (!(epsLoss > 0.0))
      throw Error("config: eps_loss must be positive");
    if (checkpointEvery < 0 || validateEvery < 0)
      throw Error("config: checkpoint_every and validate_every must be >= 0");
    if (!(validationFraction >= 0.0 && validationFraction < 1.0))
      throw Error("config: validation_fraction must lie in [0, 1)");
    if (patchSize < 32 || patchSize % 32 != 0)
      throw Error("config: patch_size must be a positive multiple of 32, got " + std::to_string(patchSize));
    if (patchStride < 1)
      throw Error("config: patch_stride must be >= 1");
    if (!(gamma.gamma > 0.0))
      throw Error("config: gamma must be positive");
  }

  void applyConfigEntry(TrainConfig& config, std::string_view key, std::string_view value)
  {
    if (key == "lr_start")
      config.lrStart = parseNumber<double>(key, value);
    else if (key == "lr_end")
      config.lrEnd = parseNumber<double>(key, value);
    else if (key == "total_iterations" || key == "iterations")
      config.totalIterations = parseNumber<std::int64_t>(key, value);
    else if (key == "batch_size")
      config.batchSize = parseNumber<int>(key, value);
    else if (key == "eps_loss")
      config.epsLoss = parseNumber<double>(key, value);
    else if (key == "seed")
      config.seed = parseNumber<std::uint64_t>(key, value);
    else if (key == "checkpoint_every")
      config.checkpointEvery = parseNumber<std::int64_t>(key, value);
    else if (key == "validation_fraction")
      config.validationFraction = parseNumber<double>(key, value);
    else if (key == "validate_every")
      config.validateEvery = parseNumber<std::int64_t>(key, value);
    else if (key == "patch_size")
      config.patchSize = parseNumber<int>(key, value);
    else if (key == "patch_stride")
      config.patchStride = parseNumber<int>(key, value);
    else if (key == "gamma")
      config.gamma.gamma = parseNumber<double>(key, value);
    else
      throw Error("config: unknown key '" + std::string(key) + "'");
  }

  void applyConfigFile(TrainConfig& config, const std::filesystem::path& path)
  {
    std::ifstream in(path);
    if (!in)
      throw IoError("cannot open config file " + path.string());
    auto trim = [](std::string_view s) {
      const auto begin = s.find_first_not_of(" \t\r");
      if (begin == std::string_view::npos)
        return std::string_view();
      return s.substr(begin, s.find_last_not_of(" \t\r") - begin + 1);
    };
    std::string line;
    for (int number = 1; std::getline(in, line); ++number)
    {
      const std::string_view text = trim(std::string_view(line).substr(0, line.find('#')));
      if (text.empty())
        continue;
      const auto eq = text.find('=');
      if (eq == std::string_view::npos)
        throw Error(path.string() + ":" + std::to_string(number) + ": expected key=value");
      try
      {
        applyConfigEntry(config, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
      }
      catch (const Error& e)
      {
        throw Error(path.string() + ":" + std::to_string(number) + ": " + e.what());
      }
    }
  }

  double lrSchedule(std::int64_t iteration, const TrainConfig& config)
  {
    if (config.totalIterations <= 0)
      return config.lrStart;
    const double t = double(std::clamp<std::int64_t>(iteration, 0, config.totalIterations)) /
                     double(config.totalIterations);
    return config.lrStart * std::pow(config.lrEnd / config.lrStart, t);
  }

} // namespace demc::train
