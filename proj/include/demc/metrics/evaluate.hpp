// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demc/data/sample.hpp"
#include "demc/data/transforms.hpp"
#include "demc/net/demc_net.hpp"

namespace demc::metrics {

  struct EvalRow
  {
    std::string id;
    double relmse = 0.0;
    double ssim = 0.0;
  };

  struct EvalReport
  {
    std::string label;
    std::vector<EvalRow> rows;

    double meanRelmse() const;
    double meanSsim() const;
  };

  // Denoises every sample at full resolution in inference mode and scores the
  // result against its reference. Throws IoError if any sample lacks a reference.
  EvalReport evaluateModel(net::DemcNet<float>& model, std::span<const data::Sample> samples,
                           const std::string& label, data::GammaConfig gamma = {});

  // Scores the noisy input itself (identity baseline).
  EvalReport evaluateNoisy(std::span<const data::Sample> samples, data::GammaConfig gamma = {});

  // Loads a checkpoint, builds the variant it records and evaluates it. When
  // `expected` is given, a checkpoint of another variant raises CheckpointError.
  EvalReport evaluateCheckpoint(const std::filesystem::path& checkpoint, std::span<const data::Sample> samples,
                                std::optional<net::Variant> expected = std::nullopt, data::GammaConfig gamma = {});

  // Side-by-side reports; all reports must list the same ids in the same order.
  // CSV columns: scene, then <label>_relmse,<label>_ssim per report; last row "mean".
  std::string reportCsv(std::span<const EvalReport> reports);
  // Same content as an aligned plain-text table.
  std::string reportTable(std::span<const EvalReport> reports);

} // namespace demc::metrics
