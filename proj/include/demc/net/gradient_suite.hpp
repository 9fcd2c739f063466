// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "demc/ad/grad_check.hpp"

namespace demc::net {

  inline constexpr double kOpThreshold = 1e-4;
  inline constexpr double kModelThreshold = 1e-3;
  inline constexpr const char* kEndToEndName = "demc_end_to_end";

  struct GradSuiteEntry
  {
    std::string name;
    double error = 0.0;
    double threshold = 0.0;

    bool passed() const { return error <= threshold; }
  };

  struct GradSuiteOptions
  {
    std::uint64_t seed = 0;
    int seedsPerOp = 5;
    int endToEndProbes = 50;
    ad::GraphOptions graph; // fault injection hook, applied to analytic passes
  };

  // Finite-difference check of one differentiable op on a random small shape.
  double checkOp(ad::OpKind op, std::uint64_t seed, const ad::GraphOptions& graph = {});

  // Full DEMC at 1x32x32 in 64-bit with probes spread over all parameters.
  double checkEndToEnd(std::uint64_t seed, int probes, const ad::GraphOptions& graph = {});

  // Every differentiable op once, in registration order, then the model.
  std::vector<GradSuiteEntry> runGradientSuite(const GradSuiteOptions& options = {});

} // namespace demc::net
