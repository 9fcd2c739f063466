// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "demc/ad/graph.hpp"

namespace demc::ad {

  struct GradCheckOptions
  {
    int probes = 20;
    double step = 1e-5; // must lie in [1e-6, 1e-4]
    std::uint64_t seed = 0;
    // Denominator floor of |a - n| / max(|a| + |n|, floor).
    double floor = 1e-8;
    GraphOptions graph;   // applied to the analytic pass only
  };

  // Builds a scalar loss from the current values in the bound parameter set.
  using LossBuilder = std::function<NodeRef(Graph<double>&)>;

  // Compares the analytic gradient of one parameter against central finite
  // differences at randomly probed entries. Returns
  // max |analytic - numeric| / max(|analytic| + |numeric|, 1e-8).
  double gradCheck(ParameterSet<double>& params, const std::string& name, const LossBuilder& build,
                   const GradCheckOptions& options = {});

  // One scalar entry of a named parameter.
  struct GradProbe
  {
    std::string name;
    std::size_t index = 0;
  };

  // Same measure over an explicit probe list spanning any parameters.
  double gradCheck(ParameterSet<double>& params, std::span<const GradProbe> probes, const LossBuilder& build,
                   const GradCheckOptions& options = {});

} // namespace demc::ad
