// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace demc::ad {

  namespace {

    double evaluate(ParameterSet<double>& params, const LossBuilder& build)
    {
      Graph<double> g(&params);
      return g.value(build(g))[0];
    }

  } // namespace

  double gradCheck(ParameterSet<double>& params, const std::string& name, const LossBuilder& build,
                   const GradCheckOptions& options)
  {
    const std::size_t size = params.at(name).size();
    std::vector<std::size_t> indices(size);
    std::iota(indices.begin(), indices.end(), std::size_t(0));
    std::mt19937_64 rng(options.seed);
    const std::size_t count = std::min<std::size_t>(std::size_t(std::max(options.probes, 0)), size);
    std::vector<GradProbe> probes;
    for (std::size_t i = 0; i < count; ++i)
    {
      std::uniform_int_distribution<std::size_t> pick(i, size - 1);
      std::swap(indices[i], indices[pick(rng)]);
      probes.push_back({name, indices[i]});
    }
    return gradCheck(params, probes, build, options);
  }

  double gradCheck(ParameterSet<double>& params, std::span<const GradProbe> probes, const LossBuilder& build,
                   const GradCheckOptions& options)
  {
    if (!(options.step >= 1e-6 && options.step <= 1e-4))
      throw Error("grad_check: step " + std::to_string(options.step) + " outside [1e-6, 1e-4]");

    GradientMap<double> analytic;
    {
      Graph<double> g(&params, options.graph);
      analytic = g.backward(build(g));
    }

    double worst = 0.0;
    for (const auto& probe : probes)
    {
      Tensor<double>& target = params.at(probe.name);
      if (probe.index >= target.size())
        throw Error("grad_check: probe index out of range for '" + probe.name + "'");
      const std::size_t idx = probe.index;
      const double saved = target[idx];
      target[idx] = saved + options.step;
      const double up = evaluate(params, build);
      target[idx] = saved - options.step;
      const double down = evaluate(params, build);
      target[idx] = saved;

      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic.at(probe.name)[idx];
      const double err = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), options.floor);
      worst = std::max(worst, err);
    }
    return worst;
  }

} // namespace demc::ad
