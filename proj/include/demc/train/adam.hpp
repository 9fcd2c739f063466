// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "demc/ad/parameters.hpp"

namespace demc::train {

  using ad::GradientMap;
  using ad::ParameterSet;
  using ad::Tensor;

  struct AdamConfig
  {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  // Adam with bias correction. Moments live per parameter name and are
  // created as zeros on first use.
  template<typename T>
  class Adam
  {
  public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    // Updates every parameter that has an entry in grads. Throws ShapeError if a
    // gradient or stored moment disagrees with its parameter, Error for unknown names.
    void step(ParameterSet<T>& params, const GradientMap<T>& grads, double lr);

    // Creates zero moments for every parameter that lacks them.
    void attach(const ParameterSet<T>& params);

    const AdamConfig& config() const { return config_; }
    std::int64_t steps() const { return steps_; }
    void setSteps(std::int64_t steps) { steps_ = steps; }

    std::map<std::string, Tensor<T>>& firstMoments() { return m_; }
    const std::map<std::string, Tensor<T>>& firstMoments() const { return m_; }
    std::map<std::string, Tensor<T>>& secondMoments() { return v_; }
    const std::map<std::string, Tensor<T>>& secondMoments() const { return v_; }

  private:
    AdamConfig config_;
    std::int64_t steps_ = 0;
    std::map<std::string, Tensor<T>> m_;
    std::map<std::string, Tensor<T>> v_;
  };

  extern template class Adam<float>;
  extern template class Adam<double>;

} // namespace demc::train
