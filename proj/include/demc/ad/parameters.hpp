// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "demc/ad/tensor.hpp"

namespace demc::ad {

  // Running statistics of one batch-normalization layer.
  template<typename T>
  struct BatchNormStats
  {
    Tensor<T> mean;
    Tensor<T> var;
    std::int64_t tracked = 0; // number of training batches folded in

    explicit BatchNormStats(int channels = 0)
      : mean({channels, 1, 1, 1}, T(0)), var({channels, 1, 1, 1}, T(1)) {}
  };

  template<typename T>
  using GradientMap = std::map<std::string, Tensor<T>>;

  // Named trainable tensors plus the non-trainable batch-norm statistics.
  // Names are unique; iteration order is lexicographic.
  template<typename T>
  class ParameterSet
  {
  public:
    Tensor<T>& add(const std::string& name, Shape shape)
    {
      if (tensors_.contains(name))
        throw Error("duplicate parameter name '" + name + "'");
      return tensors_.emplace(name, Tensor<T>(shape)).first->second;
    }

    BatchNormStats<T>& addStats(const std::string& name, int channels)
    {
      if (stats_.contains(name))
        throw Error("duplicate batch-norm statistics name '" + name + "'");
      return stats_.emplace(name, BatchNormStats<T>(channels)).first->second;
    }

    bool contains(const std::string& name) const { return tensors_.contains(name); }

    Tensor<T>& at(const std::string& name) { return lookup(tensors_, name, "parameter"); }
    const Tensor<T>& at(const std::string& name) const { return lookup(tensors_, name, "parameter"); }

    BatchNormStats<T>& stats(const std::string& name) { return lookup(stats_, name, "batch-norm statistics"); }
    const BatchNormStats<T>& stats(const std::string& name) const { return lookup(stats_, name, "batch-norm statistics"); }

    std::map<std::string, Tensor<T>>& tensors() { return tensors_; }
    const std::map<std::string, Tensor<T>>& tensors() const { return tensors_; }
    std::map<std::string, BatchNormStats<T>>& allStats() { return stats_; }
    const std::map<std::string, BatchNormStats<T>>& allStats() const { return stats_; }

    // Number of trainable scalars.
    std::size_t count() const
    {
      std::size_t total = 0;
      for (const auto& [name, t] : tensors_)
        total += t.size();
      return total;
    }

    template<typename U>
    ParameterSet<U> cast() const
    {
      ParameterSet<U> out;
      for (const auto& [name, t] : tensors_)
        out.tensors().emplace(name, t.template cast<U>());
      for (const auto& [name, s] : stats_)
      {
        BatchNormStats<U> copy;
        copy.mean = s.mean.template cast<U>();
        copy.var = s.var.template cast<U>();
        copy.tracked = s.tracked;
        out.allStats().emplace(name, std::move(copy));
      }
      return out;
    }

  private:
    template<typename Map>
    static auto& lookup(Map& map, const std::string& name, const char* what)
    {
      auto it = map.find(name);
      if (it == map.end())
        throw Error(std::string("unknown ") + what + " '" + name + "'");
      return it->second;
    }

    std::map<std::string, Tensor<T>> tensors_;
    std::map<std::string, BatchNormStats<T>> stats_;
  };

} // namespace demc::ad
