// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/train/adam.hpp"

#include <cmath>

namespace demc::train {

  namespace {

    template<typename T>
    Tensor<T>& momentFor(std::map<std::string, Tensor<T>>& moments, const std::string& name, const ad::Shape& shape,
                         const char* which)
    {
      auto it = moments.find(name);
      if (it == moments.end())
        return moments.emplace(name, Tensor<T>(shape)).first->second;
      if (it->second.shape() != shape)
        throw ShapeError(std::string("adam: ") + which + " moment of '" + name + "' has shape " +
                         it->second.shape().str() + ", parameter has " + shape.str());
      return it->second;
    }

  } // namespace

  template<typename T>
  void Adam<T>::attach(const ParameterSet<T>& params)
  {
    for (const auto& [name, p] : params.tensors())
    {
      momentFor(m_, name, p.shape(), "first");
      momentFor(v_, name, p.shape(), "second");
    }
  }

  template<typename T>
  void Adam<T>::step(ParameterSet<T>& params, const GradientMap<T>& grads, double lr)
  {
    for (const auto& [name, g] : grads)
    {
      const Tensor<T>& p = params.at(name);
      if (g.shape() != p.shape())
        throw ShapeError("adam: gradient of '" + name + "' has shape " + g.shape().str() + ", parameter has " +
                         p.shape().str());
      momentFor(m_, name, p.shape(), "first");
      momentFor(v_, name, p.shape(), "second");
    }

    ++steps_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, double(steps_));
    const double c2 = 1.0 - std::pow(b2, double(steps_));
    for (const auto& [name, g] : grads)
    {
      T* p = params.at(name).ptr();
      T* m = m_.at(name).ptr();
      T* v = v_.at(name).ptr();
      const T* gp = g.ptr();
      const std::size_t n = g.size();
      const double a1 = 1.0 - b1, a2 = 1.0 - b2, eps = config_.eps;
      const double rate = lr / c1, rc2 = 1.0 / std::sqrt(c2);
      for (std::size_t i = 0; i < n; ++i)
      {
        const double gi = gp[i];
        const double mi = b1 * double(m[i]) + a1 * gi;
        const double vi = b2 * double(v[i]) + a2 * gi * gi;
        m[i] = T(mi);
        v[i] = T(vi);
        p[i] = T(double(p[i]) - rate * mi / (std::sqrt(vi) * rc2 + eps));
      }
    }
  }

  template class Adam<float>;
  template class Adam<double>;

} // namespace demc::train
