// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/ad/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace demc::ad {

  namespace {
    std::atomic<bool> deterministicMode{false};
  }

  void setDeterministic(bool enabled)
  {
    deterministicMode = enabled;
  }

  bool deterministic()
  {
    return deterministicMode;
  }

  unsigned workerThreads()
  {
    if (deterministicMode)
      return 1;
    return std::max(1u, std::thread::hardware_concurrency());
  }

} // namespace demc::ad
