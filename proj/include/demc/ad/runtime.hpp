// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace demc::ad {

  // Kernels always reduce in a fixed order. Deterministic mode additionally
  // keeps auxiliary work (sample loading) on the calling thread.
  void setDeterministic(bool enabled);

  bool deterministic();

  // Threads available to auxiliary work: 1 in deterministic mode.
  unsigned workerThreads();

} // namespace demc::ad
