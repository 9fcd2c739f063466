// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "demc/net/demc_net.hpp"
#include "demc/train/adam.hpp"

namespace demc::train {

  inline constexpr std::uint32_t kCheckpointVersion = 1;

  // Binary layout, little-endian throughout:
  //   "DEMC", u32 version, u32 tensor count,
  //   per tensor: u16 name length, name, u8 ndim (4), u32 dims[4], f32 payload;
  //   trailer: "META", u32 entry count, per entry: u16 key length, key,
  //   u16 value length, value.
  // Optimizer moments are stored as "adam.m.<name>" / "adam.v.<name>" and batch
  // norm running statistics as "bn.<name>.running_mean" / ".running_var".
  struct Checkpoint
  {
    std::uint32_t version = kCheckpointVersion;
    std::map<std::string, Tensor<float>> tensors;
    std::map<std::string, std::string> metadata;
  };

  std::string encodeCheckpoint(const Checkpoint& checkpoint);
  // Throws CheckpointError on bad magic, version, truncation or trailing bytes.
  Checkpoint decodeCheckpoint(std::string_view bytes, const std::string& origin = "checkpoint");

  void saveCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
  Checkpoint loadCheckpoint(const std::filesystem::path& path);

  // Model parameters, batch-norm statistics and, when given, optimizer state.
  // The batch sampler is counter-based, so seed and iteration fully describe it.
  Checkpoint captureState(const net::DemcNet<float>& model, const Adam<float>* optimizer, std::int64_t iteration,
                          std::uint64_t seed);

  // Copies a checkpoint into the model (and optimizer). Throws CheckpointError
  // naming every missing and unexpected tensor, or any shape disagreement.
  // Optimizer tensors are ignored when no optimizer is given.
  // Returns the stored iteration.
  std::int64_t restoreState(const Checkpoint& checkpoint, net::DemcNet<float>& model, Adam<float>* optimizer);

  // Variant recorded in the metadata trailer.
  net::Variant checkpointVariant(const Checkpoint& checkpoint);

} // namespace demc::train
