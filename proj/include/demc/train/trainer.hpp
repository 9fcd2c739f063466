// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demc/data/sample.hpp"
#include "demc/net/demc_net.hpp"
#include "demc/train/adam.hpp"
#include "demc/train/checkpoint.hpp"
#include "demc/train/config.hpp"

namespace demc::train {

  // Network-domain input and HDR target of one training patch.
  struct TrainPatch
  {
    std::string id;
    Tensor<float> noisyGamma; // 1 x 3 x p x p
    Tensor<float> features;   // 1 x 12 x p x p, z-scored over the full image
    Tensor<float> reference;  // 1 x 3 x p x p, linear HDR
  };

  struct PatchSet
  {
    std::vector<TrainPatch> train;
    std::vector<TrainPatch> validation;
  };

  // Holds out round(fraction * n) whole samples (at least one when fraction > 0
  // and n >= 2) chosen by the seed, then cuts both sides into patches. Every
  // sample needs a reference. Inputs are not modified.
  PatchSet buildPatchSet(std::span<const data::Sample> samples, const TrainConfig& config);

  struct LossRecord
  {
    std::int64_t iteration = 0;
    double lr = 0.0;
    double trainLoss = 0.0;
    std::optional<double> validationLoss;
  };

  // CSV loss log: iteration,lr,train_loss,val_loss (val_loss empty when not evaluated).
  class LossLog
  {
  public:
    LossLog(const std::filesystem::path& path, bool append);
    void write(const LossRecord& record);

    static std::string header();
    static std::string format(const LossRecord& record);

  private:
    std::ofstream out_;
    std::filesystem::path path_;
  };

  class Trainer
  {
  public:
    Trainer(net::ModelSpec spec, TrainConfig config, PatchSet data);

    net::DemcNet<float>& model() { return model_; }
    Adam<float>& optimizer() { return adam_; }
    const TrainConfig& config() const { return config_; }
    const PatchSet& data() const { return data_; }
    std::int64_t iteration() const { return iteration_; }
    bool done() const { return iteration_ >= config_.totalIterations; }

    // Training patches used at an iteration; depends only on (seed, iteration).
    std::vector<std::size_t> batchIndices(std::int64_t iteration) const;

    // One optimization step. Throws NumericError naming the iteration and the
    // batch patch ids if the loss or any intermediate becomes non-finite.
    LossRecord step();

    // Loss over patches in inference mode, in batches of the configured size.
    double evaluate(std::span<const TrainPatch> patches);
    std::optional<double> validationLoss();

    // Steps until done() or until the iteration counter reaches stopAt.
    // onCheckpoint fires after every checkpointEvery-th iteration.
    void run(const std::function<void(const LossRecord&)>& onRecord,
             const std::function<void(Trainer&)>& onCheckpoint = {},
             std::int64_t stopAt = std::numeric_limits<std::int64_t>::max());

    Checkpoint checkpoint() const;
    void restore(const Checkpoint& checkpoint);

  private:
    net::DemcNet<float> model_;
    TrainConfig config_;
    PatchSet data_;
    Adam<float> adam_;
    std::int64_t iteration_ = 0;
  };

} // namespace demc::train
