// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "demc/net/pipeline.hpp"

namespace demc::train {

  namespace {

    std::uint64_t splitmix(std::uint64_t x)
    {
      x += 0x9e3779b97f4a7c15ull;
      x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
      x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
      return x ^ (x >> 31);
    }

    // Uniform integer in [0, bound) by rejection; independent of the standard
    // library's distribution algorithms.
    std::size_t uniformIndex(std::mt19937_64& rng, std::size_t bound)
    {
      const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % bound);
      std::uint64_t r;
      do
        r = rng();
      while (r >= limit);
      return std::size_t(r % bound);
    }

    constexpr std::uint64_t kSplitSalt = 0x5eed5911;
    constexpr std::uint64_t kBatchSalt = 0xba7c4;

    struct Batch
    {
      Tensor<float> color;
      Tensor<float> features;
      Tensor<float> reference;
    };

    Batch assemble(std::span<const TrainPatch* const> patches)
    {
      std::vector<Tensor<float>> color, features, reference;
      for (const TrainPatch* p : patches)
      {
        color.push_back(p->noisyGamma);
        features.push_back(p->features);
        reference.push_back(p->reference);
      }
      return {ad::stackBatch<float>(color), ad::stackBatch<float>(features), ad::stackBatch<float>(reference)};
    }

    std::string formatNumber(double v)
    {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return buf;
    }

  } // namespace

  PatchSet buildPatchSet(std::span<const data::Sample> samples, const TrainConfig& config)
  {
    config.validate();
    if (samples.empty())
      throw Error("training needs at least one sample");
    const std::size_t n = samples.size();
    std::size_t holdout = 0;
    if (config.validationFraction > 0.0 && n >= 2)
      holdout = std::clamp<std::size_t>(std::size_t(std::llround(config.validationFraction * double(n))), 1, n - 1);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(splitmix(config.seed ^ kSplitSalt));
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[uniformIndex(rng, i)]);
    std::vector<bool> held(n, false);
    for (std::size_t i = 0; i < holdout; ++i)
      held[order[i]] = true;

    PatchSet set;
    for (std::size_t i = 0; i < n; ++i)
    {
      const data::Sample& s = samples[i];
      if (!s.reference)
        throw Error("sample '" + s.id + "' has no reference image; training needs one");
      if (s.height() < config.patchSize || s.width() < config.patchSize)
        throw ShapeError("sample '" + s.id + "' (" + std::to_string(s.height()) + "x" + std::to_string(s.width()) +
                         ") is smaller than the " + std::to_string(config.patchSize) + " px patch");
      const net::NetworkInput in = net::prepareInput(s, config.gamma);
      data::Sample prepared{s.id, in.noisyGamma, in.features, s.reference};
      auto& dest = held[i] ? set.validation : set.train;
      for (data::Sample& p : data::extractPatches(prepared, config.patchSize, config.patchStride))
        dest.push_back({std::move(p.id), std::move(p.noisy), std::move(p.features), std::move(*p.reference)});
    }
    return set;
  }

  LossLog::LossLog(const std::filesystem::path& path, bool append) : path_(path)
  {
    const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_)
      throw IoError("cannot open loss log " + path.string());
    if (fresh)
      out_ << header() << '\n';
    out_.flush();
  }

  void LossLog::write(const LossRecord& record)
  {
    out_ << format(record) << '\n';
    out_.flush();
    if (!out_)
      throw IoError("write failed for " + path_.string());
  }

  std::string LossLog::header() { return "iteration,lr,train_loss,val_loss"; }

  std::string LossLog::format(const LossRecord& record)
  {
    return std::to_string(record.iteration) + "," + formatNumber(record.lr) + "," + formatNumber(record.trainLoss) +
           "," + (record.validationLoss ? formatNumber(*record.validationLoss) : std::string());
  }

  Trainer::Trainer(net::ModelSpec spec, TrainConfig config, PatchSet data)
    : model_(std::move(spec)), config_(std::move(config)), data_(std::move(data))
  {
    config_.validate();
    if (data_.train.empty())
      throw Error("training needs at least one training patch");
    adam_.attach(model_.parameters());
  }

  std::vector<std::size_t> Trainer::batchIndices(std::int64_t iteration) const
  {
    const std::size_t n = data_.train.size();
    const std::size_t b = std::size_t(config_.batchSize);
    std::mt19937_64 rng(splitmix(splitmix(config_.seed ^ kBatchSalt) ^ std::uint64_t(iteration)));
    std::vector<std::size_t> picked;
    if (b >= n && b % n == 0)
    {
      // Every patch equally often.
      for (std::size_t r = 0; r < b / n; ++r)
        for (std::size_t i = 0; i < n; ++i)
          picked.push_back(i);
      return picked;
    }
    if (b <= n)
    {
      // Partial Fisher-Yates: distinct patches.
      std::vector<std::size_t> pool(n);
      std::iota(pool.begin(), pool.end(), 0);
      for (std::size_t i = 0; i < b; ++i)
      {
        std::swap(pool[i], pool[i + uniformIndex(rng, n - i)]);
        picked.push_back(pool[i]);
      }
      return picked;
    }
    for (std::size_t i = 0; i < b; ++i)
      picked.push_back(uniformIndex(rng, n));
    return picked;
  }

  LossRecord Trainer::step()
  {
    if (done())
      throw Error("training already reached " + std::to_string(config_.totalIterations) + " iterations");
    const std::int64_t it = iteration_;
    const auto indices = batchIndices(it);
    std::vector<const TrainPatch*> patches;
    for (std::size_t i : indices)
      patches.push_back(&data_.train[i]);

    auto batchIds = [&] {
      std::string ids;
      for (const TrainPatch* p : patches)
        ids += (ids.empty() ? "" : ", ") + p->id;
      return ids;
    };

    LossRecord record;
    record.iteration = it;
    record.lr = lrSchedule(it, config_);
    try
    {
      const Batch batch = assemble(patches);
      ad::Graph<float> g(&model_.parameters());
      const net::ForwardOutput out =
        model_.build(g, g.input(batch.color), g.input(batch.features), net::Mode::Train);
      const ad::NodeRef loss = net::hdrLoss(g, out.output, g.input(batch.reference), config_.gamma, config_.epsLoss);
      record.trainLoss = g.value(loss)[0];
      if (!std::isfinite(record.trainLoss))
        throw NumericError("loss is " + formatNumber(record.trainLoss));
      const auto grads = g.backward(loss);
      for (const auto& [name, t] : grads)
        if (!t.allFinite())
          throw NumericError("gradient of " + name + " is not finite");
      adam_.step(model_.parameters(), grads, record.lr);
    }
    catch (const NumericError& e)
    {
      throw NumericError("training aborted at iteration " + std::to_string(it) + ": " + e.what() +
                         "; batch: " + batchIds());
    }
    ++iteration_;
    return record;
  }

  double Trainer::evaluate(std::span<const TrainPatch> patches)
  {
    if (patches.empty())
      throw Error("cannot evaluate an empty patch list");
    double weighted = 0.0;
    std::size_t count = 0;
    const std::size_t b = std::size_t(config_.batchSize);
    for (std::size_t start = 0; start < patches.size(); start += b)
    {
      std::vector<const TrainPatch*> group;
      for (std::size_t i = start; i < std::min(patches.size(), start + b); ++i)
        group.push_back(&patches[i]);
      const Batch batch = assemble(group);
      ad::Graph<float> g(&model_.parameters());
      const net::ForwardOutput out = model_.build(g, g.input(batch.color), g.input(batch.features), net::Mode::Infer);
      const ad::NodeRef loss = net::hdrLoss(g, out.output, g.input(batch.reference), config_.gamma, config_.epsLoss);
      // The loss is a per-pixel mean, so weight each batch by its size.
      weighted += g.value(loss)[0] * double(group.size());
      count += group.size();
    }
    return weighted / double(count);
  }

  std::optional<double> Trainer::validationLoss()
  {
    if (data_.validation.empty())
      return std::nullopt;
    return evaluate(data_.validation);
  }

  void Trainer::run(const std::function<void(const LossRecord&)>& onRecord,
                    const std::function<void(Trainer&)>& onCheckpoint, std::int64_t stopAt)
  {
    while (!done() && iteration_ < stopAt)
    {
      LossRecord record = step();
      const bool last = done();
      if (last || (config_.validateEvery > 0 && iteration_ % config_.validateEvery == 0))
        record.validationLoss = validationLoss();
      if (onRecord)
        onRecord(record);
      if (onCheckpoint && config_.checkpointEvery > 0 && iteration_ % config_.checkpointEvery == 0 && !last)
        onCheckpoint(*this);
    }
  }

  Checkpoint Trainer::checkpoint() const
  {
    Checkpoint ckpt = captureState(model_, &adam_, iteration_, config_.seed);
    ckpt.metadata["total_iterations"] = std::to_string(config_.totalIterations);
    return ckpt;
  }

  void Trainer::restore(const Checkpoint& checkpoint)
  {
    const std::int64_t it = restoreState(checkpoint, model_, &adam_);
    if (const auto seed = checkpoint.metadata.find("seed");
        seed != checkpoint.metadata.end() && seed->second != std::to_string(config_.seed))
      throw CheckpointError("checkpoint was trained with seed " + seed->second + ", configuration has seed " +
                            std::to_string(config_.seed));
    if (it < 0 || it > config_.totalIterations)
      throw CheckpointError("checkpoint iteration " + std::to_string(it) + " lies outside [0, " +
                            std::to_string(config_.totalIterations) + "]");
    iteration_ = it;
  }

} // namespace demc::train
