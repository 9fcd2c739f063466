// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/train/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

namespace demc::train {

  namespace {

    constexpr std::string_view kMagic = "DEMC";
    constexpr std::string_view kTrailer = "META";
    const std::string kFirstMoment = "adam.m.";
    const std::string kSecondMoment = "adam.v.";

    void putU8(std::string& out, std::uint8_t v) { out.push_back(char(v)); }

    void putU16(std::string& out, std::uint16_t v)
    {
      out.push_back(char(v & 0xff));
      out.push_back(char(v >> 8));
    }

    void putU32(std::string& out, std::uint32_t v)
    {
      for (int i = 0; i < 4; ++i)
        out.push_back(char((v >> (8 * i)) & 0xff));
    }

    void putString(std::string& out, const std::string& s, const char* what)
    {
      if (s.size() > 0xffff)
        throw CheckpointError(std::string("checkpoint: ") + what + " longer than 65535 bytes");
      putU16(out, std::uint16_t(s.size()));
      out += s;
    }

    class Reader
    {
    public:
      Reader(std::string_view bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

      bool atEnd() const { return pos_ == bytes_.size(); }

      std::string_view take(std::size_t n, const char* what)
      {
        if (bytes_.size() - pos_ < n)
          throw CheckpointError(origin_ + ": truncated while reading " + what + " at byte " + std::to_string(pos_) +
                                " (need " + std::to_string(n) + ", have " + std::to_string(bytes_.size() - pos_) + ")");
        const std::string_view s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
      }

      std::uint32_t u(int width, const char* what)
      {
        const std::string_view s = take(std::size_t(width), what);
        std::uint32_t v = 0;
        for (int i = 0; i < width; ++i)
          v |= std::uint32_t(std::uint8_t(s[std::size_t(i)])) << (8 * i);
        return v;
      }

      std::string string(const char* what) { return std::string(take(u(2, what), what)); }

    private:
      std::string_view bytes_;
      std::string origin_;
      std::size_t pos_ = 0;
    };

    std::string statName(const std::string& layer, const char* field) { return "bn." + layer + "." + field; }

    std::string listNames(const std::vector<std::string>& names)
    {
      constexpr std::size_t kShown = 8;
      std::string out;
      for (std::size_t i = 0; i < names.size() && i < kShown; ++i)
        out += (i ? ", " : "") + names[i];
      if (names.size() > kShown)
        out += ", ... (" + std::to_string(names.size() - kShown) + " more)";
      return out;
    }

    const Tensor<float>& require(const Checkpoint& ckpt, const std::string& name, const ad::Shape& shape)
    {
      const Tensor<float>& t = ckpt.tensors.at(name);
      if (t.shape() != shape)
        throw CheckpointError("checkpoint tensor '" + name + "' has shape " + t.shape().str() + ", model expects " +
                              shape.str());
      return t;
    }

    std::int64_t metaInt(const Checkpoint& ckpt, const std::string& key, std::int64_t fallback)
    {
      const auto it = ckpt.metadata.find(key);
      if (it == ckpt.metadata.end())
        return fallback;
      try
      {
        std::size_t used = 0;
        const long long v = std::stoll(it->second, &used);
        if (used != it->second.size())
          throw std::invalid_argument(key);
        return v;
      }
      catch (const std::exception&)
      {
        throw CheckpointError("checkpoint metadata '" + key + "' is not an integer: '" + it->second + "'");
      }
    }

  } // namespace

  std::string encodeCheckpoint(const Checkpoint& checkpoint)
  {
    std::string out(kMagic);
    putU32(out, checkpoint.version);
    putU32(out, std::uint32_t(checkpoint.tensors.size()));
    for (const auto& [name, t] : checkpoint.tensors)
    {
      putString(out, name, "tensor name");
      putU8(out, 4);
      const ad::Shape& s = t.shape();
      for (int d : {s.n, s.c, s.h, s.w})
        putU32(out, std::uint32_t(d));
      out.reserve(out.size() + 4 * t.size());
      for (float v : t.data())
        putU32(out, std::bit_cast<std::uint32_t>(v));
    }
    out += kTrailer;
    putU32(out, std::uint32_t(checkpoint.metadata.size()));
    for (const auto& [key, value] : checkpoint.metadata)
    {
      putString(out, key, "metadata key");
      putString(out, value, "metadata value");
    }
    return out;
  }

  Checkpoint decodeCheckpoint(std::string_view bytes, const std::string& origin)
  {
    Reader in(bytes, origin);
    if (bytes.size() < kMagic.size() || in.take(kMagic.size(), "magic") != kMagic)
      throw CheckpointError(origin + ": not a checkpoint (bad magic)");
    Checkpoint ckpt;
    ckpt.version = in.u(4, "version");
    if (ckpt.version != kCheckpointVersion)
      throw CheckpointError(origin + ": checkpoint version " + std::to_string(ckpt.version) +
                            " is not supported (this build reads version " + std::to_string(kCheckpointVersion) + ")");
    const std::uint32_t count = in.u(4, "tensor count");
    for (std::uint32_t i = 0; i < count; ++i)
    {
      std::string name = in.string("tensor name");
      const std::uint32_t ndim = in.u(1, "tensor rank");
      if (ndim != 4)
        throw CheckpointError(origin + ": tensor '" + name + "' has rank " + std::to_string(ndim) + ", expected 4");
      int dims[4];
      for (int& d : dims)
      {
        const std::uint32_t v = in.u(4, "tensor dims");
        if (v > 0x7fffffffu)
          throw CheckpointError(origin + ": tensor '" + name + "' has an oversized dimension");
        d = int(v);
      }
      const ad::Shape shape{dims[0], dims[1], dims[2], dims[3]};
      const std::size_t n = shape.numel();
      const std::string_view payload = in.take(4 * n, "tensor payload");
      Tensor<float> t(shape);
      for (std::size_t k = 0; k < n; ++k)
      {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
          bits |= std::uint32_t(std::uint8_t(payload[4 * k + std::size_t(b)])) << (8 * b);
        t[k] = std::bit_cast<float>(bits);
      }
      if (!ckpt.tensors.emplace(std::move(name), std::move(t)).second)
        throw CheckpointError(origin + ": duplicate tensor name");
    }
    if (!in.atEnd())
    {
      if (in.take(kTrailer.size(), "metadata marker") != kTrailer)
        throw CheckpointError(origin + ": unexpected bytes after the tensor records");
      const std::uint32_t entries = in.u(4, "metadata count");
      for (std::uint32_t i = 0; i < entries; ++i)
      {
        std::string key = in.string("metadata key");
        ckpt.metadata[key] = in.string("metadata value");
      }
    }
    if (!in.atEnd())
      throw CheckpointError(origin + ": unexpected bytes after the metadata trailer");
    return ckpt;
  }

  void saveCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint)
  {
    const std::string bytes = encodeCheckpoint(checkpoint);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out)
        throw IoError("cannot create " + tmp.string());
      out.write(bytes.data(), std::streamsize(bytes.size()));
      if (!out)
        throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
      throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }

  Checkpoint loadCheckpoint(const std::filesystem::path& path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw IoError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return decodeCheckpoint(buffer.str(), path.string());
  }

  Checkpoint captureState(const net::DemcNet<float>& model, const Adam<float>* optimizer, std::int64_t iteration,
                          std::uint64_t seed)
  {
    Checkpoint ckpt;
    const auto& params = model.parameters();
    for (const auto& [name, t] : params.tensors())
      ckpt.tensors.emplace(name, t);
    for (const auto& [name, stats] : params.allStats())
    {
      ckpt.tensors.emplace(statName(name, "running_mean"), stats.mean);
      ckpt.tensors.emplace(statName(name, "running_var"), stats.var);
      ckpt.metadata[statName(name, "tracked")] = std::to_string(stats.tracked);
    }
    if (optimizer)
    {
      for (const auto& [name, t] : params.tensors())
      {
        const auto m = optimizer->firstMoments().find(name);
        const auto v = optimizer->secondMoments().find(name);
        ckpt.tensors.emplace(kFirstMoment + name, m != optimizer->firstMoments().end() ? m->second : Tensor<float>(t.shape()));
        ckpt.tensors.emplace(kSecondMoment + name, v != optimizer->secondMoments().end() ? v->second : Tensor<float>(t.shape()));
      }
      ckpt.metadata["adam.steps"] = std::to_string(optimizer->steps());
    }
    ckpt.metadata["variant"] = std::string(net::variantName(model.spec().variant));
    ckpt.metadata["iteration"] = std::to_string(iteration);
    ckpt.metadata["seed"] = std::to_string(seed);
    return ckpt;
  }

  std::int64_t restoreState(const Checkpoint& checkpoint, net::DemcNet<float>& model, Adam<float>* optimizer)
  {
    auto& params = model.parameters();
    std::set<std::string> expected;
    for (const auto& [name, t] : params.tensors())
    {
      expected.insert(name);
      if (optimizer)
      {
        expected.insert(kFirstMoment + name);
        expected.insert(kSecondMoment + name);
      }
    }
    for (const auto& [name, stats] : params.allStats())
    {
      expected.insert(statName(name, "running_mean"));
      expected.insert(statName(name, "running_var"));
    }

    std::vector<std::string> missing;
    std::vector<std::string> unexpected;
    for (const auto& name : expected)
      if (!checkpoint.tensors.contains(name))
        missing.push_back(name);
    for (const auto& [name, t] : checkpoint.tensors)
    {
      const bool optimizerTensor = name.starts_with(kFirstMoment) || name.starts_with(kSecondMoment);
      if (!expected.contains(name) && !(optimizerTensor && !optimizer))
        unexpected.push_back(name);
    }
    if (!missing.empty() || !unexpected.empty())
    {
      std::string msg = "checkpoint does not match model variant " + std::string(net::variantName(model.spec().variant));
      if (const auto it = checkpoint.metadata.find("variant"); it != checkpoint.metadata.end())
        msg += " (checkpoint variant " + it->second + ")";
      if (!missing.empty())
        msg += "; missing " + std::to_string(missing.size()) + ": " + listNames(missing);
      if (!unexpected.empty())
        msg += "; unexpected " + std::to_string(unexpected.size()) + ": " + listNames(unexpected);
      throw CheckpointError(msg);
    }

    // Validate every shape before touching the model.
    for (const auto& [name, t] : params.tensors())
    {
      require(checkpoint, name, t.shape());
      if (optimizer)
      {
        require(checkpoint, kFirstMoment + name, t.shape());
        require(checkpoint, kSecondMoment + name, t.shape());
      }
    }
    for (const auto& [name, stats] : params.allStats())
    {
      require(checkpoint, statName(name, "running_mean"), stats.mean.shape());
      require(checkpoint, statName(name, "running_var"), stats.var.shape());
    }

    for (auto& [name, t] : params.tensors())
      t = checkpoint.tensors.at(name);
    for (auto& [name, stats] : params.allStats())
    {
      stats.mean = checkpoint.tensors.at(statName(name, "running_mean"));
      stats.var = checkpoint.tensors.at(statName(name, "running_var"));
      stats.tracked = metaInt(checkpoint, statName(name, "tracked"), 0);
    }
    if (optimizer)
    {
      optimizer->firstMoments().clear();
      optimizer->secondMoments().clear();
      for (const auto& [name, t] : params.tensors())
      {
        optimizer->firstMoments().emplace(name, checkpoint.tensors.at(kFirstMoment + name));
        optimizer->secondMoments().emplace(name, checkpoint.tensors.at(kSecondMoment + name));
      }
      optimizer->setSteps(metaInt(checkpoint, "adam.steps", 0));
    }
    return metaInt(checkpoint, "iteration", 0);
  }

  net::Variant checkpointVariant(const Checkpoint& checkpoint)
  {
    const auto it = checkpoint.metadata.find("variant");
    if (it == checkpoint.metadata.end())
      throw CheckpointError("checkpoint carries no variant metadata");
    try
    {
      return net::parseVariant(it->second);
    }
    catch (const Error& e)
    {
      throw CheckpointError(std::string("checkpoint variant: ") + e.what());
    }
  }

} // namespace demc::train
