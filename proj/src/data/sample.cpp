// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/data/sample.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "demc/ad/runtime.hpp"

namespace demc::data {

  namespace fs = std::filesystem;

  namespace {

    void checkColor(const Image& image, const char* what)
    {
      for (float v : image.data())
        if (!std::isfinite(v) || v < 0.0f)
          throw NumericError(std::string(what) + " contains a negative or non-finite value");
    }

    Image readPlane(const fs::path& dir, const char* file)
    {
      const fs::path path = dir / file;
      if (!fs::exists(path))
        throw IoError("missing " + path.string());
      return readPfm(path);
    }

    void expectShape(const Image& image, const ad::Shape& expected, const std::string& what)
    {
      if (image.shape() != expected)
        throw ShapeError(what + " has shape " + image.shape().str() + " but " + expected.str() + " was expected");
    }

  } // namespace

  void validate(const Sample& sample)
  {
    const auto& s = sample.noisy.shape();
    if (s.n != 1 || s.c != kColorChannels || s.h < 1 || s.w < 1)
      throw ShapeError("noisy color must be 1x3xHxW, got " + s.str());
    expectShape(sample.features, {1, kFeatureChannels, s.h, s.w}, "feature stack");
    checkColor(sample.noisy, "noisy color");
    if (!sample.features.allFinite())
      throw NumericError("feature stack contains a non-finite value");
    if (sample.reference)
    {
      expectShape(*sample.reference, s, "reference");
      checkColor(*sample.reference, "reference");
    }
  }

  Sample loadSample(const fs::path& dir)
  {
    Sample sample;
    sample.id = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    sample.noisy = readPlane(dir, kColorFile);
    const auto& s = sample.noisy.shape();
    if (s.c != kColorChannels)
      throw ShapeError((dir / kColorFile).string() + " must have 3 channels");

    sample.features = Image({1, kFeatureChannels, s.h, s.w});
    for (std::size_t i = 0; i < kFeatureFiles.size(); ++i)
    {
      const Image plane = readPlane(dir, kFeatureFiles[i]);
      expectShape(plane, s, (dir / kFeatureFiles[i]).string());
      std::copy(plane.data().begin(), plane.data().end(), sample.features.plane(0, int(i) * 3));
    }
    if (fs::exists(dir / kReferenceFile))
    {
      Image reference = readPfm(dir / kReferenceFile);
      expectShape(reference, s, (dir / kReferenceFile).string());
      sample.reference = std::move(reference);
    }
    validate(sample);
    return sample;
  }

  void saveSample(const fs::path& dir, const Sample& sample)
  {
    validate(sample);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
      throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    writePfm(dir / kColorFile, sample.noisy);
    for (std::size_t i = 0; i < kFeatureFiles.size(); ++i)
      writePfm(dir / kFeatureFiles[i], sample.features.sliceChannels(int(i) * 3, 3));
    if (sample.reference)
      writePfm(dir / kReferenceFile, *sample.reference);
  }

  std::vector<fs::path> readManifest(const fs::path& path)
  {
    std::ifstream in(path);
    if (!in)
      throw IoError("cannot open manifest " + path.string());
    std::vector<fs::path> entries;
    std::string line;
    while (std::getline(in, line))
    {
      const auto hash = line.find('#');
      if (hash != std::string::npos)
        line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos)
        continue;
      const auto last = line.find_last_not_of(" \t\r");
      fs::path entry = line.substr(first, last - first + 1);
      entries.push_back(entry.is_absolute() ? entry : path.parent_path() / entry);
    }
    return entries;
  }

  void writeManifest(const fs::path& path, const std::vector<fs::path>& entries)
  {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
      throw IoError("cannot create manifest " + path.string());
    for (const auto& entry : entries)
      out << entry.generic_string() << '\n';
    if (!out)
      throw IoError("write failed for " + path.string());
  }

  std::vector<Sample> loadSamples(const std::vector<std::filesystem::path>& dirs)
  {
    std::vector<Sample> samples(dirs.size());
    const unsigned threads = std::min<unsigned>(ad::workerThreads(), unsigned(std::max<std::size_t>(dirs.size(), 1)));
    if (threads <= 1)
    {
      for (std::size_t i = 0; i < dirs.size(); ++i)
        samples[i] = loadSample(dirs[i]);
      return samples;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::size_t failedAt = dirs.size();
    std::mutex lock;
    auto worker = [&] {
      for (std::size_t i = next++; i < dirs.size(); i = next++)
      {
        try
        {
          samples[i] = loadSample(dirs[i]);
        }
        catch (...)
        {
          // Report the first failing entry in manifest order.
          std::lock_guard guard(lock);
          if (i < failedAt)
          {
            failedAt = i;
            failure = std::current_exception();
          }
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(worker);
    for (auto& t : pool)
      t.join();
    if (failure)
      std::rethrow_exception(failure);
    return samples;
  }

} // namespace demc::data
