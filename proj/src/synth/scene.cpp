// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/synth/scene.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <vector>

namespace demc::synth {

  namespace fs = std::filesystem;

  namespace {

    constexpr std::uint64_t kNoisyStream = 1;
    constexpr std::uint64_t kReferenceStream = 2;
    // Above this many samples the sum of exponentials is drawn as one Gamma variate.
    constexpr int kDirectSampleLimit = 256;
    constexpr double kIndirectWeight = 0.2;

    std::uint64_t mix(std::uint64_t z)
    {
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      return z ^ (z >> 31);
    }

    std::uint64_t hashKey(std::initializer_list<std::uint64_t> parts)
    {
      std::uint64_t h = 0x6a09e667f3bcc909ull;
      for (std::uint64_t p : parts)
        h = mix(h ^ (p + 0x9e3779b97f4a7c15ull));
      return h;
    }

    // SplitMix64 as a UniformRandomBitGenerator.
    struct SplitMix
    {
      using result_type = std::uint64_t;
      std::uint64_t state;

      static constexpr result_type min() { return 0; }
      static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

      result_type operator()()
      {
        state += 0x9e3779b97f4a7c15ull;
        return mix(state);
      }
    };

    using Color = std::array<double, 3>;

    struct Texture
    {
      Color base{};
      Color end{};
      bool gradient = false;
      double dirX = 1.0, dirY = 0.0;

      Color at(double u, double v) const
      {
        if (!gradient)
          return base;
        const double t = std::clamp(0.5 + 0.5 * (dirX * u + dirY * v), 0.0, 1.0);
        return {base[0] + t * (end[0] - base[0]), base[1] + t * (end[1] - base[1]), base[2] + t * (end[2] - base[2])};
      }
    };

    struct Primitive
    {
      bool disk = false;
      double cx = 0, cy = 0; // center, pixels
      double rx = 0, ry = 0; // half extents (rect) or radius in rx (disk)
      double depth = 0;
      double bulge = 0;      // dome height for disks
      double tiltX = 0, tiltY = 0;
      Texture texture;

      // Local coordinates in [-1, 1] when inside.
      bool contains(double x, double y, double& u, double& v) const
      {
        u = (x - cx) / rx;
        v = (y - cy) / (disk ? rx : ry);
        return disk ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
      }

      // Height-field normal and height offset at local (u, v).
      std::array<double, 4> surface(double u, double v) const
      {
        double gx = tiltX, gy = tiltY, height = tiltX * u * rx + tiltY * v * ry;
        if (disk)
        {
          const double r2 = std::min(u * u + v * v, 1.0);
          height = bulge * rx * std::sqrt(1.0 - r2);
          const double denom = std::sqrt(std::max(1.0 - r2, 1e-4));
          gx = -bulge * u / denom;
          gy = -bulge * v / denom;
        }
        const double norm = std::sqrt(gx * gx + gy * gy + 1.0);
        return {-gx / norm, -gy / norm, 1.0 / norm, height};
      }
    };

    Color randomColor(std::mt19937_64& rng)
    {
      std::uniform_real_distribution<double> d(0.05, 0.95);
      return {d(rng), d(rng), d(rng)};
    }

    Texture randomTexture(std::mt19937_64& rng)
    {
      Texture t;
      t.base = randomColor(rng);
      t.gradient = std::uniform_real_distribution<double>()(rng) < 0.5;
      if (t.gradient)
      {
        t.end = randomColor(rng);
        const double angle = std::uniform_real_distribution<double>(0.0, 2.0 * M_PI)(rng);
        t.dirX = std::cos(angle);
        t.dirY = std::sin(angle);
      }
      return t;
    }

    std::array<double, 3> normalized(std::array<double, 3> v)
    {
      const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      return {v[0] / n, v[1] / n, v[2] / n};
    }

  } // namespace

  void SceneRecipe::validate() const
  {
    if (height < 1 || width < 1)
      throw Error("scene resolution must be positive");
    if (primitives < 0)
      throw Error("primitive count must be non-negative");
    if (sppNoisy < 1)
      throw Error("spp_noisy must be at least 1");
    if (sppReference < sppNoisy)
      throw Error("spp_reference must be at least spp_noisy");
    if (light)
    {
      const auto& l = *light;
      const double n = std::sqrt(l[0] * l[0] + l[1] * l[1] + l[2] * l[2]);
      if (!(std::abs(n - 1.0) < 1e-6))
        throw Error("light direction must be a unit vector");
    }
  }

  AnalyticScene buildScene(const SceneRecipe& recipe)
  {
    recipe.validate();
    std::mt19937_64 rng(hashKey({recipe.seed, 0x5ce7e}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double h = recipe.height, w = recipe.width;

    AnalyticScene scene;
    scene.light = recipe.light.value_or(
      normalized({unit(rng) * 1.2 - 0.6, unit(rng) * 1.2 - 0.6, 0.6 + 0.4 * unit(rng)}));

    Texture background = randomTexture(rng);
    std::vector<Primitive> prims(std::size_t(recipe.primitives));
    for (std::size_t i = 0; i < prims.size(); ++i)
    {
      Primitive& p = prims[i];
      p.disk = unit(rng) < 0.5;
      p.cx = unit(rng) * w;
      p.cy = unit(rng) * h;
      const double scale = std::min(h, w);
      p.rx = scale * (0.08 + 0.25 * unit(rng));
      p.ry = scale * (0.08 + 0.25 * unit(rng));
      p.depth = 1.0 + double(i);
      p.bulge = 0.3 + 0.9 * unit(rng);
      p.tiltX = 0.6 * (unit(rng) - 0.5);
      p.tiltY = 0.6 * (unit(rng) - 0.5);
      p.texture = randomTexture(rng);
    }

    const int H = recipe.height, W = recipe.width;
    scene.radiance = data::Image({1, 3, H, W});
    scene.features = data::Image({1, data::kFeatureChannels, H, W});
    const auto& l = scene.light;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
      {
        const double px = x + 0.5, py = y + 0.5;
        // Topmost covering primitive and the one beneath it.
        int top = -1, below = -1;
        double tu = 0, tv = 0, bu = 0, bv = 0;
        for (int i = int(prims.size()) - 1; i >= 0 && below < 0; --i)
        {
          double u, v;
          if (!prims[std::size_t(i)].contains(px, py, u, v))
            continue;
          if (top < 0)
          {
            top = i;
            tu = u;
            tv = v;
          }
          else
          {
            below = i;
            bu = u;
            bv = v;
          }
        }
        const double gu = 2.0 * px / w - 1.0, gv = 2.0 * py / h - 1.0;
        std::array<double, 4> surf{0.0, 0.0, 1.0, 0.0};
        Color albedo1 = background.at(gu, gv), albedo2 = albedo1;
        double depth = 0.0;
        if (top >= 0)
        {
          const Primitive& p = prims[std::size_t(top)];
          surf = p.surface(tu, tv);
          albedo1 = p.texture.at(tu, tv);
          depth = p.depth;
          albedo2 = below >= 0 ? prims[std::size_t(below)].texture.at(bu, bv) : background.at(gu, gv);
        }
        const double shade = std::max(0.0, surf[0] * l[0] + surf[1] * l[1] + surf[2] * l[2]);
        const double world[3] = {px / w * 10.0, py / h * 10.0, depth + surf[3] / std::min(h, w) * 10.0};
        for (int c = 0; c < 3; ++c)
        {
          scene.radiance.at(0, c, y, x) = float(albedo1[std::size_t(c)] * shade + kIndirectWeight * albedo2[std::size_t(c)]);
          scene.features.at(0, c, y, x) = float(surf[std::size_t(c)]);
          scene.features.at(0, 3 + c, y, x) = float(world[c]);
          scene.features.at(0, 6 + c, y, x) = float(albedo1[std::size_t(c)]);
          scene.features.at(0, 9 + c, y, x) = float(albedo2[std::size_t(c)]);
        }
      }
    return scene;
  }

  data::Image renderNoisy(const data::Image& radiance, std::uint64_t seed, std::uint64_t stream, int spp)
  {
    if (spp < 1)
      throw Error("spp must be at least 1");
    data::Image out(radiance.shape());
    for (std::size_t i = 0; i < radiance.size(); ++i)
    {
      const double mean = radiance[i];
      if (!(mean > 0.0))
        continue;
      SplitMix engine{hashKey({seed, stream, i})};
      double total = 0.0;
      if (spp <= kDirectSampleLimit)
      {
        std::exponential_distribution<double> draw(1.0 / mean);
        for (int s = 0; s < spp; ++s)
          total += draw(engine);
      }
      else
      {
        total = std::gamma_distribution<double>(double(spp), mean)(engine);
      }
      out[i] = float(total / spp);
    }
    return out;
  }

  data::Sample generateScene(const SceneRecipe& recipe)
  {
    AnalyticScene scene = buildScene(recipe);
    data::Sample sample;
    sample.noisy = renderNoisy(scene.radiance, recipe.seed, kNoisyStream, recipe.sppNoisy);
    sample.reference = renderNoisy(scene.radiance, recipe.seed, kReferenceStream, recipe.sppReference);
    sample.features = std::move(scene.features);
    return sample;
  }

  fs::path generateDataset(const fs::path& outDir, int scenes, std::uint64_t baseSeed, const SceneRecipe& defaults)
  {
    if (scenes < 1)
      throw Error("scene count must be at least 1");
    defaults.validate();
    std::error_code ec;
    fs::create_directories(outDir, ec);
    if (ec)
      throw IoError("cannot create " + outDir.string() + ": " + ec.message());
    std::vector<fs::path> entries;
    for (int i = 0; i < scenes; ++i)
    {
      SceneRecipe recipe = defaults;
      recipe.seed = baseSeed + std::uint64_t(i);
      char name[32];
      std::snprintf(name, sizeof name, "scene_%03d", i);
      data::Sample sample = generateScene(recipe);
      sample.id = name;
      data::saveSample(outDir / name, sample);
      entries.emplace_back(name);
    }
    const fs::path manifest = outDir / "manifest.txt";
    data::writeManifest(manifest, entries);
    return manifest;
  }

} // namespace demc::synth
