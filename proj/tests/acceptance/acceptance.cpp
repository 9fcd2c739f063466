// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance runner: one PASS/FAIL line per criterion.
//   demc_acceptance [--work-dir DIR] [criterion ...]
// With no criterion names every criterion runs in order.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "demc/ad/losses.hpp"
#include "demc/ad/runtime.hpp"
#include "demc/data/pfm.hpp"
#include "demc/data/transforms.hpp"
#include "demc/metrics/evaluate.hpp"
#include "demc/net/gradient_suite.hpp"
#include "demc/net/pipeline.hpp"
#include "demc/synth/scene.hpp"
#include "demc/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace demc;
using Clock = std::chrono::steady_clock;

namespace {

  struct Outcome
  {
    bool pass = false;
    std::string detail;
  };

  struct Context
  {
    fs::path workDir;
  };

  std::string fmt(const char* format, double v)
  {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
  }

  double seconds(Clock::time_point since)
  {
    return std::chrono::duration<double>(Clock::now() - since).count();
  }

  void note(const std::string& text)
  {
    std::cerr << "  " << text << std::endl;
  }

  std::string slurp(const fs::path& p)
  {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  std::vector<data::Sample> makeScenes(int count, int size, std::uint64_t baseSeed)
  {
    std::vector<data::Sample> out;
    for (int i = 0; i < count; ++i)
    {
      synth::SceneRecipe r;
      r.seed = baseSeed + std::uint64_t(i);
      r.height = size;
      r.width = size;
      out.push_back(synth::generateScene(r));
      char id[32];
      std::snprintf(id, sizeof id, "scene_%03d", i);
      out.back().id = id;
    }
    return out;
  }

  template<typename T>
  ad::Tensor<T> randomTensor(ad::Shape shape, std::uint64_t seed, double lo, double hi)
  {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    ad::Tensor<T> t(shape);
    for (auto& v : t.data())
      v = T(dist(rng));
    return t;
  }

  // Arbitrary finite float bit patterns: any sign, subnormals, values far above 1.
  data::Image randomBits(ad::Shape shape, std::mt19937_64& rng)
  {
    data::Image t(shape);
    for (auto& v : t.data())
      do
        v = std::bit_cast<float>(std::uint32_t(rng()));
      while (!std::isfinite(v));
    return t;
  }

  // Criteria

  Outcome gradientSuite(const Context&)
  {
    const auto start = Clock::now();
    const auto entries = net::runGradientSuite();
    const double elapsed = seconds(start);
    bool pass = elapsed < 120.0;
    double worstOp = 0.0, model = 0.0;
    std::string failed;
    for (const auto& e : entries)
    {
      note(e.name + " " + fmt("%.3e", e.error));
      if (e.name == net::kEndToEndName)
        model = e.error;
      else
        worstOp = std::max(worstOp, e.error);
      if (!e.passed())
      {
        pass = false;
        failed += " " + e.name;
      }
    }
    return {pass, std::to_string(entries.size() - 1) + " ops max rel err " + fmt("%.2e", worstOp) +
                    " (limit 1e-4), end-to-end " + fmt("%.2e", model) + " (limit 1e-3), " + fmt("%.1f", elapsed) +
                    " s (limit 120)" + (failed.empty() ? "" : "; failed:" + failed)};
  }

  Outcome shapeLaw(const Context&)
  {
    net::DemcNet<float> model(net::makeSpec(net::Variant::DEMC, 1));
    ad::Graph<float> g(&model.parameters());
    const auto color = randomTensor<float>({1, 3, 128, 128}, 1, 0.0, 1.0);
    const auto features = randomTensor<float>({1, 12, 128, 128}, 2, -1.5, 1.5);
    const auto out = model.build(g, g.input(color), g.input(features), net::Mode::Infer);
    const ad::Shape latent = g.value(out.latent).shape();
    const ad::Shape output = g.value(out.output).shape();
    const bool pass = latent == ad::Shape{1, 512, 4, 4} && output == ad::Shape{1, 3, 128, 128};
    return {pass, "latent " + latent.str() + ", output " + output.str()};
  }

  Outcome skipInitIdentity(const Context&)
  {
    net::DemcNet<float> model(net::makeSpec(net::Variant::DEMC, 2));
    ad::Graph<float> g(&model.parameters());
    const auto color = randomTensor<float>({1, 3, 128, 128}, 3, 0.0, 1.0);
    const auto features = randomTensor<float>({1, 12, 128, 128}, 4, -1.5, 1.5);
    const auto out = model.build(g, g.input(color), g.input(features), net::Mode::Infer);

    // Walk the decoder again, checking every fused level against relu(h_D + h_Ef + h_Eh).
    std::size_t checked = 0, mismatched = 0;
    ad::NodeRef h = out.latent;
    for (int k = 0; k < 5; ++k)
    {
      const std::string level = std::to_string(k + 1);
      h = g.deconv2d(h, g.parameter("dec.up" + level + ".weight"), g.parameter("dec.up" + level + ".bias"));
      const ad::NodeRef ef = out.featureTaps[std::size_t(4 - k)];
      const ad::NodeRef eh = out.hdrTaps[std::size_t(4 - k)];
      const ad::NodeRef taps[] = {h, ef, eh};
      const ad::NodeRef fused = net::skipFuse(g, "dec.fuse" + level, taps);
      const auto& d = g.value(h);
      const auto& f = g.value(ef);
      const auto& e = g.value(eh);
      const auto& y = g.value(fused);
      for (std::size_t i = 0; i < y.size(); ++i, ++checked)
        if (y[i] != std::max((d[i] + f[i]) + e[i], 0.0f))
          ++mismatched;
      h = fused;
    }
    const auto& rebuilt = g.value(g.relu(g.conv2d(h, g.parameter("dec.out.weight"), g.parameter("dec.out.bias"), 1, 1)));
    const bool sameOutput = rebuilt.identical(g.value(out.output));
    return {mismatched == 0 && sameOutput, std::to_string(checked) + " fused values over 5 levels, " +
                                             std::to_string(mismatched) + " differ from relu(sum); decoder output " +
                                             (sameOutput ? "reproduced" : "NOT reproduced")};
  }

  Outcome gammaAndRelMse(const Context&)
  {
    double worst = 0.0;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> logx(-6.0, 4.0);
    for (int i = 0; i < 100000; ++i)
    {
      const double x = std::pow(10.0, logx(rng));
      const double back = data::gammaInverse(data::gammaForward(x));
      worst = std::max(worst, std::abs(back - x) / x);
    }
    const data::Image img({1, 3, 64, 64}, 0.37f);
    const double imgErr = std::abs(double(data::gammaInverse(data::gammaForward(img))[17]) - 0.37f) / 0.37;
    worst = std::max(worst, imgErr);
    const data::Image pred({1, 3, 1, 1}, std::vector<float>{0.9f, 1.0f, 1.0f});
    const data::Image ref({1, 3, 1, 1}, 1.0f);
    const double rel = ad::relMse(pred, ref, 1e-3);
    const bool pass = worst <= 1e-6 && std::abs(rel - 0.009990) <= 1e-6;
    return {pass, "gamma round-trip max rel err " + fmt("%.2e", worst) + "; single-pixel RelMSE " +
                    fmt("%.9f", rel) + " (expected 0.009990)"};
  }

  // Counts anchors on the stride grid; flush edge anchors come on top of these.
  Outcome patchCounts(const Context&)
  {
    const std::pair<int, int> sizes[] = {{128, 128}, {128, 208}, {720, 1280}};
    const std::size_t expected[] = {1, 2, 120};
    bool pass = true;
    std::string detail;
    for (int i = 0; i < 3; ++i)
    {
      const auto [h, w] = sizes[i];
      data::Sample s{"s", data::Image({1, 3, h, w}, 1.0f), data::Image({1, 12, h, w}, 0.0f), std::nullopt};
      const auto patches = data::extractPatches(s, 128, 80);
      std::size_t regular = 0;
      for (const auto& p : patches)
      {
        int y = 0, x = 0;
        std::sscanf(p.id.c_str() + p.id.find('@') + 1, "%d,%d", &y, &x);
        regular += (y % 80 == 0 && x % 80 == 0) ? 1 : 0;
      }
      pass = pass && regular == expected[i];
      detail += (i ? ", " : "") + std::to_string(w) + "x" + std::to_string(h) + " -> " + std::to_string(regular) +
                " regular (" + std::to_string(patches.size()) + " with flush anchors)";
    }
    return {pass, detail + "; expected 1, 2, 120"};
  }

  // Full-set loss of every training patch in one batch, batch statistics, no state change.
  double probeLoss(train::Trainer& t)
  {
    std::vector<ad::Tensor<float>> color, features, reference;
    for (const auto& p : t.data().train)
    {
      color.push_back(p.noisyGamma);
      features.push_back(p.features);
      reference.push_back(p.reference);
    }
    ad::Graph<float> g(&t.model().parameters());
    const auto out = t.model().build(g, g.input(ad::stackBatch<float>(color)),
                                     g.input(ad::stackBatch<float>(features)), net::Mode::Probe);
    return g.value(net::hdrLoss(g, out.output, g.input(ad::stackBatch<float>(reference))))[0];
  }

  Outcome overfit(const Context&)
  {
    const auto start = Clock::now();
    ad::setDeterministic(true);
    train::TrainConfig config;
    config.totalIterations = 2000;
    config.batchSize = 1;
    config.patchSize = 64;
    config.patchStride = 64;
    config.validationFraction = 0.0;
    config.validateEvery = 0;
    config.seed = 11;
    const auto samples = makeScenes(8, 64, 3000);
    train::Trainer trainer(net::makeSpec(net::Variant::DEMC, config.seed), config,
                           train::buildPatchSet(samples, config));
    const double initial = probeLoss(trainer);
    double recent = 0.0;
    trainer.run([&](const train::LossRecord& r) {
      recent = 0.9 * recent + 0.1 * r.trainLoss;
      if ((r.iteration + 1) % 250 == 0)
        note("overfit iter " + std::to_string(r.iteration + 1) + " step-loss ema " + fmt("%.5f", recent) + ", " +
             fmt("%.0f", seconds(start)) + " s");
    });
    const double final = probeLoss(trainer);
    const double elapsed = seconds(start);
    const bool pass = trainer.data().train.size() == 8 && final < 0.1 * initial && elapsed < 900.0;
    return {pass, std::to_string(trainer.data().train.size()) + " patches, 2000 iterations (batch 1): loss " +
                    fmt("%.5f", initial) + " -> " + fmt("%.5f", final) + " (ratio " + fmt("%.4f", final / initial) +
                    ", limit 0.1), " + fmt("%.0f", elapsed) + " s (limit 900)"};
  }

  // Shared protocol of the end-to-end and ablation runs.
  constexpr int kTrainScenes = 32;
  constexpr int kHeldOutScenes = 8;
  constexpr int kSceneSize = 96;
  constexpr std::uint64_t kTrainSeed = 1000;
  constexpr std::uint64_t kHeldOutSeed = 2000;

  train::TrainConfig protocolConfig()
  {
    train::TrainConfig c;
    c.totalIterations = 5000;
    c.batchSize = 2;
    c.patchSize = 64;
    c.patchStride = 32;
    c.validationFraction = 0.0;
    c.validateEvery = 0;
    c.seed = 21;
    return c;
  }

  std::string protocolTag(net::Variant v)
  {
    const auto c = protocolConfig();
    return std::string(net::variantName(v)) + " scenes=" + std::to_string(kTrainScenes) + "x" +
           std::to_string(kSceneSize) + " seed=" + std::to_string(kTrainSeed) +
           " iters=" + std::to_string(c.totalIterations) + " batch=" + std::to_string(c.batchSize) +
           " patch=" + std::to_string(c.patchSize) + "/" + std::to_string(c.patchStride) +
           " lr=" + fmt("%g", c.lrStart) + ">" + fmt("%g", c.lrEnd) + " train_seed=" + std::to_string(c.seed);
  }

  struct TrainedModel
  {
    fs::path checkpoint;
    double trainSeconds = 0.0;
    bool reused = false;
  };

  // Trains one variant under the protocol, or reuses a finished checkpoint of
  // the identical protocol left by an earlier criterion (runs are deterministic).
  TrainedModel trainVariant(const Context& ctx, net::Variant variant)
  {
    const std::string name(net::variantName(variant));
    TrainedModel result{ctx.workDir / (name + ".ckpt")};
    const fs::path tagFile = ctx.workDir / (name + ".protocol");
    const std::string tag = protocolTag(variant);
    if (fs::exists(result.checkpoint) && fs::exists(tagFile))
    {
      std::istringstream stored(slurp(tagFile));
      std::string storedTag;
      std::getline(stored, storedTag);
      stored >> result.trainSeconds;
      const train::Checkpoint c = train::loadCheckpoint(result.checkpoint);
      if (storedTag == tag && c.metadata.at("iteration") == c.metadata.at("total_iterations"))
      {
        result.reused = true;
        note("reusing " + result.checkpoint.string() + " (" + fmt("%.0f", result.trainSeconds) + " s training)");
        return result;
      }
    }

    const auto start = Clock::now();
    ad::setDeterministic(true);
    const train::TrainConfig config = protocolConfig();
    const auto samples = makeScenes(kTrainScenes, kSceneSize, kTrainSeed);
    train::Trainer trainer(net::makeSpec(variant, config.seed), config, train::buildPatchSet(samples, config));
    train::LossLog log(ctx.workDir / (name + ".loss.csv"), false);
    double recent = 0.0;
    trainer.run([&](const train::LossRecord& r) {
      log.write(r);
      recent = r.iteration == 0 ? r.trainLoss : 0.98 * recent + 0.02 * r.trainLoss;
      if ((r.iteration + 1) % 250 == 0)
        note(name + " iter " + std::to_string(r.iteration + 1) + " loss ema " + fmt("%.5f", recent) + ", " +
             fmt("%.0f", seconds(start)) + " s");
    });
    train::saveCheckpoint(result.checkpoint, trainer.checkpoint());
    result.trainSeconds = seconds(start);
    std::ofstream(tagFile) << tag << "\n" << fmt("%.3f", result.trainSeconds) << "\n";
    return result;
  }

  Outcome endToEnd(const Context& ctx)
  {
    const auto start = Clock::now();
    const TrainedModel trained = trainVariant(ctx, net::Variant::DEMC);
    const auto heldOut = makeScenes(kHeldOutScenes, kSceneSize, kHeldOutSeed);
    const metrics::EvalReport noisy = metrics::evaluateNoisy(heldOut);
    const metrics::EvalReport denoised = metrics::evaluateCheckpoint(trained.checkpoint, heldOut, net::Variant::DEMC);
    const std::vector<metrics::EvalReport> reports{noisy, denoised};
    std::cerr << metrics::reportTable(reports);
    std::ofstream(ctx.workDir / "end_to_end.csv") << metrics::reportCsv(reports);
    // A reused checkpoint counts its recorded training time.
    const double elapsed = seconds(start) + (trained.reused ? trained.trainSeconds : 0.0);
    const bool pass = denoised.meanRelmse() <= 0.5 * noisy.meanRelmse() && denoised.meanSsim() > noisy.meanSsim() &&
                      elapsed <= 7200.0;
    return {pass, "held-out RelMSE " + fmt("%.4f", denoised.meanRelmse()) + " vs noisy " +
                    fmt("%.4f", noisy.meanRelmse()) + " (ratio " +
                    fmt("%.3f", denoised.meanRelmse() / noisy.meanRelmse()) + ", limit 0.5); SSIM " +
                    fmt("%.4f", denoised.meanSsim()) + " vs noisy " + fmt("%.4f", noisy.meanSsim()) + "; " +
                    fmt("%.0f", elapsed) + " s (limit 7200)"};
  }

  Outcome ablation(const Context& ctx)
  {
    const auto heldOut = makeScenes(kHeldOutScenes, kSceneSize, kHeldOutSeed);
    std::vector<metrics::EvalReport> reports{metrics::evaluateNoisy(heldOut)};
    bool complete = true;
    for (net::Variant v : {net::Variant::DEMC, net::Variant::SEMC, net::Variant::DEMCnoSN})
    {
      const TrainedModel trained = trainVariant(ctx, v);
      const train::Checkpoint c = train::loadCheckpoint(trained.checkpoint);
      complete = complete && c.metadata.at("iteration") == std::to_string(protocolConfig().totalIterations);
      reports.push_back(metrics::evaluateCheckpoint(trained.checkpoint, heldOut, v));
    }
    const std::string table = metrics::reportTable(reports);
    std::cout << table;
    std::ofstream(ctx.workDir / "ablation.csv") << metrics::reportCsv(reports);
    std::ofstream(ctx.workDir / "ablation.txt") << table;

    const double demcParams = double(net::parameterCount(net::makeSpec(net::Variant::DEMC)));
    const double semcParams = double(net::parameterCount(net::makeSpec(net::Variant::SEMC)));
    const double gap = std::abs(semcParams - demcParams) / demcParams;
    std::vector<const metrics::EvalReport*> ranked;
    for (std::size_t i = 1; i < reports.size(); ++i)
      ranked.push_back(&reports[i]);
    std::sort(ranked.begin(), ranked.end(),
              [](const auto* a, const auto* b) { return a->meanRelmse() < b->meanRelmse(); });
    std::string order;
    for (const auto* r : ranked)
      order += (order.empty() ? "" : " < ") + r->label;
    return {complete && gap <= 0.02, "3 variants trained to 5000 iterations; DEMC " +
                                       fmt("%.0f", demcParams) + " vs SEMC " + fmt("%.0f", semcParams) +
                                       " parameters (gap " + fmt("%.3f", 100 * gap) +
                                       "%, limit 2%); RelMSE order " + order + " (not gated)"};
  }

  Outcome formatFidelity(const Context& ctx)
  {
    std::mt19937_64 rng(77);
    int pfmOk = 0, ckptOk = 0;
    const fs::path dir = ctx.workDir / "fixtures";
    fs::create_directories(dir);
    for (int i = 0; i < 100; ++i)
    {
      const ad::Shape s{1, rng() % 2 ? 3 : 1, 1 + int(rng() % 48), 1 + int(rng() % 48)};
      const data::Image img = randomBits(s, rng);
      data::writePfm(dir / "f.pfm", img);
      const data::Image back = data::readPfm(dir / "f.pfm");
      if (back.identical(img) && data::encodePfm(back) == slurp(dir / "f.pfm"))
        ++pfmOk;

      train::Checkpoint c;
      const int tensors = 1 + int(rng() % 6);
      for (int k = 0; k < tensors; ++k)
      {
        const ad::Shape ts{1 + int(rng() % 4), 1 + int(rng() % 8), 1 + int(rng() % 5), 1 + int(rng() % 5)};
        c.tensors.emplace("layer" + std::to_string(k) + ".weight", randomBits(ts, rng));
      }
      c.metadata["variant"] = "demc";
      c.metadata["iteration"] = std::to_string(rng() % 100000);
      train::saveCheckpoint(dir / "f.ckpt", c);
      const train::Checkpoint loaded = train::loadCheckpoint(dir / "f.ckpt");
      bool same = loaded.metadata == c.metadata && loaded.tensors.size() == c.tensors.size();
      for (const auto& [name, t] : c.tensors)
        same = same && loaded.tensors.contains(name) && loaded.tensors.at(name).identical(t);
      if (same && train::encodeCheckpoint(loaded) == slurp(dir / "f.ckpt"))
        ++ckptOk;
    }

    // Interrupted training resumed from a file must reproduce the log byte for byte.
    ad::setDeterministic(true);
    train::TrainConfig config;
    config.totalIterations = 10;
    config.batchSize = 2;
    config.patchSize = 32;
    config.patchStride = 32;
    config.validationFraction = 0.25;
    config.validateEvery = 3;
    config.seed = 5;
    const auto set = train::buildPatchSet(makeScenes(4, 64, 4000), config);
    const auto spec = net::makeSpec(net::Variant::DEMC, config.seed);
    {
      train::Trainer t(spec, config, set);
      train::LossLog log(dir / "straight.csv", false);
      t.run([&](const train::LossRecord& r) { log.write(r); });
      train::saveCheckpoint(dir / "straight.ckpt", t.checkpoint());
    }
    {
      train::Trainer t(spec, config, set);
      train::LossLog log(dir / "resumed.csv", false);
      t.run([&](const train::LossRecord& r) { log.write(r); }, {}, 4);
      train::saveCheckpoint(dir / "mid.ckpt", t.checkpoint());
    }
    {
      train::Trainer t(net::makeSpec(net::Variant::DEMC, 999), config, set);
      t.restore(train::loadCheckpoint(dir / "mid.ckpt"));
      train::LossLog log(dir / "resumed.csv", true);
      t.run([&](const train::LossRecord& r) { log.write(r); });
      train::saveCheckpoint(dir / "resumed.ckpt", t.checkpoint());
    }
    const bool logSame = slurp(dir / "straight.csv") == slurp(dir / "resumed.csv");
    const bool ckptSame = slurp(dir / "straight.ckpt") == slurp(dir / "resumed.ckpt");
    const bool pass = pfmOk == 100 && ckptOk == 100 && logSame && ckptSame;
    return {pass, "PFM " + std::to_string(pfmOk) + "/100, checkpoint " + std::to_string(ckptOk) +
                    "/100 bit-exact; resumed loss log " + (logSame ? "identical" : "DIFFERS") +
                    ", final checkpoint " + (ckptSame ? "identical" : "DIFFERS")};
  }

  struct Criterion
  {
    const char* name;
    std::function<Outcome(const Context&)> run;
  };

} // namespace

int main(int argc, char** argv)
{
  const std::vector<Criterion> criteria{
    {"gradient_suite", gradientSuite},
    {"shape_law", shapeLaw},
    {"skip_init_identity", skipInitIdentity},
    {"gamma_relmse_values", gammaAndRelMse},
    {"patch_counts", patchCounts},
    {"overfit", overfit},
    {"end_to_end", endToEnd},
    {"ablation", ablation},
    {"format_fidelity", formatFidelity},
  };

  Context ctx{fs::temp_directory_path() / "demc_acceptance"};
  std::vector<std::string> selected;
  for (int i = 1; i < argc; ++i)
  {
    const std::string arg = argv[i];
    if (arg == "--work-dir" && i + 1 < argc)
      ctx.workDir = argv[++i];
    else if (arg == "--list")
    {
      for (const auto& c : criteria)
        std::cout << c.name << "\n";
      return 0;
    }
    else if (std::none_of(criteria.begin(), criteria.end(), [&](const Criterion& c) { return arg == c.name; }))
    {
      std::cerr << "unknown criterion '" << arg << "' (see --list)\n";
      return 2;
    }
    else
      selected.push_back(arg);
  }
  fs::create_directories(ctx.workDir);

  int failures = 0;
  for (const auto& c : criteria)
  {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.name) == selected.end())
      continue;
    const auto start = Clock::now();
    Outcome outcome;
    try
    {
      outcome = c.run(ctx);
    }
    catch (const std::exception& e)
    {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failures += outcome.pass ? 0 : 1;
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << c.name << ": " << outcome.detail << " ["
              << fmt("%.1f", seconds(start)) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
