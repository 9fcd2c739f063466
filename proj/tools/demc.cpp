// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "demc/ad/runtime.hpp"
#include "demc/data/pfm.hpp"
#include "demc/data/sample.hpp"
#include "demc/metrics/evaluate.hpp"
#include "demc/metrics/image_metrics.hpp"
#include "demc/net/gradient_suite.hpp"
#include "demc/net/pipeline.hpp"
#include "demc/synth/scene.hpp"
#include "demc/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace demc;

namespace {

  enum ExitCode : int
  {
    kOk = 0,
    kIoFailure = 1,
    kUsage = 2,
    kNumericFailure = 3,
    kCheckpointMismatch = 4,
    kGradcheckFailure = 5,
  };

  // Bad flag values or configuration detected after parsing.
  class UsageError : public Error
  {
  public:
    using Error::Error;
  };

  std::string fmt(const char* format, double v)
  {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
  }

  std::pair<int, int> parseSize(const std::string& text)
  {
    int h = 0, w = 0;
    char sep = 0, extra = 0;
    if (std::sscanf(text.c_str(), "%d%c%d%c", &h, &sep, &w, &extra) != 3 || sep != 'x' || h < 1 || w < 1)
      throw UsageError("--size expects HxW with positive integers, got '" + text + "'");
    return {h, w};
  }

  void requireWritableParent(const fs::path& file)
  {
    const fs::path parent = fs::absolute(file).parent_path();
    if (!fs::is_directory(parent))
      throw IoError("output directory " + parent.string() + " does not exist");
  }

  // Keeps the header and every row logged before `iteration`.
  void truncateLog(const fs::path& path, std::int64_t iteration)
  {
    if (!fs::exists(path))
      return;
    std::ifstream in(path);
    std::string line, kept;
    bool header = true;
    while (std::getline(in, line))
    {
      if (header || std::stoll(line.substr(0, line.find(','))) < iteration)
        kept += line + '\n';
      header = false;
    }
    in.close();
    std::ofstream out(path, std::ios::trunc);
    out << kept;
    if (!out)
      throw IoError("cannot rewrite loss log " + path.string());
  }

  fs::path lossLogPath(const fs::path& checkpoint)
  {
    fs::path log = checkpoint;
    return log.replace_extension(".loss.csv");
  }

  net::DemcNet<float> loadModel(const train::Checkpoint& ckpt, const fs::path& path,
                                std::optional<net::Variant> expected)
  {
    const net::Variant variant = train::checkpointVariant(ckpt);
    if (expected && *expected != variant)
      throw CheckpointError(path.string() + " holds a " + std::string(net::variantName(variant)) +
                            " model, expected " + std::string(net::variantName(*expected)));
    net::DemcNet<float> model(net::makeSpec(variant));
    train::restoreState(ckpt, model, nullptr);
    return model;
  }

  std::optional<net::Variant> optionalVariant(const std::string& name)
  {
    if (name.empty())
      return std::nullopt;
    return net::parseVariant(name);
  }

  // gen-data

  struct GenDataArgs
  {
    fs::path out;
    int scenes = 0;
    std::uint64_t seed = 0;
    int sppNoisy = 4;
    int sppReference = 4096;
    std::string size = "128x128";
  };

  int genData(const GenDataArgs& a)
  {
    synth::SceneRecipe defaults;
    std::tie(defaults.height, defaults.width) = parseSize(a.size);
    defaults.sppNoisy = a.sppNoisy;
    defaults.sppReference = a.sppReference;
    try
    {
      defaults.validate();
    }
    catch (const Error& e)
    {
      throw UsageError(e.what());
    }
    const fs::path manifest = synth::generateDataset(a.out, a.scenes, a.seed, defaults);
    std::cout << "generated " << a.scenes << " samples -> " << manifest.string() << "\n";
    return kOk;
  }

  // train

  struct TrainArgs
  {
    fs::path manifest;
    std::string variant = "demc";
    fs::path out;
    fs::path config;
    fs::path resume;
    std::int64_t stopAfter = -1;
    // Flag overlays in config-file key form; applied after the file.
    std::map<std::string, std::string> overrides;
  };

  int trainCommand(const TrainArgs& a)
  {
    const net::Variant variant = net::parseVariant(a.variant);
    train::TrainConfig config;
    if (!a.config.empty())
    {
      try
      {
        train::applyConfigFile(config, a.config);
      }
      catch (const IoError&)
      {
        throw;
      }
      catch (const Error& e)
      {
        throw UsageError(e.what());
      }
    }
    try
    {
      for (const auto& [key, value] : a.overrides)
        train::applyConfigEntry(config, key, value);
      config.validate();
    }
    catch (const Error& e)
    {
      throw UsageError(e.what());
    }

    requireWritableParent(a.out);
    const auto entries = data::readManifest(a.manifest);
    std::optional<train::Checkpoint> resumeFrom;
    if (!a.resume.empty())
      resumeFrom = train::loadCheckpoint(a.resume);

    const auto samples = data::loadSamples(entries);
    train::Trainer trainer(net::makeSpec(variant, config.seed), config, train::buildPatchSet(samples, config));
    const fs::path logPath = lossLogPath(a.out);
    if (resumeFrom)
    {
      if (train::checkpointVariant(*resumeFrom) != variant)
        throw CheckpointError(a.resume.string() + " holds a " +
                              std::string(net::variantName(train::checkpointVariant(*resumeFrom))) +
                              " model, expected " + a.variant);
      trainer.restore(*resumeFrom);
      truncateLog(logPath, trainer.iteration());
    }
    train::LossLog log(logPath, resumeFrom.has_value());

    std::cout << "training " << a.variant << " (" << trainer.model().parameters().count() << " parameters) on "
              << trainer.data().train.size() << " training / " << trainer.data().validation.size()
              << " validation patches, iterations " << trainer.iteration() << " -> " << config.totalIterations
              << "\n";
    trainer.run(
      [&](const train::LossRecord& r) {
        log.write(r);
        if (r.validationLoss || r.iteration == 0)
          std::cout << "iter " << r.iteration + 1 << "  lr " << fmt("%.3e", r.lr) << "  train "
                    << fmt("%.6f", r.trainLoss)
                    << (r.validationLoss ? "  val " + fmt("%.6f", *r.validationLoss) : std::string()) << "\n"
                    << std::flush;
      },
      [&](train::Trainer& t) {
        train::saveCheckpoint(a.out, t.checkpoint());
        std::cout << "checkpoint at iteration " << t.iteration() << " -> " << a.out.string() << "\n";
      },
      a.stopAfter < 0 ? std::numeric_limits<std::int64_t>::max() : trainer.iteration() + a.stopAfter);
    train::saveCheckpoint(a.out, trainer.checkpoint());
    std::cout << "saved " << a.out.string() << " (iteration " << trainer.iteration() << "), loss log "
              << logPath.string() << "\n";
    return kOk;
  }

  // denoise

  struct DenoiseArgs
  {
    fs::path input;
    fs::path checkpoint;
    fs::path out;
    std::string variant;
  };

  int denoiseCommand(const DenoiseArgs& a)
  {
    const std::optional<net::Variant> expected = optionalVariant(a.variant);
    requireWritableParent(a.out);
    const data::Sample sample = data::loadSample(a.input);
    const train::Checkpoint ckpt = train::loadCheckpoint(a.checkpoint);
    net::DemcNet<float> model = loadModel(ckpt, a.checkpoint, expected);
    const data::Image result = net::denoise(model, sample);
    data::writePfm(a.out, result);
    std::cout << "denoised " << sample.height() << "x" << sample.width() << " -> " << a.out.string() << "\n";
    if (sample.reference)
    {
      const data::Image& ref = *sample.reference;
      std::cout << "noisy     relmse " << fmt("%.6g", metrics::relmse(sample.noisy, ref)) << "  ssim "
                << fmt("%.6g", metrics::ssimHdr(sample.noisy, ref)) << "\n"
                << "denoised  relmse " << fmt("%.6g", metrics::relmse(result, ref)) << "  ssim "
                << fmt("%.6g", metrics::ssimHdr(result, ref)) << "\n";
    }
    return kOk;
  }

  // eval

  struct EvalArgs
  {
    fs::path manifest;
    std::vector<fs::path> checkpoints;
    std::string baseline;
    std::string variant;
    fs::path csv;
  };

  int evalCommand(const EvalArgs& a)
  {
    if (!a.baseline.empty() && a.baseline != "noisy")
      throw UsageError("--baseline accepts only 'noisy', got '" + a.baseline + "'");
    const std::optional<net::Variant> expected = optionalVariant(a.variant);
    if (!a.csv.empty())
      requireWritableParent(a.csv);
    const auto samples = data::loadSamples(data::readManifest(a.manifest));
    for (const data::Sample& s : samples)
      if (!s.reference)
        throw IoError("sample '" + s.id + "' has no reference image; evaluation needs one");

    std::vector<metrics::EvalReport> reports;
    if (!a.baseline.empty())
      reports.push_back(metrics::evaluateNoisy(samples));
    std::vector<train::Checkpoint> loaded;
    std::map<std::string, int> labelUses;
    for (const fs::path& p : a.checkpoints)
    {
      loaded.push_back(train::loadCheckpoint(p));
      ++labelUses[std::string(net::variantName(train::checkpointVariant(loaded.back())))];
    }
    for (std::size_t i = 0; i < a.checkpoints.size(); ++i)
    {
      net::DemcNet<float> model = loadModel(loaded[i], a.checkpoints[i], expected);
      std::string label(net::variantName(model.spec().variant));
      if (labelUses[label] > 1)
        label += ":" + a.checkpoints[i].stem().string();
      reports.push_back(metrics::evaluateModel(model, samples, label));
    }
    std::cout << metrics::reportTable(reports);
    if (!a.csv.empty())
    {
      std::ofstream out(a.csv, std::ios::trunc);
      out << metrics::reportCsv(reports);
      if (!out)
        throw IoError("cannot write " + a.csv.string());
    }
    return kOk;
  }

  // gradcheck

  struct GradcheckArgs
  {
    std::uint64_t seed = 0;
    std::string injectFault;
    double faultScale = 0.5;
  };

  int gradcheckCommand(const GradcheckArgs& a)
  {
    net::GradSuiteOptions options;
    options.seed = a.seed;
    if (!a.injectFault.empty())
    {
      for (ad::OpKind op : ad::differentiableOps())
        if (ad::opName(op) == a.injectFault)
          options.graph.faultOp = op;
      if (!options.graph.faultOp)
        throw UsageError("--inject-fault: unknown op '" + a.injectFault + "'");
      options.graph.faultScale = a.faultScale;
    }
    std::vector<std::string> failed;
    for (const net::GradSuiteEntry& e : net::runGradientSuite(options))
    {
      std::printf("%-18s max rel err %.3e  limit %.0e  %s\n", e.name.c_str(), e.error, e.threshold,
                  e.passed() ? "ok" : "FAIL");
      if (!e.passed())
        failed.push_back(e.name);
    }
    std::fflush(stdout);
    if (failed.empty())
      return kOk;
    std::string names;
    for (const std::string& n : failed)
      names += (names.empty() ? "" : ", ") + n;
    std::cerr << "gradcheck failed: " << names << "\n";
    return kGradcheckFailure;
  }

  void addDeterministic(CLI::App* cmd, bool& flag)
  {
    cmd->add_flag("--deterministic", flag, "Single-threaded auxiliary work; reproducible runs");
  }

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"DEMC Monte Carlo denoiser: data generation, training, denoising, evaluation"};
  app.require_subcommand(1);
  bool deterministic = false;

  GenDataArgs gen;
  auto* genCmd = app.add_subcommand("gen-data", "Render a synthetic dataset with a manifest");
  genCmd->add_option("--out", gen.out, "Output directory")->required();
  genCmd->add_option("--scenes", gen.scenes, "Number of scenes")->required()->check(CLI::PositiveNumber);
  genCmd->add_option("--seed", gen.seed, "Base seed; scene i uses seed + i")->capture_default_str();
  genCmd->add_option("--spp-noisy", gen.sppNoisy, "Samples per pixel of the noisy input")
    ->check(CLI::PositiveNumber)
    ->capture_default_str();
  genCmd->add_option("--spp-ref", gen.sppReference, "Samples per pixel of the reference")
    ->check(CLI::PositiveNumber)
    ->capture_default_str();
  genCmd->add_option("--size", gen.size, "Image size HxW")->capture_default_str();
  addDeterministic(genCmd, deterministic);

  TrainArgs trainArgs;
  auto* trainCmd = app.add_subcommand("train", "Train a model on a manifest");
  trainCmd->add_option("--manifest", trainArgs.manifest, "Dataset manifest")->required();
  trainCmd->add_option("--variant", trainArgs.variant, "demc, semc or demc-nosn")
    ->check(CLI::IsMember({"demc", "semc", "demc-nosn"}))
    ->capture_default_str();
  trainCmd->add_option("--out", trainArgs.out, "Checkpoint path; the loss log goes beside it")->required();
  trainCmd->add_option("--config", trainArgs.config, "key=value file; flags override its entries");
  trainCmd->add_option("--resume", trainArgs.resume, "Continue from this checkpoint");
  trainCmd->add_option("--stop-after", trainArgs.stopAfter, "Save and exit after this many iterations")
    ->check(CLI::NonNegativeNumber);
  const std::vector<std::pair<std::string, std::string>> overlayFlags{
    {"--iters", "total_iterations"},        {"--batch-size", "batch_size"},
    {"--lr-start", "lr_start"},             {"--lr-end", "lr_end"},
    {"--seed", "seed"},                     {"--patch-size", "patch_size"},
    {"--patch-stride", "patch_stride"},     {"--validation-fraction", "validation_fraction"},
    {"--validate-every", "validate_every"}, {"--checkpoint-every", "checkpoint_every"},
  };
  std::map<std::string, std::string> overlayValues;
  std::vector<std::pair<CLI::Option*, std::string>> overlayOptions;
  for (const auto& [flag, key] : overlayFlags)
    overlayOptions.emplace_back(trainCmd->add_option(flag, overlayValues[key], "Sets " + key), key);
  addDeterministic(trainCmd, deterministic);

  DenoiseArgs den;
  auto* denoiseCmd = app.add_subcommand("denoise", "Denoise one sample directory");
  denoiseCmd->add_option("--input", den.input, "Sample directory")->required();
  denoiseCmd->add_option("--ckpt", den.checkpoint, "Model checkpoint")->required();
  denoiseCmd->add_option("--out", den.out, "Output PFM")->required();
  denoiseCmd->add_option("--variant", den.variant, "Expected variant")
    ->check(CLI::IsMember({"demc", "semc", "demc-nosn"}));
  addDeterministic(denoiseCmd, deterministic);

  EvalArgs ev;
  auto* evalCmd = app.add_subcommand("eval", "Score checkpoints on a manifest");
  evalCmd->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
  evalCmd->add_option("--ckpt,--ckpt2,--ckpt3", ev.checkpoints, "Checkpoint; repeat for side-by-side columns");
  evalCmd->add_option("--baseline", ev.baseline, "'noisy' adds the unfiltered input as a column");
  evalCmd->add_option("--variant", ev.variant, "Expected variant of every checkpoint")
    ->check(CLI::IsMember({"demc", "semc", "demc-nosn"}));
  evalCmd->add_option("--csv", ev.csv, "Also write the table as CSV");
  addDeterministic(evalCmd, deterministic);

  GradcheckArgs gc;
  auto* gradCmd = app.add_subcommand("gradcheck", "Finite-difference check of every op and the full model");
  gradCmd->add_option("--seed", gc.seed, "Probe seed")->capture_default_str();
  gradCmd->add_option("--inject-fault", gc.injectFault, "Scale one op's backward (self-test)")->group("");
  gradCmd->add_option("--fault-scale", gc.faultScale, "Factor applied by --inject-fault")->group("");
  addDeterministic(gradCmd, deterministic);

  try
  {
    app.parse(argc, argv);
    if (evalCmd->parsed() && ev.checkpoints.empty() && ev.baseline.empty())
      throw CLI::ValidationError("eval", "give at least one --ckpt or --baseline noisy");
  }
  catch (const CLI::ParseError& e)
  {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  ad::setDeterministic(deterministic);
  try
  {
    if (genCmd->parsed())
      return genData(gen);
    if (trainCmd->parsed())
    {
      for (const auto& [option, key] : overlayOptions)
        if (option->count() > 0)
          trainArgs.overrides[key] = overlayValues[key];
      return trainCommand(trainArgs);
    }
    if (denoiseCmd->parsed())
      return denoiseCommand(den);
    if (evalCmd->parsed())
      return evalCommand(ev);
    return gradcheckCommand(gc);
  }
  catch (const UsageError& e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  catch (const NumericError& e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericFailure;
  }
  catch (const CheckpointError& e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckpointMismatch;
  }
  catch (const std::exception& e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kIoFailure;
  }
}
