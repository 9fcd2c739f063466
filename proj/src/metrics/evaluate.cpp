// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/metrics/evaluate.hpp"

#include <algorithm>
#include <cstdio>

#include "demc/metrics/image_metrics.hpp"
#include "demc/net/pipeline.hpp"
#include "demc/train/checkpoint.hpp"

namespace demc::metrics {

  namespace {

    void requireReferences(std::span<const data::Sample> samples)
    {
      for (const data::Sample& s : samples)
        if (!s.reference)
          throw IoError("sample '" + s.id + "' has no reference image; evaluation needs one");
    }

    EvalRow score(const data::Sample& sample, const data::Image& predHdr, data::GammaConfig gamma)
    {
      return {sample.id, relmse(predHdr, *sample.reference), ssimHdr(predHdr, *sample.reference, gamma)};
    }

    double mean(const std::vector<EvalRow>& rows, double EvalRow::*field)
    {
      if (rows.empty())
        return 0.0;
      double acc = 0.0;
      for (const EvalRow& r : rows)
        acc += r.*field;
      return acc / double(rows.size());
    }

    std::string number(double v)
    {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6g", v);
      return buf;
    }

    void checkAligned(std::span<const EvalReport> reports)
    {
      if (reports.empty())
        throw Error("report: nothing to compare");
      for (const EvalReport& r : reports)
      {
        if (r.rows.size() != reports.front().rows.size())
          throw Error("report: '" + r.label + "' has " + std::to_string(r.rows.size()) + " rows, '" +
                      reports.front().label + "' has " + std::to_string(reports.front().rows.size()));
        for (std::size_t i = 0; i < r.rows.size(); ++i)
          if (r.rows[i].id != reports.front().rows[i].id)
            throw Error("report: row " + std::to_string(i) + " is '" + r.rows[i].id + "' in '" + r.label +
                        "' but '" + reports.front().rows[i].id + "' in '" + reports.front().label + "'");
      }
    }

    // Header plus one line per scene and a final mean line, as cells.
    std::vector<std::vector<std::string>> cells(std::span<const EvalReport> reports)
    {
      checkAligned(reports);
      std::vector<std::vector<std::string>> out;
      std::vector<std::string> header{"scene"};
      for (const EvalReport& r : reports)
      {
        header.push_back(r.label + "_relmse");
        header.push_back(r.label + "_ssim");
      }
      out.push_back(std::move(header));
      for (std::size_t i = 0; i < reports.front().rows.size(); ++i)
      {
        std::vector<std::string> line{reports.front().rows[i].id};
        for (const EvalReport& r : reports)
        {
          line.push_back(number(r.rows[i].relmse));
          line.push_back(number(r.rows[i].ssim));
        }
        out.push_back(std::move(line));
      }
      std::vector<std::string> last{"mean"};
      for (const EvalReport& r : reports)
      {
        last.push_back(number(r.meanRelmse()));
        last.push_back(number(r.meanSsim()));
      }
      out.push_back(std::move(last));
      return out;
    }

  } // namespace

  double EvalReport::meanRelmse() const { return mean(rows, &EvalRow::relmse); }
  double EvalReport::meanSsim() const { return mean(rows, &EvalRow::ssim); }

  EvalReport evaluateModel(net::DemcNet<float>& model, std::span<const data::Sample> samples,
                           const std::string& label, data::GammaConfig gamma)
  {
    requireReferences(samples);
    EvalReport report{label, {}};
    for (const data::Sample& s : samples)
      report.rows.push_back(score(s, net::denoise(model, s, gamma), gamma));
    return report;
  }

  EvalReport evaluateNoisy(std::span<const data::Sample> samples, data::GammaConfig gamma)
  {
    requireReferences(samples);
    EvalReport report{"noisy", {}};
    for (const data::Sample& s : samples)
      report.rows.push_back(score(s, s.noisy, gamma));
    return report;
  }

  EvalReport evaluateCheckpoint(const std::filesystem::path& checkpoint, std::span<const data::Sample> samples,
                                std::optional<net::Variant> expected, data::GammaConfig gamma)
  {
    requireReferences(samples);
    const train::Checkpoint ckpt = train::loadCheckpoint(checkpoint);
    const net::Variant variant = train::checkpointVariant(ckpt);
    if (expected && *expected != variant)
      throw CheckpointError(checkpoint.string() + " holds a " + std::string(net::variantName(variant)) +
                            " model, expected " + std::string(net::variantName(*expected)));
    net::DemcNet<float> model(net::makeSpec(variant));
    train::restoreState(ckpt, model, nullptr);
    return evaluateModel(model, samples, std::string(net::variantName(variant)), gamma);
  }

  std::string reportCsv(std::span<const EvalReport> reports)
  {
    std::string out;
    for (const auto& line : cells(reports))
    {
      for (std::size_t i = 0; i < line.size(); ++i)
        out += (i ? "," : "") + line[i];
      out += '\n';
    }
    return out;
  }

  std::string reportTable(std::span<const EvalReport> reports)
  {
    const auto table = cells(reports);
    std::vector<std::size_t> width(table.front().size(), 0);
    for (const auto& line : table)
      for (std::size_t i = 0; i < line.size(); ++i)
        width[i] = std::max(width[i], line[i].size());
    std::string out;
    for (const auto& line : table)
    {
      for (std::size_t i = 0; i < line.size(); ++i)
      {
        std::string cell = line[i];
        // Scene names left-aligned, numbers right-aligned.
        if (i == 0)
          cell.resize(width[i], ' ');
        else
          cell.insert(0, width[i] - cell.size(), ' ');
        out += (i ? "  " : "") + cell;
      }
      out += '\n';
    }
    return out;
  }

} // namespace demc::metrics
