// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/net/demc_net.hpp"

#include <cmath>
#include <random>

namespace demc::net {

  namespace {

    const std::string kFusion = "fusion";
    const std::string kDecoder = "dec";
    constexpr double kBilinear[4] = {0.25, 0.75, 0.75, 0.25};

    std::uint64_t nameSeed(std::uint64_t seed, const std::string& name)
    {
      std::uint64_t h = 1469598103934665603ull; // FNV-1a
      for (unsigned char c : name)
        h = (h ^ c) * 1099511628211ull;
      std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(h), std::uint32_t(h >> 32)};
      std::uint64_t out;
      seq.generate(reinterpret_cast<std::uint32_t*>(&out), reinterpret_cast<std::uint32_t*>(&out) + 2);
      return out;
    }

    bool endsWith(const std::string& s, std::string_view suffix)
    {
      return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
    }

    // True when some dot-separated component of the name starts with `stem`.
    bool hasComponent(const std::string& name, std::string_view stem)
    {
      for (std::size_t begin = 0; begin <= name.size();)
      {
        if (name.compare(begin, stem.size(), stem) == 0)
          return true;
        const std::size_t dot = name.find('.', begin);
        if (dot == std::string::npos)
          break;
        begin = dot + 1;
      }
      return false;
    }

    template<typename T>
    void declareConv(ParameterSet<T>& params, const std::string& name, int in, int out, int kernel)
    {
      params.add(name + ".weight", {out, in, kernel, kernel});
      params.add(name + ".bias", {out, 1, 1, 1});
    }

    template<typename T>
    NodeRef conv(Graph<T>& g, const std::string& name, NodeRef x, int pad)
    {
      return g.conv2d(x, g.parameter(name + ".weight"), g.parameter(name + ".bias"), 1, pad);
    }

    std::string unitName(const std::string& prefix, int unit) { return prefix + ".u" + std::to_string(unit); }

    void requireInput(const ad::Shape& s, int channels, const char* what)
    {
      if (s.c != channels)
        throw ShapeError(std::string(what) + " must have " + std::to_string(channels) + " channels, got " + s.str());
      if (s.h % 32 != 0 || s.w % 32 != 0 || s.h == 0 || s.w == 0)
        throw ShapeError(std::string(what) + " height and width must be positive multiples of 32, got " + s.str());
    }

  } // namespace

  template<typename T>
  void declareFusion(ParameterSet<T>& params, const ModelSpec& spec)
  {
    const auto& f = spec.fusionChannels;
    for (int i = 0; i < 4; ++i)
      declareConv(params, kFusion + ".conv" + std::to_string(i + 1), f[std::size_t(i)], f[std::size_t(i) + 1], 3);
    for (int i : {2, 3})
    {
      const std::string bn = kFusion + ".bn" + std::to_string(i);
      params.add(bn + ".gamma", {f[std::size_t(i)], 1, 1, 1});
      params.add(bn + ".beta", {f[std::size_t(i)], 1, 1, 1});
      params.addStats(bn, f[std::size_t(i)]);
    }
  }

  template<typename T>
  NodeRef buildFusion(Graph<T>& g, ParameterSet<T>& params, NodeRef features, Mode mode)
  {
    NodeRef h = g.relu(conv(g, kFusion + ".conv1", features, 1));
    for (int i : {2, 3})
    {
      const std::string bn = kFusion + ".bn" + std::to_string(i);
      h = conv(g, kFusion + ".conv" + std::to_string(i), h, 1);
      NodeRef gamma = g.parameter(bn + ".gamma");
      NodeRef beta = g.parameter(bn + ".beta");
      if (mode == Mode::Infer)
        h = g.batchNormInfer(h, gamma, beta, params.stats(bn));
      else
        h = g.batchNormTrain(h, gamma, beta, mode == Mode::Train ? &params.stats(bn) : nullptr);
      h = g.relu(h);
    }
    return g.relu(conv(g, kFusion + ".conv4", h, 1));
  }

  template<typename T>
  void declareEncoder(ParameterSet<T>& params, const std::string& prefix, int inChannels, std::span<const int> widths)
  {
    int in = inChannels;
    for (std::size_t u = 0; u < widths.size(); ++u)
    {
      const std::string unit = unitName(prefix, int(u) + 1);
      for (int j = 1; j <= 3; ++j)
      {
        declareConv(params, unit + ".conv" + std::to_string(j), in, widths[u], 3);
        in = widths[u];
      }
    }
  }

  template<typename T>
  EncoderOutput buildEncoder(Graph<T>& g, const std::string& prefix, NodeRef input)
  {
    const ad::Shape& s = g.value(input).shape();
    if (s.h % 32 != 0 || s.w % 32 != 0)
      throw ShapeError(prefix + ": input " + s.str() + " height and width must be multiples of 32");
    EncoderOutput out;
    NodeRef h = input;
    for (int u = 1; u <= kLevels; ++u)
    {
      const std::string unit = unitName(prefix, u);
      for (int j = 1; j <= 3; ++j)
        h = g.relu(conv(g, unit + ".conv" + std::to_string(j), h, 1));
      out.taps.push_back(h);
      h = g.maxPool2(h);
    }
    out.latent = h;
    return out;
  }

  template<typename T>
  void declareSkipFuse(ParameterSet<T>& params, const std::string& prefix, int channels, int arity)
  {
    declareConv(params, prefix, arity * channels, channels, 1);
  }

  template<typename T>
  NodeRef skipFuse(Graph<T>& g, const std::string& prefix, std::span<const NodeRef> taps)
  {
    for (NodeRef t : taps)
      if (g.value(t).shape() != g.value(taps.front()).shape())
        throw ShapeError(prefix + ": skip taps " + g.value(taps.front()).shape().str() + " and " +
                         g.value(t).shape().str() + " differ");
    return g.relu(conv(g, prefix, g.concatChannels(taps), 0));
  }

  template<typename T>
  void declareDecoder(ParameterSet<T>& params, const ModelSpec& spec)
  {
    int in = spec.encoderChannels.back();
    for (int k = 0; k < kLevels; ++k)
    {
      const int out = spec.decoderChannels[std::size_t(k)];
      const std::string level = std::to_string(k + 1);
      params.add(kDecoder + ".up" + level + ".weight", {in, out, 4, 4});
      params.add(kDecoder + ".up" + level + ".bias", {out, 1, 1, 1});
      declareSkipFuse(params, kDecoder + ".fuse" + level, out, spec.encoderCount() + 1);
      in = out;
    }
    declareConv(params, kDecoder + ".out", in, spec.outputChannels, 3);
  }

  template<typename T>
  NodeRef buildDecoder(Graph<T>& g, const ModelSpec& spec, NodeRef latent, std::span<const std::vector<NodeRef>> tapSets)
  {
    if (int(tapSets.size()) != spec.encoderCount())
      throw ShapeError("decoder expects " + std::to_string(spec.encoderCount()) + " tap sets, got " +
                       std::to_string(tapSets.size()));
    for (const auto& set : tapSets)
      if (set.size() != std::size_t(kLevels))
        throw ShapeError("every encoder must provide 5 skip taps");
    NodeRef h = latent;
    for (int k = 0; k < kLevels; ++k)
    {
      const std::string level = std::to_string(k + 1);
      h = g.deconv2d(h, g.parameter(kDecoder + ".up" + level + ".weight"),
                     g.parameter(kDecoder + ".up" + level + ".bias"));
      std::vector<NodeRef> taps{h};
      for (const auto& set : tapSets)
        taps.push_back(set[std::size_t(kLevels - 1 - k)]);
      h = skipFuse(g, kDecoder + ".fuse" + level, std::span<const NodeRef>(taps));
    }
    return g.relu(conv(g, kDecoder + ".out", h, 1));
  }

  template<typename T>
  void initParameters(ParameterSet<T>& params, std::uint64_t seed)
  {
    for (auto& [name, t] : params.tensors())
    {
      const ad::Shape& s = t.shape();
      std::fill(t.data().begin(), t.data().end(), T(0));
      if (endsWith(name, ".bias") || endsWith(name, ".beta"))
        continue;
      if (endsWith(name, ".gamma"))
      {
        std::fill(t.data().begin(), t.data().end(), T(1));
      }
      else if (hasComponent(name, "up"))
      {
        for (int c = 0; c < std::min(s.n, s.c); ++c)
          for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
              t.at(c, c, i, j) = T(kBilinear[i] * kBilinear[j]);
      }
      else if (hasComponent(name, "fuse"))
      {
        // [I I ... I]: output k sums input channel k of every tap.
        for (int k = 0; k < s.n; ++k)
          for (int tap = 0; tap < s.c / s.n; ++tap)
            t.at(k, tap * s.n + k, 0, 0) = T(1);
      }
      else
      {
        const double fanIn = double(s.c) * s.h * s.w;
        const double fanOut = double(s.n) * s.h * s.w;
        const double bound = std::sqrt(6.0 / (fanIn + fanOut));
        std::mt19937_64 rng(nameSeed(seed, name));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : t.data())
          v = T(dist(rng));
      }
    }
    for (auto& [name, stats] : params.allStats())
      stats = ad::BatchNormStats<T>(int(stats.mean.size()));
  }

  template<typename T>
  DemcNet<T>::DemcNet(ModelSpec spec) : spec_(std::move(spec))
  {
    spec_.validate();
    if (spec_.usesFusion())
      declareFusion(params_, spec_);
    const std::span<const int> widths(spec_.encoderChannels);
    if (spec_.variant == Variant::SEMC)
    {
      declareEncoder(params_, kSingleEncoder, spec_.hdrEncoderInputs(), widths);
    }
    else
    {
      declareEncoder(params_, kFeatureEncoder, spec_.featureEncoderInputs(), widths);
      declareEncoder(params_, kHdrEncoder, spec_.hdrEncoderInputs(), widths);
    }
    declareDecoder(params_, spec_);
    initParameters(params_, spec_.seed);
  }

  template<typename T>
  ForwardOutput DemcNet<T>::build(Graph<T>& g, NodeRef noisyGamma, NodeRef features, Mode mode)
  {
    const ad::Shape& cs = g.value(noisyGamma).shape();
    const ad::Shape& fs = g.value(features).shape();
    requireInput(cs, spec_.outputChannels, "noisy color");
    requireInput(fs, spec_.fusionChannels.front(), "feature stack");
    if (cs.n != fs.n || cs.h != fs.h || cs.w != fs.w)
      throw ShapeError("noisy color " + cs.str() + " and features " + fs.str() + " disagree");

    ForwardOutput out;
    if (spec_.usesFusion())
      out.fused = buildFusion(g, params_, features, mode);
    std::vector<std::vector<NodeRef>> tapSets;
    if (spec_.variant == Variant::SEMC)
    {
      EncoderOutput enc = buildEncoder(g, kSingleEncoder, g.concatChannels({noisyGamma, out.fused}));
      out.latent = enc.latent;
      out.hdrTaps = enc.taps;
      tapSets.push_back(enc.taps);
    }
    else
    {
      EncoderOutput feat = buildEncoder(g, kFeatureEncoder, spec_.usesFusion() ? out.fused : features);
      EncoderOutput hdr = buildEncoder(g, kHdrEncoder, noisyGamma);
      out.latent = hdr.latent;
      out.featureTaps = feat.taps;
      out.hdrTaps = hdr.taps;
      tapSets.push_back(feat.taps);
      tapSets.push_back(hdr.taps);
    }
    out.output = buildDecoder(g, spec_, out.latent, std::span<const std::vector<NodeRef>>(tapSets));
    return out;
  }

  template<typename T>
  Tensor<T> DemcNet<T>::forward(const Tensor<T>& noisyGamma, const Tensor<T>& features)
  {
    Graph<T> g(&params_);
    const ForwardOutput out = build(g, g.input(noisyGamma), g.input(features), Mode::Infer);
    return g.value(out.output);
  }

#define DEMC_INSTANTIATE(T)                                                                                         \
  template void declareFusion<T>(ParameterSet<T>&, const ModelSpec&);                                               \
  template NodeRef buildFusion<T>(Graph<T>&, ParameterSet<T>&, NodeRef, Mode);                                      \
  template void declareEncoder<T>(ParameterSet<T>&, const std::string&, int, std::span<const int>);                 \
  template EncoderOutput buildEncoder<T>(Graph<T>&, const std::string&, NodeRef);                                   \
  template void declareSkipFuse<T>(ParameterSet<T>&, const std::string&, int, int);                                 \
  template NodeRef skipFuse<T>(Graph<T>&, const std::string&, std::span<const NodeRef>);                            \
  template void declareDecoder<T>(ParameterSet<T>&, const ModelSpec&);                                              \
  template NodeRef buildDecoder<T>(Graph<T>&, const ModelSpec&, NodeRef, std::span<const std::vector<NodeRef>>);    \
  template void initParameters<T>(ParameterSet<T>&, std::uint64_t);                                                 \
  template class DemcNet<T>;

  DEMC_INSTANTIATE(float)
  DEMC_INSTANTIATE(double)

} // namespace demc::net
