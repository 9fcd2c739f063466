// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "demc/data/pfm.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace demc::data {

  namespace {

    bool isSpace(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }

    class HeaderReader
    {
    public:
      HeaderReader(std::string_view bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

      std::string_view token(const char* what)
      {
        while (pos_ < bytes_.size() && isSpace(bytes_[pos_]))
          ++pos_;
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && !isSpace(bytes_[pos_]))
          ++pos_;
        if (start == pos_)
          fail(std::string("missing ") + what);
        return bytes_.substr(start, pos_ - start);
      }

      template<typename V>
      V number(const char* what)
      {
        const std::string_view t = token(what);
        V value{};
        auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
        if (ec != std::errc() || end != t.data() + t.size())
          fail("malformed " + std::string(what) + " '" + std::string(t) + "'");
        return value;
      }

      // The header ends with exactly one whitespace character after the scale.
      std::size_t payloadOffset()
      {
        if (pos_ >= bytes_.size() || !isSpace(bytes_[pos_]))
          fail("header is not terminated by whitespace");
        return pos_ + 1;
      }

      [[noreturn]] void fail(const std::string& message) const
      {
        throw IoError("PFM " + origin_ + ": " + message);
      }

    private:
      std::string_view bytes_;
      const std::string& origin_;
      std::size_t pos_ = 0;
    };

    std::uint32_t byteSwap(std::uint32_t v)
    {
      return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
    }

  } // namespace

  std::string encodePfm(const Image& image)
  {
    const auto& s = image.shape();
    if (s.n != 1 || (s.c != 1 && s.c != 3))
      throw ShapeError("PFM holds 1 or 3 channel images, got " + s.str());
    std::ostringstream header;
    header << (s.c == 3 ? "PF" : "Pf") << '\n' << s.w << ' ' << s.h << '\n' << "-1.0\n";
    std::string out = header.str();
    const std::size_t headerSize = out.size();
    out.resize(headerSize + image.size() * 4);
    char* dst = out.data() + headerSize;
    for (int y = s.h - 1; y >= 0; --y)
      for (int x = 0; x < s.w; ++x)
        for (int c = 0; c < s.c; ++c)
        {
          std::uint32_t bits = std::bit_cast<std::uint32_t>(image.at(0, c, y, x));
          if constexpr (std::endian::native == std::endian::big)
            bits = byteSwap(bits);
          std::memcpy(dst, &bits, 4);
          dst += 4;
        }
    return out;
  }

  Image decodePfm(std::string_view bytes, const std::string& origin)
  {
    HeaderReader reader(bytes, origin);
    const std::string_view magic = reader.token("magic");
    int channels = 0;
    if (magic == "PF")
      channels = 3;
    else if (magic == "Pf")
      channels = 1;
    else
      reader.fail("bad magic '" + std::string(magic.substr(0, 8)) + "'");
    const int width = reader.number<int>("width");
    const int height = reader.number<int>("height");
    const double scale = reader.number<double>("scale");
    if (width <= 0 || height <= 0)
      reader.fail("non-positive dimensions " + std::to_string(width) + "x" + std::to_string(height));
    if (scale == 0.0 || !std::isfinite(scale))
      reader.fail("invalid scale");
    const std::size_t offset = reader.payloadOffset();

    const std::size_t expected = std::size_t(width) * std::size_t(height) * std::size_t(channels) * 4;
    const std::size_t actual = bytes.size() - std::min(offset, bytes.size());
    if (actual != expected)
      reader.fail((actual < expected ? "truncated payload: expected " : "oversized payload: expected ") +
                  std::to_string(expected) + " bytes, got " + std::to_string(actual));

    const bool little = scale < 0;
    const bool swap = little != (std::endian::native == std::endian::little);
    Image image({1, channels, height, width});
    const char* src = bytes.data() + offset;
    for (int y = height - 1; y >= 0; --y)
      for (int x = 0; x < width; ++x)
        for (int c = 0; c < channels; ++c)
        {
          std::uint32_t bits;
          std::memcpy(&bits, src, 4);
          src += 4;
          if (swap)
            bits = byteSwap(bits);
          const float v = std::bit_cast<float>(bits);
          if (std::isnan(v))
            reader.fail("NaN at pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") channel " +
                        std::to_string(c));
          image.at(0, c, y, x) = v;
        }
    return image;
  }

  Image readPfm(const std::filesystem::path& path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw IoError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return decodePfm(buffer.str(), path.string());
  }

  void writePfm(const std::filesystem::path& path, const Image& image)
  {
    const std::string bytes = encodePfm(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot create " + path.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out)
      throw IoError("write failed for " + path.string());
  }

} // namespace demc::data
