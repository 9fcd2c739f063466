// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "demc/ad/tensor.hpp"

namespace demc::data {

  using Image = ad::Tensor<float>;

  // Portable float map codec. Images are held as 1 x c x h x w tensors with
  // c in {1, 3}, rows top to bottom. Files are written little-endian with
  // rows bottom to top; either byte order is accepted on read.
  std::string encodePfm(const Image& image);
  Image decodePfm(std::string_view bytes, const std::string& origin = "<memory>");

  Image readPfm(const std::filesystem::path& path);
  void writePfm(const std::filesystem::path& path, const Image& image);

} // namespace demc::data
