// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mirage::core {

/// 8-bit interleaved image, row-major.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1, 3 or 4
  std::vector<uint8_t> pixels;
};

/// Reads any 8/16-bit PNG and converts it to 8-bit RGB (alpha dropped).
Image8 read_png_rgb(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image8& image);

}  // namespace mirage::core
