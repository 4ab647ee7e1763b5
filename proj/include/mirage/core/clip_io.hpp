// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "mirage/core/video.hpp"

namespace mirage::core {

/// Loads `dir/frame_0000.png ... frame_{T-1}.png` plus `dir/meta.json` ({"fps": ...}).
/// Frames are decoded in index order and scaled to [0,1] as float32.
/// A gap in the frame indices raises LoadError naming the first missing index.
VideoClip load_clip(const std::filesystem::path& dir);

/// Writes frames quantized to 8 bits (round-to-nearest) and meta.json.
void save_clip(const VideoClip& clip, const std::filesystem::path& dir);

/// Frame file name for index `i`: frame_0007.png
std::string frame_filename(int64_t i);

}  // namespace mirage::core
