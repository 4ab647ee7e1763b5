// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/core/clip_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <regex>
#include <set>

#include "mirage/core/error.hpp"
#include "mirage/core/png_io.hpp"

namespace fs = std::filesystem;

namespace mirage::core {

std::string frame_filename(int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04lld.png", static_cast<long long>(i));
  return buf;
}

VideoClip load_clip(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LoadError("clip directory not found: " + dir.string());
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw LoadError("missing meta.json in " + dir.string());
  double fps = 0.0;
  try {
    std::ifstream f(meta_path);
    fps = nlohmann::json::parse(f).at("fps").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("bad meta.json in " + dir.string() + ": " + e.what());
  }

  static const std::regex kFrame(R"(frame_(\d{4,})\.png)");
  std::set<int64_t> indices;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, kFrame)) indices.insert(std::stoll(m[1].str()));
  }
  if (indices.empty()) throw LoadError("no frames in " + dir.string());
  const int64_t count = *indices.rbegin() + 1;
  for (int64_t i = 0; i < count; ++i) {
    if (!indices.count(i)) throw LoadError("missing frame index " + std::to_string(i) + " in " + dir.string());
  }
  if (count % 4 != 1) throw ShapeError("T = " + std::to_string(count) + ": T ≡ 1 (mod 4) violated");

  torch::Tensor frames;
  for (int64_t i = 0; i < count; ++i) {
    const Image8 img = read_png_rgb(dir / frame_filename(i));
    if (!frames.defined()) frames = torch::empty({count, img.height, img.width, 3}, torch::kFloat);
    if (img.height != frames.size(1) || img.width != frames.size(2)) {
      throw ShapeError("frame " + std::to_string(i) + " size differs from frame 0");
    }
    torch::Tensor slot = frames[i];
    auto acc = slot.accessor<float, 3>();
    const uint8_t* px = img.pixels.data();
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < 3; ++c) acc[y][x][c] = static_cast<float>(*px++) / 255.0f;
  }
  return VideoClip(frames, fps);
}

void save_clip(const VideoClip& clip, const fs::path& dir) {
  fs::create_directories(dir);
  const auto frames = clip.frames().to(torch::kDouble).contiguous();
  const auto acc = frames.accessor<double, 4>();
  for (int64_t t = 0; t < clip.num_frames(); ++t) {
    Image8 img{static_cast<int>(clip.width()), static_cast<int>(clip.height()), 3, {}};
    img.pixels.reserve(static_cast<size_t>(img.width) * img.height * 3);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < 3; ++c) {
          img.pixels.push_back(static_cast<uint8_t>(std::lround(std::clamp(acc[t][y][x][c], 0.0, 1.0) * 255.0)));
        }
    write_png(dir / frame_filename(t), img);
  }
  std::ofstream f(dir / "meta.json");
  if (!f) throw IoError("cannot write meta.json in " + dir.string());
  f << nlohmann::json{{"fps", clip.fps()}, {"num_frames", clip.num_frames()}}.dump(2) << "\n";
}

}  // namespace mirage::core
