// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/core/video.hpp"

#include <string>

#include "mirage/core/error.hpp"
#include "mirage/core/temporal.hpp"

namespace mirage {

namespace {

std::string shape_str(const torch::Tensor& t) {
  std::string s = "[";
  for (int64_t i = 0; i < t.dim(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.size(i));
  }
  return s + "]";
}

}  // namespace

VideoClip::VideoClip(torch::Tensor frames, double fps) : fps_(fps) {
  if (!frames.defined() || frames.dim() != 4 || frames.size(3) != 3) {
    throw ShapeError("clip frames must be [T,H,W,3], got " +
                     (frames.defined() ? shape_str(frames) : std::string("undefined")));
  }
  if (!core::valid_frame_count(frames.size(0))) {
    throw ShapeError("T = " + std::to_string(frames.size(0)) + ": T ≡ 1 (mod 4) violated");
  }
  if (frames.size(1) % 8 != 0 || frames.size(2) % 8 != 0) {
    throw ShapeError("H and W must be divisible by 8, got " + shape_str(frames));
  }
  if (!(fps > 0.0)) throw ShapeError("fps must be positive");
  if (frames.scalar_type() != torch::kFloat && frames.scalar_type() != torch::kDouble) {
    frames = frames.to(torch::kFloat);
  }
  frames = frames.detach().to(torch::kCPU).contiguous();
  if (!torch::isfinite(frames).all().item<bool>()) throw ShapeError("clip contains non-finite values");
  if (frames.numel() > 0 && (frames.min().item<double>() < 0.0 || frames.max().item<double>() > 1.0)) {
    throw ShapeError("clip values must lie in [0,1]");
  }
  frames_ = std::move(frames);
}

torch::Tensor VideoClip::to_network() const {
  return (frames_.permute({3, 0, 1, 2}) * 2.0 - 1.0).unsqueeze(0).contiguous();
}

VideoClip VideoClip::from_network(const torch::Tensor& x, double fps) {
  torch::Tensor t = x.detach();
  if (t.dim() == 5) {
    if (t.size(0) != 1) throw ShapeError("from_network expects a single batch element");
    t = t.squeeze(0);
  }
  if (t.dim() != 4 || t.size(0) != 3) throw ShapeError("network output must be [3,T,H,W], got " + shape_str(t));
  return VideoClip(to_pixels(t).clamp(0.0, 1.0).permute({1, 2, 3, 0}).contiguous(), fps);
}

LatentVolume::LatentVolume(torch::Tensor data) {
  if (!data.defined() || data.dim() != 4) {
    throw ShapeError("latent must be [C,T',h,w], got " +
                     (data.defined() ? shape_str(data) : std::string("undefined")));
  }
  data = data.detach().contiguous();
  if (!torch::isfinite(data).all().item<bool>()) throw ShapeError("latent contains non-finite values");
  data_ = std::move(data);
}

torch::Tensor stack_clips(std::span<const VideoClip> clips) {
  if (clips.empty()) throw ShapeError("cannot stack an empty clip list");
  std::vector<torch::Tensor> xs;
  xs.reserve(clips.size());
  for (const auto& c : clips) {
    if (!c.frames().sizes().equals(clips.front().frames().sizes())) {
      throw ShapeError("clip shapes differ: " + shape_str(c.frames()) + " vs " +
                       shape_str(clips.front().frames()));
    }
    xs.push_back(c.to_network());
  }
  return torch::cat(xs, 0);
}

}  // namespace mirage
