// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <span>
#include <vector>

namespace mirage {

/// A T×H×W×3 frame sequence with values in [0, 1].
///
/// Invariants checked on construction: T ≡ 1 (mod 4), H and W divisible by 8,
/// every value finite and inside [0, 1]. The frame tensor is CPU, contiguous,
/// and either float32 or float64. Instances are immutable.
class VideoClip {
 public:
  VideoClip(torch::Tensor frames, double fps = 10.0);

  const torch::Tensor& frames() const { return frames_; }
  double fps() const { return fps_; }
  int64_t num_frames() const { return frames_.size(0); }
  int64_t height() const { return frames_.size(1); }
  int64_t width() const { return frames_.size(2); }

  /// [1, 3, T, H, W] tensor rescaled to [-1, 1], the layout the networks use.
  torch::Tensor to_network() const;

  /// Inverse of to_network() for one batch element. Values are clamped to
  /// [0, 1] so model outputs always satisfy the clip invariants.
  static VideoClip from_network(const torch::Tensor& x, double fps = 10.0);

 private:
  torch::Tensor frames_;
  double fps_;
};

/// A C×T'×h×w spatiotemporal latent.
class LatentVolume {
 public:
  explicit LatentVolume(torch::Tensor data);

  const torch::Tensor& data() const { return data_; }
  int64_t channels() const { return data_.size(0); }
  int64_t num_slices() const { return data_.size(1); }
  int64_t height() const { return data_.size(2); }
  int64_t width() const { return data_.size(3); }

  /// [1, C, T', h, w]
  torch::Tensor batched() const { return data_.unsqueeze(0); }

 private:
  torch::Tensor data_;
};

/// Stacks clips into a [B, 3, T, H, W] network batch. All clips must agree in shape.
torch::Tensor stack_clips(std::span<const VideoClip> clips);

/// Network-space [B,3,T,H,W] in [-1,1] to pixel-space [B,3,T,H,W] in [0,1] (no clamp,
/// gradients flow).
inline torch::Tensor to_pixels(const torch::Tensor& x) { return (x + 1.0) * 0.5; }

}  // namespace mirage
