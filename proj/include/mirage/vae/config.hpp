// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace mirage::vae {

/// Widths and compression pattern of the causal video autoencoder.
///
/// Four encoder stages (Enc-1..Enc-4) and four decoder stages (Dec-1..Dec-4).
/// Between encoder stages the spatial size halves each time (8x total); time
/// is halved causally at the transitions flagged in `temporal_downsample`
/// (4x total). The decoder restores space and time with the same transition
/// pattern, so with the default flags Dec-3 and Dec-4 run at full frame count.
struct VaeConfig {
  std::array<int64_t, 4> encoder_channels{16, 16, 32, 32};
  std::array<int64_t, 4> decoder_channels{32, 32, 16, 16};
  int64_t latent_channels = 4;
  int64_t norm_groups = 4;
  /// Whether transition k (stage k+1 → k+2) also halves time in the encoder and
  /// doubles it in the decoder.
  std::array<bool, 3> temporal_downsample{true, true, false};

  /// Default small configuration used for training and tests.
  static VaeConfig desk();
  /// Full-width configuration, kept for schedule checks only.
  static VaeConfig full_scale();

  void validate() const;
};

struct StageShape {
  int64_t channels;
  int64_t frames;
  int64_t spatial_divisor;  // feature H = clip H / spatial_divisor

  bool operator==(const StageShape&) const = default;
};

struct TemporalSchedule {
  std::vector<StageShape> encoder;  // Enc-1 .. Enc-4
  std::vector<StageShape> decoder;  // Dec-1 .. Dec-4 (Dec-1 at the bottleneck)
};

/// Stage feature shapes for a clip of `frames` frames. Throws ShapeError when
/// frames ≢ 1 (mod 4).
TemporalSchedule temporal_schedule(const VaeConfig& cfg, int64_t frames);

/// Output length of a stride-2 causal temporal convolution (kernel 3).
constexpr int64_t causal_downsample_frames(int64_t frames) { return (frames - 1) / 2 + 1; }
/// Inverse: first frame kept once, every later frame doubled.
constexpr int64_t causal_upsample_frames(int64_t frames) { return 2 * frames - 1; }

}  // namespace mirage::vae
