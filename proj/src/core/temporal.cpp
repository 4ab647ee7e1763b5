// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/core/temporal.hpp"

#include <string>

#include "mirage/core/error.hpp"

namespace mirage::core {

int64_t latent_frame_count(int64_t frames) {
  if (!valid_frame_count(frames)) {
    throw ShapeError("T = " + std::to_string(frames) + ": T ≡ 1 (mod 4) violated");
  }
  return 1 + (frames - 1) / 4;
}

int64_t frame_to_latent_index(int64_t frame, int64_t frames) {
  if (frame < 0 || frame >= frames) {
    throw BoundsError("frame index " + std::to_string(frame) + " outside [0, " +
                      std::to_string(frames) + ")");
  }
  return frame == 0 ? 0 : (frame + 3) / 4;
}

std::pair<int64_t, int64_t> latent_frame_group(int64_t slice, int64_t frames) {
  const int64_t slices = latent_frame_count(frames);
  if (slice < 0 || slice >= slices) {
    throw BoundsError("latent slice " + std::to_string(slice) + " outside [0, " +
                      std::to_string(slices) + ")");
  }
  if (slice == 0) return {0, 1};
  return {4 * slice - 3, 4 * slice + 1};
}

}  // namespace mirage::core
