// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>

namespace mirage::core {

/// True when a clip of `frames` frames can be causally compressed 4x in time.
constexpr bool valid_frame_count(int64_t frames) { return frames >= 1 && frames % 4 == 1; }

/// Number of latent time slices for a clip of `frames` frames.
int64_t latent_frame_count(int64_t frames);

/// Latent slice that first sees frame `frame`. Frame 0 is its own group and
/// every following run of four frames shares one slice: {0},{1..4},{5..8},...
/// Throws BoundsError when `frame` is outside [0, frames).
int64_t frame_to_latent_index(int64_t frame, int64_t frames);

/// Half-open frame range [first, last) decoded from latent slice `slice`.
std::pair<int64_t, int64_t> latent_frame_group(int64_t slice, int64_t frames);

}  // namespace mirage::core
