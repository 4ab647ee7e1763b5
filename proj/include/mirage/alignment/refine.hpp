// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <span>

#include "mirage/alignment/gaussians.hpp"
#include "mirage/core/video.hpp"

namespace mirage::alignment {

/// One global (σ, d) for the whole clip: σ = mean(gt diagonal / rendered
/// diagonal), d = mean(gt center − σ·rendered center).
/// Throws InputError for empty or unequal sequences.
AffineRefinement estimate_refinement(std::span<const BBox2D> rendered, std::span<const BBox2D> gt);

/// Resamples premultiplied RGBA layers ([H,W,4] or [T,H,W,4]) under p ↦ σ·p + d
/// by inverse mapping with bilinear interpolation; outside samples are transparent.
torch::Tensor warp_layer(const torch::Tensor& layer, const AffineRefinement& refinement);

/// out = rgb_premultiplied + (1 − α)·background, after warping the layers.
/// Throws ShapeError when frame counts or sizes differ.
VideoClip composite(const VideoClip& background, const torch::Tensor& layers, const AffineRefinement& refinement);

}  // namespace mirage::alignment
