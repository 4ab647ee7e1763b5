// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <Eigen/Dense>
#include <vector>

#include "mirage/alignment/gaussians.hpp"

namespace mirage::alignment {

/// Screen-space footprint of one Gaussian.
struct ProjectedGaussian {
  Eigen::Vector2d mean;
  Eigen::Matrix2d covariance;  // local-affine (Jacobian) projection
  double depth;
};

/// Throws VisibilityError when the center is not in front of the camera.
ProjectedGaussian project(const GaussianRecord& g, const CameraModel& cam, int frame);

/// Envelope of the projected centers expanded by k·σ along each image axis.
BBox2D project_bbox(const GaussianSet& set, const CameraModel& cam, int frame, double k = 3.0);
std::vector<BBox2D> project_bboxes(const GaussianSet& set, const CameraModel& cam, double k = 3.0);

/// Splat rasterizer: anisotropic 2D footprints truncated at 3σ, composited
/// back to front. Returns premultiplied RGBA [H, W, 4] (float64). Splats
/// behind the camera or off screen are skipped.
torch::Tensor render_asset(const GaussianSet& set, const CameraModel& cam, int frame);
/// All frames: [T, H, W, 4].
torch::Tensor render_sequence(const GaussianSet& set, const CameraModel& cam);

}  // namespace mirage::alignment
