// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include "mirage/alignment/gaussians.hpp"

namespace mirage::alignment {

/// Opacity-weighted moments of the centers.
struct CenterMoments {
  double total_weight = 0;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();  // columns, descending variance, skew-signed
  Eigen::Vector3d variances = Eigen::Vector3d::Zero();
  Eigen::Vector3d skew = Eigen::Vector3d::Zero();  // third moment along each axis
};

/// Throws InputError on an empty set, DegeneracyError naming the axis when the
/// covariance has rank < 3.
CenterMoments center_moments(const GaussianSet& set);

/// Correspondence-free alignment of `asset` onto `object` by moment matching:
/// weighted centroids, principal axes (signs fixed by the third moment) and the
/// RMS radius ratio.
SimilarityTransform estimate_similarity(const GaussianSet& asset, const GaussianSet& object);

/// Least-squares similarity for sets in index correspondence (equal sizes),
/// opacity-weighted by the object's records.
SimilarityTransform estimate_similarity_corresponding(const GaussianSet& asset, const GaussianSet& object);

}  // namespace mirage::alignment
