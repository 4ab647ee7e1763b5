// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <nlohmann/json.hpp>
#include <vector>

namespace mirage::alignment {

struct GaussianRecord {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();     // meters
  Eigen::Vector3d scale = Eigen::Vector3d::Constant(0.1);  // per-axis std, meters
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  double opacity = 1.0;  // (0, 1]
  Eigen::Vector3d color = Eigen::Vector3d::Constant(0.5);  // RGB in [0, 1]

  /// World-space covariance R·diag(scale²)·Rᵀ.
  Eigen::Matrix3d covariance() const;
};

using GaussianSet = std::vector<GaussianRecord>;

/// Throws InputError naming the record index on a broken invariant.
void validate(const GaussianSet& set);

/// s·R·x + t
struct SimilarityTransform {
  double s = 1.0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return s * (R * x) + t; }
  GaussianSet apply(const GaussianSet& set) const;
  SimilarityTransform inverse() const;
  /// (this ∘ other)(x) = this(other(x))
  SimilarityTransform compose(const SimilarityTransform& other) const;
  void validate() const;
};

/// World → camera rigid transform.
struct RigidTransform {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return R * x + t; }
};

/// Pinhole camera. Pixel centers sit at integer coordinates.
struct CameraModel {
  double fx = 100, fy = 100, cx = 0, cy = 0;
  int width = 0, height = 0;
  std::vector<RigidTransform> extrinsics;  // one per frame

  void validate() const;
};

struct BBox2D {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  Eigen::Vector2d center() const { return {(x_min + x_max) / 2, (y_min + y_max) / 2}; }
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double diagonal() const;
  double area() const { return width() * height(); }
  bool valid() const { return x_min < x_max && y_min < y_max; }
};

double iou(const BBox2D& a, const BBox2D& b);

/// p ↦ σ·p + d, applied globally in image space.
struct AffineRefinement {
  Eigen::Vector2d d = Eigen::Vector2d::Zero();
  double sigma = 1.0;

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const { return sigma * p + d; }
  BBox2D apply(const BBox2D& box) const;
};

nlohmann::json to_json(const GaussianSet& set);
GaussianSet gaussians_from_json(const nlohmann::json& j);
void save_gaussians(const GaussianSet& set, const std::filesystem::path& path);
GaussianSet load_gaussians(const std::filesystem::path& path);

nlohmann::json to_json(const SimilarityTransform& t);
SimilarityTransform similarity_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CameraModel& cam);
CameraModel camera_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BBox2D& b);
BBox2D bbox_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AffineRefinement& r);

/// Angle of a rotation matrix in radians.
double rotation_angle(const Eigen::Matrix3d& R);

}  // namespace mirage::alignment
