// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/alignment/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mirage/core/error.hpp"

namespace mirage::alignment {

namespace {

const RigidTransform& pose(const CameraModel& cam, int frame) {
  if (frame < 0 || frame >= static_cast<int>(cam.extrinsics.size())) {
    throw BoundsError("camera has no pose for frame " + std::to_string(frame));
  }
  return cam.extrinsics[frame];
}

}  // namespace

ProjectedGaussian project(const GaussianRecord& g, const CameraModel& cam, int frame) {
  const auto& P = pose(cam, frame);
  const Eigen::Vector3d pc = P.apply(g.center);
  if (!(pc.z() > 0)) throw VisibilityError("gaussian behind the camera (depth " + std::to_string(pc.z()) + ")");
  const double z = pc.z(), iz = 1.0 / z;
  Eigen::Matrix<double, 2, 3> J;
  J << cam.fx * iz, 0, -cam.fx * pc.x() * iz * iz,  //
      0, cam.fy * iz, -cam.fy * pc.y() * iz * iz;
  const Eigen::Matrix3d cov_cam = P.R * g.covariance() * P.R.transpose();
  return {{cam.fx * pc.x() * iz + cam.cx, cam.fy * pc.y() * iz + cam.cy}, J * cov_cam * J.transpose(), z};
}

BBox2D project_bbox(const GaussianSet& set, const CameraModel& cam, int frame, double k) {
  if (set.empty()) throw InputError("empty gaussian set");
  BBox2D b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& g : set) {
    const auto p = project(g, cam, frame);
    const double ex = k * std::sqrt(p.covariance(0, 0)), ey = k * std::sqrt(p.covariance(1, 1));
    b.x_min = std::min(b.x_min, p.mean.x() - ex);
    b.x_max = std::max(b.x_max, p.mean.x() + ex);
    b.y_min = std::min(b.y_min, p.mean.y() - ey);
    b.y_max = std::max(b.y_max, p.mean.y() + ey);
  }
  return b;
}

std::vector<BBox2D> project_bboxes(const GaussianSet& set, const CameraModel& cam, double k) {
  std::vector<BBox2D> out;
  for (int f = 0; f < static_cast<int>(cam.extrinsics.size()); ++f) out.push_back(project_bbox(set, cam, f, k));
  return out;
}

torch::Tensor render_asset(const GaussianSet& set, const CameraModel& cam, int frame) {
  const int W = cam.width, H = cam.height;
  auto layer = torch::zeros({H, W, 4}, torch::kDouble);
  double* px = layer.data_ptr<double>();

  struct Splat {
    ProjectedGaussian p;
    const GaussianRecord* g;
  };
  std::vector<Splat> splats;
  const auto& P = pose(cam, frame);
  for (const auto& g : set) {
    if (!(P.apply(g.center).z() > 0)) continue;
    splats.push_back({project(g, cam, frame), &g});
  }
  std::stable_sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) { return a.p.depth > b.p.depth; });

  for (const auto& s : splats) {
    const Eigen::Matrix2d& C = s.p.covariance;
    const double det = C.determinant();
    if (!(det > 0)) continue;
    const Eigen::Matrix2d Ci = C.inverse();
    const double rx = 3.0 * std::sqrt(C(0, 0)), ry = 3.0 * std::sqrt(C(1, 1));
    const int x0 = std::max(0, static_cast<int>(std::ceil(s.p.mean.x() - rx)));
    const int x1 = std::min(W - 1, static_cast<int>(std::floor(s.p.mean.x() + rx)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(s.p.mean.y() - ry)));
    const int y1 = std::min(H - 1, static_cast<int>(std::floor(s.p.mean.y() + ry)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - s.p.mean.x(), dy = y - s.p.mean.y();
        const double m2 = Ci(0, 0) * dx * dx + 2 * Ci(0, 1) * dx * dy + Ci(1, 1) * dy * dy;
        if (m2 > 9.0) continue;
        const double a = s.g->opacity * std::exp(-0.5 * m2);
        double* p = px + (static_cast<size_t>(y) * W + x) * 4;
        for (int c = 0; c < 3; ++c) p[c] = a * s.g->color(c) + (1 - a) * p[c];
        p[3] = a + (1 - a) * p[3];
      }
    }
  }
  return layer;
}

torch::Tensor render_sequence(const GaussianSet& set, const CameraModel& cam) {
  std::vector<torch::Tensor> frames;
  for (int f = 0; f < static_cast<int>(cam.extrinsics.size()); ++f) frames.push_back(render_asset(set, cam, f));
  return torch::stack(frames);
}

}  // namespace mirage::alignment
