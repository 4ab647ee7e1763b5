// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/alignment/gaussians.hpp"

#include <cmath>
#include <fstream>

#include "mirage/core/error.hpp"

namespace mirage::alignment {

using nlohmann::json;

Eigen::Matrix3d GaussianRecord::covariance() const {
  const Eigen::Matrix3d R = rotation.normalized().toRotationMatrix();
  return R * scale.array().square().matrix().asDiagonal() * R.transpose();
}

void validate(const GaussianSet& set) {
  for (size_t i = 0; i < set.size(); ++i) {
    const auto& g = set[i];
    const std::string at = "gaussian " + std::to_string(i) + ": ";
    if (!g.center.allFinite()) throw InputError(at + "non-finite center");
    if (!(g.scale.array() > 0).all()) throw InputError(at + "scales must be positive");
    if (std::abs(g.rotation.norm() - 1.0) > 1e-6) throw InputError(at + "rotation is not a unit quaternion");
    if (!(g.opacity > 0 && g.opacity <= 1)) throw InputError(at + "opacity outside (0, 1]");
    if (!((g.color.array() >= 0).all() && (g.color.array() <= 1).all())) throw InputError(at + "color outside [0, 1]");
  }
}

GaussianSet SimilarityTransform::apply(const GaussianSet& set) const {
  GaussianSet out = set;
  const Eigen::Quaterniond q(R);
  for (auto& g : out) {
    g.center = apply(g.center);
    g.scale *= s;
    g.rotation = (q * g.rotation).normalized();
  }
  return out;
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.s = 1.0 / s;
  inv.R = R.transpose();
  inv.t = -(inv.s * (inv.R * t));
  return inv;
}

SimilarityTransform SimilarityTransform::compose(const SimilarityTransform& o) const {
  SimilarityTransform c;
  c.s = s * o.s;
  c.R = R * o.R;
  c.t = s * (R * o.t) + t;
  return c;
}

void SimilarityTransform::validate() const {
  if (!(s > 0)) throw InputError("similarity scale must be positive");
  if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
    throw InputError("similarity rotation is not orthonormal");
  }
  if (R.determinant() < 0) throw InputError("similarity rotation has det −1");
}

void CameraModel::validate() const {
  if (!(fx > 0 && fy > 0)) throw InputError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InputError("camera image size must be positive");
  for (size_t i = 0; i < extrinsics.size(); ++i) {
    const auto& R = extrinsics[i].R;
    if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
      throw InputError("camera extrinsics " + std::to_string(i) + " not orthonormal");
    }
  }
}

double BBox2D::diagonal() const { return std::hypot(width(), height()); }

double iou(const BBox2D& a, const BBox2D& b) {
  const double w = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double h = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = w * h;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

BBox2D AffineRefinement::apply(const BBox2D& b) const {
  const Eigen::Vector2d lo = apply(Eigen::Vector2d(b.x_min, b.y_min));
  const Eigen::Vector2d hi = apply(Eigen::Vector2d(b.x_max, b.y_max));
  return {lo.x(), lo.y(), hi.x(), hi.y()};
}

namespace {

json vec(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }
Eigen::Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InputError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}
json mat(const Eigen::Matrix3d& m) {
  json j = json::array();
  for (int r = 0; r < 3; ++r) j.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return j;
}
Eigen::Matrix3d mat3(const json& j) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw IoError("cannot read " + p.string());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

json to_json(const GaussianSet& set) {
  json arr = json::array();
  for (const auto& g : set) {
    arr.push_back({{"center", vec(g.center)},
                   {"scale", vec(g.scale)},
                   {"rotation", json::array({g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z()})},
                   {"opacity", g.opacity},
                   {"color", vec(g.color)}});
  }
  return arr;
}

GaussianSet gaussians_from_json(const json& j) {
  if (!j.is_array()) throw InputError("gaussian set must be a JSON array");
  GaussianSet set;
  try {
    for (const auto& r : j) {
      GaussianRecord g;
      g.center = vec3(r.at("center"));
      g.scale = vec3(r.at("scale"));
      const auto& q = r.at("rotation");
      g.rotation = Eigen::Quaterniond(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                                      q.at(3).get<double>());
      g.opacity = r.at("opacity").get<double>();
      g.color = vec3(r.at("color"));
      set.push_back(g);
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("gaussian record: ") + e.what());
  }
  validate(set);
  return set;
}

void save_gaussians(const GaussianSet& set, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << to_json(set).dump(1) << "\n";
}

GaussianSet load_gaussians(const std::filesystem::path& path) {
  try {
    return gaussians_from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

json to_json(const SimilarityTransform& t) { return {{"s", t.s}, {"R", mat(t.R)}, {"t", vec(t.t)}}; }

SimilarityTransform similarity_from_json(const json& j) {
  SimilarityTransform t;
  t.s = j.at("s").get<double>();
  t.R = mat3(j.at("R"));
  t.t = vec3(j.at("t"));
  return t;
}

json to_json(const CameraModel& cam) {
  json ext = json::array();
  for (const auto& e : cam.extrinsics) ext.push_back({{"R", mat(e.R)}, {"t", vec(e.t)}});
  return {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy},
          {"width", cam.width}, {"height", cam.height}, {"extrinsics", ext}};
}

CameraModel camera_from_json(const json& j) {
  CameraModel cam;
  try {
    cam.fx = j.at("fx");
    cam.fy = j.at("fy");
    cam.cx = j.at("cx");
    cam.cy = j.at("cy");
    cam.width = j.at("width");
    cam.height = j.at("height");
    for (const auto& e : j.at("extrinsics")) cam.extrinsics.push_back({mat3(e.at("R")), vec3(e.at("t"))});
  } catch (const json::exception& e) {
    throw InputError(std::string("camera: ") + e.what());
  }
  cam.validate();
  return cam;
}

json to_json(const BBox2D& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BBox2D bbox_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

json to_json(const AffineRefinement& r) { return {{"sigma", r.sigma}, {"d", json::array({r.d.x(), r.d.y()})}}; }

double rotation_angle(const Eigen::Matrix3d& R) {
  const double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  // acos loses precision near 0; use the skew part there.
  const Eigen::Vector3d w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  return std::atan2(w.norm() / 2.0, c);
}

}  // namespace mirage::alignment
