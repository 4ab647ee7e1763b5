// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/alignment/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "mirage/alignment/refine.hpp"
#include "mirage/alignment/render.hpp"
#include "mirage/core/clip_io.hpp"
#include "mirage/core/error.hpp"
#include "mirage/core/rng.hpp"
#include "mirage/core/tensor_container.hpp"

namespace mirage::alignment {

namespace fs = std::filesystem;
using nlohmann::json;

void SceneSpec::validate() const {
  if (frames < 1 || frames % 4 != 1) throw ConfigError("scene frames must satisfy T ≡ 1 (mod 4)");
  if (height < 8 || width < 8 || height % 8 || width % 8) throw ConfigError("scene size must be a multiple of 8");
  if (asset_gaussians < 8) throw ConfigError("asset_gaussians must be ≥ 8");
  if (mismatch < 0 || floaters < 0 || max_pan < 0) throw ConfigError("mismatch, floaters and max_pan must be ≥ 0");
  if (!(fps > 0)) throw ConfigError("fps must be positive");
  if (!(min_depth > 0 && max_depth >= min_depth && background_depth > max_depth)) {
    throw ConfigError("need 0 < min_depth ≤ max_depth < background_depth");
  }
}

json to_json(const SceneSpec& s) {
  return {{"frames", s.frames}, {"height", s.height}, {"width", s.width}, {"fps", s.fps},
          {"asset_gaussians", s.asset_gaussians}, {"mismatch", s.mismatch}, {"floaters", s.floaters},
          {"max_pan", s.max_pan}, {"background_depth", s.background_depth}, {"min_depth", s.min_depth},
          {"max_depth", s.max_depth}};
}

SceneSpec scene_spec_from_json(const json& j) {
  SceneSpec s;
  s.frames = j.at("frames");
  s.height = j.at("height");
  s.width = j.at("width");
  s.fps = j.at("fps");
  s.asset_gaussians = j.at("asset_gaussians");
  s.mismatch = j.at("mismatch");
  s.floaters = j.at("floaters");
  s.max_pan = j.at("max_pan");
  s.background_depth = j.at("background_depth");
  s.min_depth = j.at("min_depth");
  s.max_depth = j.at("max_depth");
  s.validate();
  return s;
}

namespace {

torch::Tensor quantize8(const torch::Tensor& x) { return torch::round(x.clamp(0.0, 1.0) * 255.0) / 255.0; }

// Procedural panorama [Hp, Wp, 3] in [0, 1]: sky/ground gradient, oriented
// stripes and hard-edged blocks.
torch::Tensor panorama(Rng& rng, int64_t hp, int64_t wp) {
  auto ys = torch::arange(hp, torch::kDouble).view({hp, 1}).expand({hp, wp});
  auto xs = torch::arange(wp, torch::kDouble).view({1, wp}).expand({hp, wp});
  const double horizon = hp * rng.uniform_scalar(0.35, 0.55);
  auto sky = torch::tensor({rng.uniform_scalar(0.45, 0.7), rng.uniform_scalar(0.6, 0.8), rng.uniform_scalar(0.8, 0.95)},
                           torch::kDouble);
  auto ground = torch::tensor(
      {rng.uniform_scalar(0.25, 0.45), rng.uniform_scalar(0.25, 0.4), rng.uniform_scalar(0.2, 0.35)}, torch::kDouble);
  auto w = torch::sigmoid((ys - horizon) / 2.0).unsqueeze(-1);
  auto img = sky * (1 - w) + ground * w;
  for (int k = 0; k < 5; ++k) {
    const double angle = rng.uniform_scalar(0, std::numbers::pi), freq = rng.uniform_scalar(0.15, 0.6);
    const double phase = rng.uniform_scalar(0, 2 * std::numbers::pi), amp = rng.uniform_scalar(0.02, 0.07);
    auto wave = torch::sin((xs * std::cos(angle) + ys * std::sin(angle)) * freq + phase) * amp;
    auto tint = torch::tensor({rng.uniform_scalar(0.5, 1.0), rng.uniform_scalar(0.5, 1.0), rng.uniform_scalar(0.5, 1.0)},
                              torch::kDouble);
    img = img + wave.unsqueeze(-1) * tint;
  }
  const int blocks = 8 + static_cast<int>(rng.uniform_int(0, 6));
  for (int k = 0; k < blocks; ++k) {
    const int64_t bw = rng.uniform_int(4, std::max<int64_t>(5, wp / 6));
    const int64_t bh = rng.uniform_int(4, std::max<int64_t>(5, hp / 3));
    const int64_t x0 = rng.uniform_int(0, wp - 1), y0 = rng.uniform_int(0, static_cast<int64_t>(horizon));
    auto color = torch::tensor(
        {rng.uniform_scalar(0.1, 0.9), rng.uniform_scalar(0.1, 0.9), rng.uniform_scalar(0.1, 0.9)}, torch::kDouble);
    const int64_t x1 = std::min(wp, x0 + bw), y1 = std::min(hp, y0 + bh);
    img.slice(0, y0, y1).slice(1, x0, x1).copy_(color.view({1, 1, 3}).expand({y1 - y0, x1 - x0, 3}));
    // window-like grid texture
    if (rng.uniform_scalar() < 0.5) {
      for (int64_t y = y0 + 1; y < y1; y += 3)
        for (int64_t x = x0 + 1; x < x1; x += 3) img.index_put_({y, x}, color * 0.6);
    }
  }
  return img.clamp(0.0, 1.0);
}

// Canonical asset: a car-like body plus an offset cabin, flat colors.
GaussianSet make_asset(Rng& rng, int n) {
  GaussianSet set;
  const Eigen::Vector3d base(rng.uniform_scalar(0.1, 0.95), rng.uniform_scalar(0.1, 0.95),
                             rng.uniform_scalar(0.1, 0.95));
  const int n_body = n * 3 / 5;
  for (int i = 0; i < n; ++i) {
    const bool body = i < n_body;
    const Eigen::Vector3d half = body ? Eigen::Vector3d(1.0, 0.32, 0.45) : Eigen::Vector3d(0.45, 0.25, 0.4);
    const Eigen::Vector3d offset = body ? Eigen::Vector3d(0, 0, 0) : Eigen::Vector3d(-0.45, -0.5, 0);
    Eigen::Vector3d u;
    do {
      u = Eigen::Vector3d(rng.uniform_scalar(-1, 1), rng.uniform_scalar(-1, 1), rng.uniform_scalar(-1, 1));
    } while (u.squaredNorm() > 1.0);
    GaussianRecord g;
    g.center = offset + u.cwiseProduct(half);
    g.scale = Eigen::Vector3d(rng.uniform_scalar(0.08, 0.14), rng.uniform_scalar(0.08, 0.14),
                              rng.uniform_scalar(0.08, 0.14));
    Eigen::Vector4d q(rng.normal_scalar(), rng.normal_scalar(), rng.normal_scalar(), rng.normal_scalar());
    q.normalize();
    g.rotation = Eigen::Quaterniond(q(0), q(1), q(2), q(3));
    g.opacity = rng.uniform_scalar(0.85, 1.0);
    g.color = (body ? base : Eigen::Vector3d(0.15, 0.17, 0.2)) +
              Eigen::Vector3d::Constant(rng.uniform_scalar(-0.03, 0.03));
    g.color = g.color.cwiseMax(0.0).cwiseMin(1.0);
    set.push_back(g);
  }
  return set;
}

Eigen::Matrix3d axis_rotation(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace

SceneBundle synth_scene(uint64_t seed, const SceneSpec& spec) {
  spec.validate();
  Rng rng(seed);
  Rng rbg = rng.fork("background"), robj = rng.fork("object"), rmis = rng.fork("mismatch");
  const int T = spec.frames, H = spec.height, W = spec.width;

  SceneBundle b;
  b.seed = seed;
  b.spec = spec;

  // Camera: lateral translation whose background parallax is a whole pixel count.
  b.camera.width = W;
  b.camera.height = H;
  b.camera.fx = b.camera.fy = 0.9 * W;
  b.camera.cx = (W - 1) / 2.0;
  b.camera.cy = (H - 1) / 2.0;
  const int pan = spec.max_pan > 0 ? static_cast<int>(rbg.uniform_int(-spec.max_pan, spec.max_pan)) : 0;
  const double step = pan * spec.background_depth / b.camera.fx;  // meters per frame
  for (int t = 0; t < T; ++t) {
    RigidTransform P;
    P.t = Eigen::Vector3d(-step * t, 0, 0);
    b.camera.extrinsics.push_back(P);
  }

  // Background: crop of a panorama moving by `pan` pixels per frame.
  const int64_t wp = W + std::abs(pan) * (T - 1);
  auto pano = panorama(rbg, H, wp);
  std::vector<torch::Tensor> bg_frames;
  for (int t = 0; t < T; ++t) {
    const int64_t x0 = pan >= 0 ? pan * t : std::abs(pan) * (T - 1 - t);
    bg_frames.push_back(pano.slice(1, x0, x0 + W));
  }
  auto background = quantize8(torch::stack(bg_frames));
  b.background = VideoClip(background.to(torch::kFloat), spec.fps);

  // Asset and the hidden placement of the true object.
  b.asset = make_asset(robj, spec.asset_gaussians);
  const double depth = robj.uniform_scalar(spec.min_depth, spec.max_depth);
  b.hidden.s = robj.uniform_scalar(0.8, 1.2);
  b.hidden.R = axis_rotation({0, 1, 0}, robj.uniform_scalar(-std::numbers::pi, std::numbers::pi)) *
               axis_rotation({1, 0, 0}, robj.uniform_scalar(-0.1, 0.1)) *
               axis_rotation({0, 0, 1}, robj.uniform_scalar(-0.1, 0.1));
  const double u_off = robj.uniform_scalar(-0.15, 0.15) * W, v_off = robj.uniform_scalar(0.05, 0.2) * H;
  b.hidden.t = Eigen::Vector3d(step * (T - 1) / 2.0 + u_off * depth / b.camera.fx, v_off * depth / b.camera.fy, depth);
  const GaussianSet true_object = b.hidden.apply(b.asset);
  b.boxes = project_bboxes(true_object, b.camera);

  // Harmonized appearance: tint, directional shading, soft ground shadow.
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& g : true_object) centroid += g.center;
  centroid /= static_cast<double>(true_object.size());
  const Eigen::Vector3d tint(robj.uniform_scalar(0.85, 1.05), robj.uniform_scalar(0.75, 0.95),
                             robj.uniform_scalar(0.55, 0.8));
  const Eigen::Vector3d light = Eigen::Vector3d(robj.uniform_scalar(-1, 1), -1.0, robj.uniform_scalar(-1, 0)).normalized();
  GaussianSet shaded = true_object;
  for (auto& g : shaded) {
    const Eigen::Vector3d n = (g.center - centroid).normalized();
    const double lambert = std::max(0.0, n.dot(light));
    g.color = (tint.cwiseProduct(g.color) * (0.45 + 0.75 * lambert)).cwiseMin(1.0);
  }
  const double shadow_dx = robj.uniform_scalar(-0.25, 0.25);
  auto ys = torch::arange(H, torch::kDouble).view({H, 1});
  auto xs = torch::arange(W, torch::kDouble).view({1, W});
  std::vector<torch::Tensor> shadows;
  for (int t = 0; t < T; ++t) {
    const auto& box = b.boxes[t];
    const double sx = box.center().x() + shadow_dx * box.width(), sy = box.y_max - 0.12 * box.height();
    const double rx = 0.55 * box.width(), ry = 0.16 * box.height() + 1.0;
    auto m2 = (xs - sx).pow(2) / (rx * rx) + (ys - sy).pow(2) / (ry * ry);
    auto s = torch::exp(-1.5 * m2);
    shadows.push_back(torch::where(s > 1e-3, s, torch::zeros_like(s)));
  }
  auto shadow = torch::stack(shadows);  // [T,H,W]
  auto shadowed = background * (1.0 - 0.6 * shadow).unsqueeze(-1);
  auto layers = render_sequence(shaded, b.camera);
  auto gt = layers.slice(3, 0, 3) + (1.0 - layers.slice(3, 3, 4)) * shadowed;
  b.gt = VideoClip(quantize8(gt).to(torch::kFloat), spec.fps);

  // Scene-side reconstruction: jitter, one-sided density loss, floaters.
  const double radius = std::sqrt(center_spread(true_object));
  const double m = spec.mismatch;
  Eigen::Vector3d lost_side(rmis.normal_scalar(), rmis.normal_scalar(), rmis.normal_scalar());
  lost_side.normalize();
  // Systematic reconstruction bias: scale drift about the centroid and an offset.
  const double drift = m > 0 ? 1.0 + (rmis.uniform_scalar() < 0.5 ? -1 : 1) * rmis.uniform_scalar(0.01, 0.03) * m : 1.0;
  Eigen::Vector3d offset(rmis.normal_scalar(), rmis.normal_scalar(), rmis.normal_scalar());
  offset = offset.normalized() * rmis.uniform_scalar(0.2, 0.35) * radius * m;
  for (const auto& g : true_object) {
    GaussianRecord o = g;
    if (m > 0) {
      o.center = centroid + drift * (g.center - centroid) + offset;
      o.scale *= drift;
      if ((g.center - centroid).dot(lost_side) > 0.2 * radius && rmis.uniform_scalar() < std::min(0.9, 0.15 * m)) {
        continue;
      }
      o.center += Eigen::Vector3d(rmis.normal_scalar(), rmis.normal_scalar(), rmis.normal_scalar()) * (0.03 * m * radius);
    }
    b.object.push_back(o);
  }
  if (m > 0) {
    Eigen::Vector3d dir(rmis.normal_scalar(), rmis.normal_scalar() * 0.3, rmis.normal_scalar());
    dir.normalize();
    for (int i = 0; i < spec.floaters; ++i) {
      GaussianRecord f;
      f.center = centroid + offset + dir * radius * rmis.uniform_scalar(1.1, 1.4) * m +
                 Eigen::Vector3d(rmis.normal_scalar(), rmis.normal_scalar(), rmis.normal_scalar()) * 0.15 * radius;
      f.scale = Eigen::Vector3d::Constant(0.1 * b.hidden.s);
      f.opacity = rmis.uniform_scalar(0.15, 0.35);
      f.color = Eigen::Vector3d::Constant(0.5);
      b.object.push_back(f);
    }
  }

  // Exact flow: background moves by −pan px; object, shadow and borders masked out.
  auto footprint = (layers.select(3, 3) > 1e-4).logical_or(shadow > 1e-4);  // [T,H,W]
  b.flow = torch::zeros({T - 1, H, W, 2}, torch::kFloat);
  b.flow.select(3, 0).fill_(static_cast<float>(-pan));
  b.flow_mask = torch::zeros({T - 1, H, W}, torch::kFloat);
  for (int t = 0; t + 1 < T; ++t) {
    auto valid = torch::ones({H, W}, torch::kBool);
    valid = valid.logical_and(footprint[t].logical_not());
    // target pixel x − pan in frame t+1
    auto next = torch::ones({H, W}, torch::kBool);
    for (int64_t x = 0; x < W; ++x) {
      const int64_t tx = x - pan;
      if (tx < 0 || tx >= W) {
        next.select(1, x).fill_(false);
      } else {
        next.select(1, x).copy_(footprint[t + 1].select(1, tx).logical_not());
      }
    }
    b.flow_mask[t].copy_(valid.logical_and(next).to(torch::kFloat));
  }
  return b;
}

double center_spread(const GaussianSet& set) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& g : set) mean += g.center;
  mean /= static_cast<double>(set.size());
  double s = 0;
  for (const auto& g : set) s += (g.center - mean).squaredNorm();
  return s / static_cast<double>(set.size());
}

namespace {

void write_json(const fs::path& p, const json& j) {
  std::ofstream f(p);
  if (!f) throw IoError("cannot write " + p.string());
  f << j.dump(1) << "\n";
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw IoError("missing bundle file " + p.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

}  // namespace

void save_bundle(const SceneBundle& b, const fs::path& dir) {
  fs::create_directories(dir / "flow");
  core::save_clip(b.gt, dir / "gt");
  core::save_clip(b.background, dir / "background");
  save_gaussians(b.object, dir / "gaussians_object.json");
  save_gaussians(b.asset, dir / "gaussians_asset.json");
  write_json(dir / "cameras.json", to_json(b.camera));
  json boxes = json::array();
  for (const auto& box : b.boxes) boxes.push_back(to_json(box));
  write_json(dir / "boxes.json", boxes);
  write_json(dir / "hidden_transform.json", to_json(b.hidden));
  write_json(dir / "scene.json", {{"seed", b.seed}, {"spec", to_json(b.spec)}});
  core::TensorContainer c;
  c.tensors["flow"] = b.flow.contiguous();
  c.tensors["mask"] = b.flow_mask.to(torch::kUInt8).contiguous();
  c.metadata = {{"convention", "flow[t] maps pixels of frame t into frame t+1, (dx, dy)"}};
  core::save_container(c, dir / "flow" / "flow.tc");
}

SceneBundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("bundle directory missing: " + dir.string());
  SceneBundle b;
  const json scene = read_json(dir / "scene.json");
  b.seed = scene.at("seed").get<uint64_t>();
  b.spec = scene_spec_from_json(scene.at("spec"));
  b.gt = core::load_clip(dir / "gt");
  b.background = core::load_clip(dir / "background");
  b.object = load_gaussians(dir / "gaussians_object.json");
  b.asset = load_gaussians(dir / "gaussians_asset.json");
  b.camera = camera_from_json(read_json(dir / "cameras.json"));
  for (const auto& box : read_json(dir / "boxes.json")) b.boxes.push_back(bbox_from_json(box));
  if (fs::exists(dir / "hidden_transform.json")) b.hidden = similarity_from_json(read_json(dir / "hidden_transform.json"));
  const auto c = core::load_container(dir / "flow" / "flow.tc");
  b.flow = c.tensors.at("flow");
  b.flow_mask = c.tensors.at("mask").to(torch::kFloat);
  const int64_t T = b.gt.num_frames();
  if (b.background.num_frames() != T || static_cast<int64_t>(b.boxes.size()) != T ||
      static_cast<int64_t>(b.camera.extrinsics.size()) != T || b.flow.size(0) != T - 1) {
    throw ShapeError("bundle components disagree on the frame count");
  }
  return b;
}

}  // namespace mirage::alignment
