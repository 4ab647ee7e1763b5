// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <vector>

#include "mirage/alignment/gaussians.hpp"
#include "mirage/core/video.hpp"

namespace mirage::alignment {

struct SceneSpec {
  int frames = 9;
  int height = 64;
  int width = 96;
  double fps = 10.0;
  int asset_gaussians = 160;
  /// Strength of the reconstruction mismatch between the scene object and the
  /// true object: center jitter, one-sided density loss and floaters. 0 = exact copy.
  double mismatch = 1.0;
  int floaters = 4;
  int max_pan = 1;  // |horizontal background shift| in whole pixels per frame
  double background_depth = 20.0;
  double min_depth = 5.5, max_depth = 7.0;

  void validate() const;
};

nlohmann::json to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const nlohmann::json& j);

/// Everything a synthetic scene provides, including the hidden ground truth.
struct SceneBundle {
  uint64_t seed = 0;
  SceneSpec spec;
  VideoClip gt{torch::zeros({1, 8, 8, 3})};          // harmonized render: tint, shading, shadow
  VideoClip background{torch::zeros({1, 8, 8, 3})};  // the same frames without object or shadow
  GaussianSet object;    // scene-side reconstruction of the object (with mismatch)
  GaussianSet asset;     // canonical asset with flat colors
  CameraModel camera;
  torch::Tensor flow;       // [T−1, H, W, 2], (dx, dy) from frame t into frame t+1
  torch::Tensor flow_mask;  // [T−1, H, W], 1 where the flow is exact
  std::vector<BBox2D> boxes;  // per-frame boxes of the true object
  SimilarityTransform hidden; // asset → true object
};

/// Mean squared distance of the centers from their (unweighted) mean.
double center_spread(const GaussianSet& set);

/// Deterministic in (seed, spec). Clip values are quantized to 8 bits so a
/// saved bundle reloads bit-identically.
SceneBundle synth_scene(uint64_t seed, const SceneSpec& spec);

/// Directory layout: gt/, background/, gaussians_object.json,
/// gaussians_asset.json, cameras.json, flow/flow.tc, boxes.json,
/// hidden_transform.json, scene.json.
void save_bundle(const SceneBundle& bundle, const std::filesystem::path& dir);
SceneBundle load_bundle(const std::filesystem::path& dir);

}  // namespace mirage::alignment
