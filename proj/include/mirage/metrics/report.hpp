// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mirage/alignment/gaussians.hpp"
#include "mirage/core/video.hpp"
#include "mirage/metrics/metrics.hpp"

namespace mirage::metrics {

enum class EvalMode { kFullResolution, kActorCentric };

const char* mode_name(EvalMode mode);
EvalMode parse_mode(const std::string& name);  // ConfigError for unknown names

/// One predicted/reference pair with optional flow (for warp error) and boxes
/// (for actor-centric crops).
struct EvalItem {
  std::string id;
  VideoClip pred;
  VideoClip gt;
  torch::Tensor flow;   // [T−1,H,W,2] or undefined
  torch::Tensor mask;   // [T−1,H,W] or undefined
  std::vector<alignment::BBox2D> boxes;
};

struct ClipMetrics {
  std::string id;
  double psnr = 0;
  double ssim = 0;
  double perceptual = 0;
  std::optional<double> e_warp;
  std::optional<CropWindow> crop;
};

struct MetricReport {
  EvalMode mode = EvalMode::kFullResolution;
  std::vector<ClipMetrics> clips;
  std::map<std::string, double> aggregate;  // mean of per-clip values; "vfid" is set-level

  nlohmann::json to_json() const;
  /// Plain-text table: one row per clip plus the mean row.
  std::string table() const;
};

/// Computes per-clip metrics and aggregates. In actor-centric mode every item
/// needs boxes; the same crop is applied to prediction and reference, and the
/// warp error is measured on the full frame (flow is defined there).
/// vFID needs at least two clips and is omitted otherwise.
MetricReport evaluate(const std::vector<EvalItem>& items, EvalMode mode, bool warp_mean_abs = false);

}  // namespace mirage::metrics
