// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>
#include <vector>

#include "mirage/alignment/gaussians.hpp"
#include "mirage/alignment/synth.hpp"
#include "mirage/core/video.hpp"

namespace mirage::alignment {

struct AlignmentReport {
  SimilarityTransform similarity;
  AffineRefinement refinement;
  std::vector<BBox2D> gt_boxes;
  std::vector<BBox2D> coarse_boxes;   // aligned asset, before refinement
  std::vector<BBox2D> refined_boxes;  // after refinement
  std::vector<double> iou_coarse;
  std::vector<double> iou_refined;
  double mean_iou_coarse = 0;
  double mean_iou_refined = 0;
  double mean_center_error_coarse = 0;   // pixels
  double mean_center_error_refined = 0;

  nlohmann::json to_json() const;
};

struct CuratedPair {
  VideoClip ni;
  VideoClip gt;
  AlignmentReport report;
};

/// estimate_similarity → render_asset → project_bbox → estimate_refinement → composite.
CuratedPair curate(const SceneBundle& bundle);

/// Same boxes and report without rendering or compositing the clip.
AlignmentReport align(const SceneBundle& bundle);

}  // namespace mirage::alignment
