// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/alignment/curate.hpp"

#include "mirage/alignment/refine.hpp"
#include "mirage/alignment/render.hpp"
#include "mirage/alignment/similarity.hpp"

namespace mirage::alignment {

using nlohmann::json;

json AlignmentReport::to_json() const {
  json frames = json::array();
  for (size_t i = 0; i < gt_boxes.size(); ++i) {
    frames.push_back({{"frame", i},
                      {"gt_box", alignment::to_json(gt_boxes[i])},
                      {"coarse_box", alignment::to_json(coarse_boxes[i])},
                      {"refined_box", alignment::to_json(refined_boxes[i])},
                      {"iou_coarse", iou_coarse[i]},
                      {"iou_refined", iou_refined[i]}});
  }
  return {{"similarity", alignment::to_json(similarity)},
          {"refinement", alignment::to_json(refinement)},
          {"mean_iou_coarse", mean_iou_coarse},
          {"mean_iou_refined", mean_iou_refined},
          {"mean_center_error_coarse", mean_center_error_coarse},
          {"mean_center_error_refined", mean_center_error_refined},
          {"frames", frames}};
}

AlignmentReport align(const SceneBundle& b) {
  AlignmentReport r;
  r.similarity = estimate_similarity(b.asset, b.object);
  const GaussianSet placed = r.similarity.apply(b.asset);
  r.gt_boxes = b.boxes;
  r.coarse_boxes = project_bboxes(placed, b.camera);
  r.refinement = estimate_refinement(r.coarse_boxes, r.gt_boxes);
  const double n = static_cast<double>(r.gt_boxes.size());
  for (size_t i = 0; i < r.gt_boxes.size(); ++i) {
    r.refined_boxes.push_back(r.refinement.apply(r.coarse_boxes[i]));
    r.iou_coarse.push_back(iou(r.coarse_boxes[i], r.gt_boxes[i]));
    r.iou_refined.push_back(iou(r.refined_boxes[i], r.gt_boxes[i]));
    r.mean_iou_coarse += r.iou_coarse.back() / n;
    r.mean_iou_refined += r.iou_refined.back() / n;
    r.mean_center_error_coarse += (r.coarse_boxes[i].center() - r.gt_boxes[i].center()).norm() / n;
    r.mean_center_error_refined += (r.refined_boxes[i].center() - r.gt_boxes[i].center()).norm() / n;
  }
  return r;
}

CuratedPair curate(const SceneBundle& b) {
  AlignmentReport r = align(b);
  const auto layers = render_sequence(r.similarity.apply(b.asset), b.camera);
  VideoClip ni = composite(b.background, layers, r.refinement);
  return {ni, b.gt, r};
}

}  // namespace mirage::alignment
