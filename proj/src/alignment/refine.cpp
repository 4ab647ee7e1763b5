// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/alignment/refine.hpp"

#include <cmath>

#include "mirage/core/error.hpp"

namespace mirage::alignment {

AffineRefinement estimate_refinement(std::span<const BBox2D> rendered, std::span<const BBox2D> gt) {
  if (rendered.empty()) throw InputError("refinement needs at least one frame");
  if (rendered.size() != gt.size()) throw InputError("rendered and gt box sequences differ in length");
  const double n = static_cast<double>(rendered.size());
  AffineRefinement r;
  r.sigma = 0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    if (!(rendered[i].diagonal() > 0)) throw InputError("degenerate rendered box at frame " + std::to_string(i));
    r.sigma += gt[i].diagonal() / rendered[i].diagonal();
  }
  r.sigma /= n;
  for (size_t i = 0; i < rendered.size(); ++i) r.d += gt[i].center() - r.sigma * rendered[i].center();
  r.d /= n;
  return r;
}

namespace {

torch::Tensor warp_frame(const torch::Tensor& layer, const AffineRefinement& r) {
  auto src = layer.to(torch::kDouble).contiguous();
  const int64_t H = src.size(0), W = src.size(1), C = src.size(2);
  auto out = torch::zeros_like(src);
  const double* s = src.data_ptr<double>();
  double* o = out.data_ptr<double>();
  auto at = [&](int64_t y, int64_t x, int64_t c) -> double {
    if (x < 0 || y < 0 || x >= W || y >= H) return 0.0;
    return s[(y * W + x) * C + c];
  };
  for (int64_t y = 0; y < H; ++y) {
    for (int64_t x = 0; x < W; ++x) {
      const double sx = (x - r.d.x()) / r.sigma, sy = (y - r.d.y()) / r.sigma;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double ax = sx - fx, ay = sy - fy;
      const int64_t ix = static_cast<int64_t>(fx), iy = static_cast<int64_t>(fy);
      for (int64_t c = 0; c < C; ++c) {
        double v = (1 - ax) * (1 - ay) * at(iy, ix, c);
        if (ax > 0) v += ax * (1 - ay) * at(iy, ix + 1, c);
        if (ay > 0) v += (1 - ax) * ay * at(iy + 1, ix, c);
        if (ax > 0 && ay > 0) v += ax * ay * at(iy + 1, ix + 1, c);
        o[(y * W + x) * C + c] = v;
      }
    }
  }
  return out;
}

}  // namespace

torch::Tensor warp_layer(const torch::Tensor& layer, const AffineRefinement& r) {
  if (!(r.sigma > 0)) throw InputError("refinement scale must be positive");
  if (layer.dim() == 3) return warp_frame(layer, r);
  if (layer.dim() != 4) throw ShapeError("layer must be [H,W,4] or [T,H,W,4]");
  std::vector<torch::Tensor> frames;
  for (int64_t t = 0; t < layer.size(0); ++t) frames.push_back(warp_frame(layer[t], r));
  return torch::stack(frames);
}

VideoClip composite(const VideoClip& background, const torch::Tensor& layers, const AffineRefinement& refinement) {
  if (layers.dim() != 4 || layers.size(3) != 4) throw ShapeError("layers must be [T,H,W,4]");
  const auto& bg = background.frames();
  if (layers.size(0) != bg.size(0) || layers.size(1) != bg.size(1) || layers.size(2) != bg.size(2)) {
    throw ShapeError("layer and background sizes differ");
  }
  auto warped = warp_layer(layers, refinement);
  auto bgd = bg.to(torch::kDouble);
  auto alpha = warped.slice(3, 3, 4);
  auto out = warped.slice(3, 0, 3) + (1.0 - alpha) * bgd;
  return VideoClip(out.clamp(0.0, 1.0).to(bg.scalar_type()), background.fps());
}

}  // namespace mirage::alignment
