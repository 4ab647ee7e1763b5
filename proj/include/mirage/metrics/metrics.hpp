// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "mirage/alignment/gaussians.hpp"
#include "mirage/core/video.hpp"

namespace mirage::metrics {

/// Reported for identical frames and used as the cap for every frame.
inline constexpr double kPsnrSentinel = 99.0;

/// 10·log10(1/MSE) on [0,1] per frame, capped at kPsnrSentinel, averaged over frames.
double psnr(const VideoClip& a, const VideoClip& b);
double psnr(const torch::Tensor& a, const torch::Tensor& b);        // [T,H,W,3]
double psnr_frame(const torch::Tensor& a, const torch::Tensor& b);  // [H,W,3]

/// Rec.601 luma, 11×11 Gaussian window (σ = 1.5), valid region, C1 = 0.01², C2 = 0.03².
/// Throws InputError when a frame is smaller than the window.
double ssim(const VideoClip& a, const VideoClip& b);
double ssim(const torch::Tensor& a, const torch::Tensor& b);        // [T,H,W,3]
double ssim_frame(const torch::Tensor& a, const torch::Tensor& b);  // [H,W,3]

/// Mean over consecutive pairs of the masked error between x_t and x_{t+1}
/// sampled bilinearly at p + flow_t(p). flow [T−1,H,W,2] (dx,dy); mask
/// [T−1,H,W] or undefined (all valid). Samples falling outside the frame are
/// excluded. Squared error by default, absolute error with `mean_abs`.
double warp_error(const VideoClip& x, const torch::Tensor& flow, const torch::Tensor& mask = {},
                  bool mean_abs = false);

/// ‖μa−μb‖² + Tr(Σa + Σb − 2(ΣaΣb)^{1/2}) for row-wise feature sets.
/// Throws InputError for fewer than two rows or mismatched widths,
/// NumericError for non-finite statistics.
double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Integer crop window [x0, x1) × [y0, y1).
struct CropWindow {
  int64_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// Union of the per-frame boxes, grown by `margin`·side on each side and clamped.
/// Throws InputError for a degenerate window.
CropWindow actor_window(std::span<const alignment::BBox2D> boxes, int64_t height, int64_t width, double margin = 0.1);
/// Crops are plain frame tensors [T,h,w,3]: a crop need not satisfy the
/// clip size rules the model relies on.
torch::Tensor crop(const VideoClip& clip, const CropWindow& window);
torch::Tensor actor_crop(const VideoClip& clip, std::span<const alignment::BBox2D> boxes, double margin = 0.1);

/// Fixed-seed 3D conv feature extractor for the Fréchet video distance.
class VideoFeatureNetImpl : public torch::nn::Module {
 public:
  explicit VideoFeatureNetImpl(uint64_t seed = 0xf1d);
  /// clip → pooled feature vector.
  Eigen::VectorXd features(const VideoClip& clip);
  Eigen::VectorXd features(const torch::Tensor& frames);  // [T,H,W,3]

  std::vector<torch::Tensor> weights;
};
TORCH_MODULE(VideoFeatureNet);

}  // namespace mirage::metrics
