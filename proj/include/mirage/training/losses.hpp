// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <vector>

namespace mirage::training {

/// Fixed random-weight convolutional feature extractor standing in for a
/// pretrained perceptual network. Four stages; each is (2× average pool for
/// stages after the first) → 3×3 conv → tanh. Weights are buffers, never trained.
class PerceptualNetImpl : public torch::nn::Module {
 public:
  explicit PerceptualNetImpl(uint64_t seed = 0x5eed, std::array<int64_t, 4> widths = {16, 16, 32, 32});

  /// frames [N, 3, H, W] → one feature map per stage.
  std::vector<torch::Tensor> features(const torch::Tensor& frames);

  std::vector<torch::Tensor> weights;
  std::vector<torch::Tensor> biases;
};
TORCH_MODULE(PerceptualNet);

/// Video tensors here are [B, 3, T, H, W] or [3, T, H, W] in pixel range.
torch::Tensor fold_frames(const torch::Tensor& video);

/// Surrogate LPIPS: per stage, unit-normalize features along channels, take the
/// squared difference summed over channels and averaged over pixels; sum over
/// stages; average over frames.
torch::Tensor perceptual_distance(PerceptualNet& net, const torch::Tensor& a, const torch::Tensor& b);

/// G = F·Fᵀ / N for F [C, N]; batched for [B, C, N].
torch::Tensor gram_matrix(const torch::Tensor& features);

/// Σ_stages ‖G(a) − G(b)‖²_F, averaged over frames.
torch::Tensor gram_loss(PerceptualNet& net, const torch::Tensor& a, const torch::Tensor& b);

struct LossTerms {
  torch::Tensor total;
  torch::Tensor mse;
  torch::Tensor perceptual;
  torch::Tensor gram;
};

/// MSE + λ1·L_lpips. Throws ShapeError on mismatched shapes.
LossTerms loss_vae(PerceptualNet& net, const torch::Tensor& x_ro, const torch::Tensor& x_gt, double lambda1 = 0.1);

/// L_lpips + gram_weight·λ2·L_gram. The Gram term is skipped when gram_weight = 0.
LossTerms loss_harmon(PerceptualNet& net, const torch::Tensor& x_dr, const torch::Tensor& x_gt, double gram_weight,
                      double lambda2 = 0.1);

}  // namespace mirage::training
