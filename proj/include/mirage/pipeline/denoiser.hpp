// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <array>
#include <atomic>
#include <functional>
#include <string>
#include <vector>

#include "mirage/adapters/lora.hpp"
#include "mirage/core/video.hpp"
#include "mirage/pipeline/schedule.hpp"

namespace mirage::pipeline {

struct DenoiserConfig {
  std::array<int64_t, 3> patch{1, 2, 2};  // (pt, ph, pw)
  int64_t latent_channels = 4;
  int64_t width = 128;
  int64_t depth = 4;
  int64_t heads = 4;
  int64_t time_embed_dim = 64;
  int64_t mlp_ratio = 4;

  void validate() const;
  /// Names of the attention projections, the default 2D LoRA targets.
  std::vector<std::string> attention_projections() const;
};

class TransformerBlockImpl : public torch::nn::Module {
 public:
  TransformerBlockImpl(int64_t width, int64_t heads, int64_t mlp_ratio);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  adapters::AdaptableLinear q{nullptr}, k{nullptr}, v{nullptr}, out{nullptr};
  torch::nn::Linear fc1{nullptr}, fc2{nullptr};

 private:
  int64_t heads_;
};
TORCH_MODULE(TransformerBlock);

/// Noise predictor ε_θ(z_t, t, c): a spatiotemporal patch transformer with a
/// learned conditioning vector c added to every token.
class PatchDenoiserImpl : public torch::nn::Module {
 public:
  explicit PatchDenoiserImpl(const DenoiserConfig& cfg);

  /// z: [B, C, T', h, w] → ε̂ with the same shape.
  torch::Tensor forward(const torch::Tensor& z, int t);

  int64_t forward_calls() const { return calls_.load(); }
  void reset_forward_calls() { calls_.store(0); }
  const DenoiserConfig& config() const { return cfg_; }

  adapters::AdaptableLinear patch_embed{nullptr}, proj_out{nullptr};
  torch::nn::Linear time_fc1{nullptr}, time_fc2{nullptr};
  torch::nn::LayerNorm norm_out{nullptr};
  torch::nn::ModuleList blocks{nullptr};
  torch::Tensor conditioning;  // c, [width]

 private:
  DenoiserConfig cfg_;
  std::atomic<int64_t> calls_{0};
};
TORCH_MODULE(PatchDenoiser);

/// Sinusoidal embedding of a scalar position, [dim] (dim even).
torch::Tensor sinusoidal_embedding(double position, int64_t dim, torch::Dtype dtype = torch::kFloat);

/// Any noise predictor, for oracle substitution in tests.
using NoisePredictor = std::function<torch::Tensor(const torch::Tensor& z_t, int t)>;

/// ε̂ = ε_θ(z, t); z_DR = (z − √(1−ᾱ_t)·ε̂)/√ᾱ_t. No noise is added to z.
torch::Tensor one_step_denoise(const NoisePredictor& eps_model, const torch::Tensor& z, int t,
                               const NoiseSchedule& schedule);
torch::Tensor one_step_denoise(PatchDenoiser& denoiser, const torch::Tensor& z, int t, const NoiseSchedule& schedule);
LatentVolume one_step_denoise(PatchDenoiser& denoiser, const LatentVolume& z, int t, const NoiseSchedule& schedule);

/// mean((ε_θ(√ᾱ_t z0 + √(1−ᾱ_t) ε, t) − ε)²)
torch::Tensor noise_pred_loss(const NoisePredictor& eps_model, const torch::Tensor& z0, int t,
                              const torch::Tensor& eps, const NoiseSchedule& schedule);
torch::Tensor noise_pred_loss(PatchDenoiser& denoiser, const torch::Tensor& z0, int t, const torch::Tensor& eps,
                              const NoiseSchedule& schedule);

}  // namespace mirage::pipeline
