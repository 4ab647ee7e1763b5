// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <vector>

#include "mirage/core/video.hpp"

namespace mirage::pipeline {

/// Cumulative signal-preservation factors ᾱ_t, t = 0..steps-1.
class NoiseSchedule {
 public:
  /// Values must lie in (0, 1] and be strictly decreasing.
  explicit NoiseSchedule(std::vector<double> alpha_bar);

  /// Cosine schedule over `steps` steps with offset `s`; per-step β clipped at 0.999.
  static NoiseSchedule cosine(int steps = 1000, double s = 0.008);

  /// Throws ConfigError when t is outside [0, size()).
  double alpha_bar(int t) const;
  double signal_scale(int t) const;  // √ᾱ_t
  double noise_scale(int t) const;   // √(1−ᾱ_t)
  int size() const { return static_cast<int>(alpha_bar_.size()); }

 private:
  std::vector<double> alpha_bar_;
};

/// z_t = √ᾱ_t·z0 + √(1−ᾱ_t)·ε
torch::Tensor add_noise(const torch::Tensor& z0, int t, const torch::Tensor& eps, const NoiseSchedule& schedule);
LatentVolume add_noise(const LatentVolume& z0, int t, const torch::Tensor& eps, const NoiseSchedule& schedule);

/// Closed-form inversion of add_noise given a noise estimate:
/// z0 = (z_t − √(1−ᾱ_t)·ε̂) / √ᾱ_t
torch::Tensor predict_clean(const torch::Tensor& z_t, const torch::Tensor& eps_hat, int t,
                            const NoiseSchedule& schedule);

}  // namespace mirage::pipeline
