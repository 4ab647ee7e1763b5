// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/pipeline/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mirage/core/error.hpp"

namespace mirage::pipeline {

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
  if (alpha_bar_.empty()) throw ConfigError("empty noise schedule");
  for (size_t i = 0; i < alpha_bar_.size(); ++i) {
    const double a = alpha_bar_[i];
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("ᾱ_" + std::to_string(i) + " outside (0, 1]");
    if (i > 0 && !(a < alpha_bar_[i - 1])) throw ConfigError("ᾱ must be strictly decreasing at t=" + std::to_string(i));
  }
}

NoiseSchedule NoiseSchedule::cosine(int steps, double s) {
  auto f = [&](double t) {
    const double c = std::cos((t / steps + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  std::vector<double> ab;
  ab.reserve(steps);
  double prod = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double beta = std::min(1.0 - f(t + 1) / f(t), 0.999);
    prod *= 1.0 - beta;
    ab.push_back(prod);
  }
  return NoiseSchedule(std::move(ab));
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t >= size()) {
    throw ConfigError("timestep " + std::to_string(t) + " outside schedule range [0, " + std::to_string(size()) + ")");
  }
  return alpha_bar_[t];
}

double NoiseSchedule::signal_scale(int t) const { return std::sqrt(alpha_bar(t)); }
double NoiseSchedule::noise_scale(int t) const { return std::sqrt(1.0 - alpha_bar(t)); }

torch::Tensor add_noise(const torch::Tensor& z0, int t, const torch::Tensor& eps, const NoiseSchedule& schedule) {
  if (!z0.sizes().equals(eps.sizes())) throw ShapeError("noise shape differs from latent shape");
  return z0 * schedule.signal_scale(t) + eps * schedule.noise_scale(t);
}

LatentVolume add_noise(const LatentVolume& z0, int t, const torch::Tensor& eps, const NoiseSchedule& schedule) {
  return LatentVolume(add_noise(z0.data(), t, eps, schedule));
}

torch::Tensor predict_clean(const torch::Tensor& z_t, const torch::Tensor& eps_hat, int t,
                            const NoiseSchedule& schedule) {
  if (!z_t.sizes().equals(eps_hat.sizes())) throw ShapeError("noise estimate shape differs from latent shape");
  return (z_t - eps_hat * schedule.noise_scale(t)) / schedule.signal_scale(t);
}

}  // namespace mirage::pipeline
