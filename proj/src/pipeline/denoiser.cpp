// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/pipeline/denoiser.hpp"

#include <cmath>

#include "mirage/core/error.hpp"

namespace mirage::pipeline {

void DenoiserConfig::validate() const {
  for (auto p : patch)
    if (p < 1) throw ConfigError("patch sizes must be ≥ 1");
  if (width < 1 || depth < 1 || heads < 1 || latent_channels < 1) throw ConfigError("denoiser sizes must be ≥ 1");
  if (width % heads != 0) throw ConfigError("denoiser width must be divisible by heads");
  if (time_embed_dim % 2 != 0) throw ConfigError("timestep embedding dim must be even");
}

std::vector<std::string> DenoiserConfig::attention_projections() const {
  std::vector<std::string> names;
  for (int64_t i = 0; i < depth; ++i)
    for (const char* p : {"q", "k", "v", "out"}) names.push_back("blocks." + std::to_string(i) + "." + p);
  return names;
}

torch::Tensor sinusoidal_embedding(double position, int64_t dim, torch::Dtype dtype) {
  const int64_t half = dim / 2;
  auto freqs = torch::exp(torch::arange(half, torch::kDouble) * (-std::log(10000.0) / std::max<int64_t>(half, 1)));
  auto angles = freqs * position;
  return torch::cat({torch::sin(angles), torch::cos(angles)}).to(dtype);
}

namespace {

// Factorized fixed position code over the (t, y, x) token grid, [N, width].
torch::Tensor grid_embedding(int64_t nt, int64_t ny, int64_t nx, int64_t width, torch::Dtype dtype) {
  const int64_t per_axis = (width / 3) / 2 * 2;
  auto axis = [&](int64_t n) {
    std::vector<torch::Tensor> rows;
    for (int64_t i = 0; i < n; ++i) rows.push_back(sinusoidal_embedding(static_cast<double>(i), per_axis, torch::kDouble));
    return torch::stack(rows);
  };
  auto et = axis(nt).view({nt, 1, 1, per_axis}).expand({nt, ny, nx, per_axis});
  auto ey = axis(ny).view({1, ny, 1, per_axis}).expand({nt, ny, nx, per_axis});
  auto ex = axis(nx).view({1, 1, nx, per_axis}).expand({nt, ny, nx, per_axis});
  auto e = torch::cat({et, ey, ex}, -1).reshape({nt * ny * nx, 3 * per_axis});
  if (3 * per_axis < width) e = torch::constant_pad_nd(e, {0, width - 3 * per_axis});
  return e.to(dtype);
}

}  // namespace

TransformerBlockImpl::TransformerBlockImpl(int64_t width, int64_t heads, int64_t mlp_ratio) : heads_(heads) {
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  q = register_module("q", adapters::AdaptableLinear(width, width));
  k = register_module("k", adapters::AdaptableLinear(width, width));
  v = register_module("v", adapters::AdaptableLinear(width, width));
  out = register_module("out", adapters::AdaptableLinear(width, width));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  fc1 = register_module("fc1", torch::nn::Linear(width, width * mlp_ratio));
  fc2 = register_module("fc2", torch::nn::Linear(width * mlp_ratio, width));
}

torch::Tensor TransformerBlockImpl::forward(const torch::Tensor& x) {
  const int64_t b = x.size(0), n = x.size(1), d = x.size(2), dh = d / heads_;
  auto h = norm1(x);
  auto split = [&](const torch::Tensor& t) { return t.view({b, n, heads_, dh}).transpose(1, 2); };
  auto qh = split(q(h)), kh = split(k(h)), vh = split(v(h));
  auto attn = torch::softmax(torch::matmul(qh, kh.transpose(-2, -1)) / std::sqrt(static_cast<double>(dh)), -1);
  auto mixed = torch::matmul(attn, vh).transpose(1, 2).reshape({b, n, d});
  auto y = x + out(mixed);
  return y + fc2(torch::gelu(fc1(norm2(y))));
}

PatchDenoiserImpl::PatchDenoiserImpl(const DenoiserConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int64_t patch_dim = cfg.latent_channels * cfg.patch[0] * cfg.patch[1] * cfg.patch[2];
  patch_embed = register_module("patch_embed", adapters::AdaptableLinear(patch_dim, cfg.width));
  time_fc1 = register_module("time_fc1", torch::nn::Linear(cfg.time_embed_dim, cfg.width));
  time_fc2 = register_module("time_fc2", torch::nn::Linear(cfg.width, cfg.width));
  conditioning = register_parameter("conditioning", torch::randn({cfg.width}) * 0.02);
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int64_t i = 0; i < cfg.depth; ++i) blocks->push_back(TransformerBlock(cfg.width, cfg.heads, cfg.mlp_ratio));
  norm_out = register_module("norm_out", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.width})));
  proj_out = register_module("proj_out", adapters::AdaptableLinear(cfg.width, patch_dim));
}

torch::Tensor PatchDenoiserImpl::forward(const torch::Tensor& z, int t) {
  calls_.fetch_add(1);
  if (z.dim() != 5 || z.size(1) != cfg_.latent_channels) {
    throw ShapeError("denoiser expects [B, " + std::to_string(cfg_.latent_channels) + ", T', h, w]");
  }
  const auto [pt, ph, pw] = cfg_.patch;
  const int64_t b = z.size(0), c = z.size(1), tt = z.size(2), hh = z.size(3), ww = z.size(4);
  if (tt % pt || hh % ph || ww % pw) throw ShapeError("latent dims not divisible by patch dims");
  const int64_t nt = tt / pt, ny = hh / ph, nx = ww / pw;

  auto tokens = z.view({b, c, nt, pt, ny, ph, nx, pw})
                    .permute({0, 2, 4, 6, 1, 3, 5, 7})
                    .reshape({b, nt * ny * nx, c * pt * ph * pw});
  const auto dtype = conditioning.scalar_type();
  auto temb = time_fc2(torch::silu(time_fc1(sinusoidal_embedding(t, cfg_.time_embed_dim, dtype))));
  auto h = patch_embed(tokens) + grid_embedding(nt, ny, nx, cfg_.width, dtype) + temb + conditioning;
  for (const auto& blk : *blocks) h = blk->as<TransformerBlock>()->forward(h);
  auto patches = proj_out(norm_out(h));
  return patches.view({b, nt, ny, nx, c, pt, ph, pw})
      .permute({0, 4, 1, 5, 2, 6, 3, 7})
      .reshape({b, c, tt, hh, ww});
}

torch::Tensor one_step_denoise(const NoisePredictor& eps_model, const torch::Tensor& z, int t,
                               const NoiseSchedule& schedule) {
  schedule.alpha_bar(t);  // range check before running the model
  return predict_clean(z, eps_model(z, t), t, schedule);
}

torch::Tensor one_step_denoise(PatchDenoiser& denoiser, const torch::Tensor& z, int t, const NoiseSchedule& schedule) {
  return one_step_denoise([&](const torch::Tensor& x, int s) { return denoiser->forward(x, s); }, z, t, schedule);
}

LatentVolume one_step_denoise(PatchDenoiser& denoiser, const LatentVolume& z, int t, const NoiseSchedule& schedule) {
  torch::NoGradGuard no_grad;
  return LatentVolume(one_step_denoise(denoiser, z.batched(), t, schedule).squeeze(0));
}

torch::Tensor noise_pred_loss(const NoisePredictor& eps_model, const torch::Tensor& z0, int t,
                              const torch::Tensor& eps, const NoiseSchedule& schedule) {
  auto z_t = add_noise(z0, t, eps, schedule);
  return torch::mse_loss(eps_model(z_t, t), eps);
}

torch::Tensor noise_pred_loss(PatchDenoiser& denoiser, const torch::Tensor& z0, int t, const torch::Tensor& eps,
                              const NoiseSchedule& schedule) {
  return noise_pred_loss([&](const torch::Tensor& x, int s) { return denoiser->forward(x, s); }, z0, t, eps, schedule);
}

}  // namespace mirage::pipeline
