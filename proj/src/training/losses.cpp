// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/training/losses.hpp"

#include <cmath>

#include "mirage/core/error.hpp"

namespace mirage::training {

PerceptualNetImpl::PerceptualNetImpl(uint64_t seed, std::array<int64_t, 4> widths) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  int64_t in = 3;
  for (size_t k = 0; k < widths.size(); ++k) {
    const int64_t out = widths[k];
    const double std = 1.0 / std::sqrt(static_cast<double>(in * 9));
    weights.push_back(register_buffer("weight" + std::to_string(k),
                                      at::normal(0.0, std, {out, in, 3, 3}, gen, torch::kFloat)));
    biases.push_back(register_buffer("bias" + std::to_string(k), at::normal(0.0, 0.1, {out}, gen, torch::kFloat)));
    in = out;
  }
}

std::vector<torch::Tensor> PerceptualNetImpl::features(const torch::Tensor& frames) {
  std::vector<torch::Tensor> out;
  torch::Tensor h = frames;
  for (size_t k = 0; k < weights.size(); ++k) {
    if (k > 0 && h.size(-1) >= 2 && h.size(-2) >= 2) h = torch::avg_pool2d(h, 2);
    h = torch::tanh(torch::conv2d(h, weights[k].to(h.scalar_type()), biases[k].to(h.scalar_type()), 1, 1));
    out.push_back(h);
  }
  return out;
}

torch::Tensor fold_frames(const torch::Tensor& video) {
  auto v = video.dim() == 4 ? video.unsqueeze(0) : video;
  if (v.dim() != 5 || v.size(1) != 3) throw ShapeError("expected a [B, 3, T, H, W] or [3, T, H, W] video tensor");
  return v.transpose(1, 2).reshape({v.size(0) * v.size(2), 3, v.size(3), v.size(4)});
}

namespace {

void check_same(const torch::Tensor& a, const torch::Tensor& b) {
  if (!a.sizes().equals(b.sizes())) throw ShapeError("loss inputs have different shapes");
}

torch::Tensor unit_normalize(const torch::Tensor& f) {
  return f / torch::sqrt((f * f).sum(1, true) + 1e-10);
}

}  // namespace

torch::Tensor perceptual_distance(PerceptualNet& net, const torch::Tensor& a, const torch::Tensor& b) {
  check_same(a, b);
  const auto fa = net->features(fold_frames(a));
  const auto fb = net->features(fold_frames(b));
  torch::Tensor total = torch::zeros({}, a.options());
  for (size_t k = 0; k < fa.size(); ++k) {
    auto d = (unit_normalize(fa[k]) - unit_normalize(fb[k])).pow(2).sum(1);  // [N, h, w]
    total = total + d.mean();
  }
  return total;
}

torch::Tensor gram_matrix(const torch::Tensor& features) {
  if (features.dim() < 2) throw ShapeError("gram_matrix expects [C, N] or [B, C, N]");
  return torch::matmul(features, features.transpose(-2, -1)) / static_cast<double>(features.size(-1));
}

torch::Tensor gram_loss(PerceptualNet& net, const torch::Tensor& a, const torch::Tensor& b) {
  check_same(a, b);
  const auto fa = net->features(fold_frames(a));
  const auto fb = net->features(fold_frames(b));
  torch::Tensor total = torch::zeros({}, a.options());
  for (size_t k = 0; k < fa.size(); ++k) {
    auto ga = gram_matrix(fa[k].flatten(2));
    auto gb = gram_matrix(fb[k].flatten(2));
    total = total + (ga - gb).pow(2).sum({1, 2}).mean();
  }
  return total;
}

LossTerms loss_vae(PerceptualNet& net, const torch::Tensor& x_ro, const torch::Tensor& x_gt, double lambda1) {
  check_same(x_ro, x_gt);
  LossTerms t;
  t.mse = torch::mse_loss(x_ro, x_gt);
  t.perceptual = perceptual_distance(net, x_ro, x_gt);
  t.gram = torch::zeros({}, x_ro.options());
  t.total = t.mse + lambda1 * t.perceptual;
  return t;
}

LossTerms loss_harmon(PerceptualNet& net, const torch::Tensor& x_dr, const torch::Tensor& x_gt, double gram_weight,
                      double lambda2) {
  check_same(x_dr, x_gt);
  LossTerms t;
  t.mse = torch::mse_loss(x_dr, x_gt).detach();
  t.perceptual = perceptual_distance(net, x_dr, x_gt);
  t.gram = gram_weight > 0 ? gram_loss(net, x_dr, x_gt) : torch::zeros({}, x_dr.options());
  t.total = t.perceptual + gram_weight * lambda2 * t.gram;
  return t;
}

}  // namespace mirage::training
