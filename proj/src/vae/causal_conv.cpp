// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/vae/causal_conv.hpp"

#include <algorithm>

#include "mirage/core/error.hpp"

namespace mirage::vae {

torch::Tensor causal_conv3d(const torch::Tensor& x, const torch::Tensor& weight, const torch::Tensor& bias,
                            const Triple& stride) {
  const int64_t kt = weight.size(2);
  torch::Tensor padded = x;
  if (kt > 1) {
    auto first = x.narrow(2, 0, 1).expand({x.size(0), x.size(1), kt - 1, x.size(3), x.size(4)});
    padded = torch::cat({first, x}, 2);
  }
  return torch::conv3d(padded, weight, bias, {stride[0], stride[1], stride[2]},
                       {0, weight.size(3) / 2, weight.size(4) / 2});
}

CausalConv3dImpl::CausalConv3dImpl(const CausalConv3dOptions& options) : options_(options) {
  const auto& k = options.kernel;
  // Same default initialization torch uses for nn::Conv3d.
  torch::nn::Conv3d proto(torch::nn::Conv3dOptions(options.in_channels, options.out_channels, {k[0], k[1], k[2]})
                              .bias(options.bias));
  weight = register_parameter("weight", proto->weight.detach().clone());
  if (options.bias) bias = register_parameter("bias", proto->bias.detach().clone());
}

torch::Tensor CausalConv3dImpl::forward_base(const torch::Tensor& x) {
  return causal_conv3d(x, weight, bias, options_.stride);
}

torch::Tensor CausalConv3dImpl::forward(const torch::Tensor& x) {
  torch::Tensor y = forward_base(x);
  for (auto& [name, b] : branches_) y = y + b->forward(x);
  return y;
}

void CausalConv3dImpl::add_branch(const std::string& name, std::shared_ptr<ConvBranch> branch) {
  if (has_branch(name)) throw ContractError("already adapted: branch '" + name + "' exists");
  register_module(name, branch);
  branches_.emplace_back(name, std::move(branch));
}

bool CausalConv3dImpl::has_branch(const std::string& name) const {
  return std::any_of(branches_.begin(), branches_.end(), [&](const auto& b) { return b.first == name; });
}

std::shared_ptr<ConvBranch> CausalConv3dImpl::branch(const std::string& name) const {
  for (const auto& [n, b] : branches_)
    if (n == name) return b;
  return nullptr;
}

void CausalConv3dImpl::remove_branch(const std::string& name) {
  auto it = std::find_if(branches_.begin(), branches_.end(), [&](const auto& b) { return b.first == name; });
  if (it == branches_.end()) return;
  branches_.erase(it);
  unregister_module(name);
}

FrameGroupNormImpl::FrameGroupNormImpl(int64_t groups, int64_t channels, double eps)
    : groups_(groups), eps_(eps) {
  if (channels % groups != 0) {
    throw ConfigError("group count " + std::to_string(groups) + " does not divide " + std::to_string(channels));
  }
  weight = register_parameter("weight", torch::ones({channels}));
  bias = register_parameter("bias", torch::zeros({channels}));
}

torch::Tensor FrameGroupNormImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0), c = x.size(1), t = x.size(2), h = x.size(3), w = x.size(4);
  auto frames = x.permute({0, 2, 1, 3, 4}).reshape({b * t, c, h, w});
  auto y = torch::group_norm(frames, groups_, weight, bias, eps_);
  return y.reshape({b, t, c, h, w}).permute({0, 2, 1, 3, 4});
}

ResBlock3dImpl::ResBlock3dImpl(int64_t in_channels, int64_t out_channels, int64_t groups) {
  norm1 = register_module("norm1", FrameGroupNorm(groups, in_channels));
  conv1 = register_module("conv1", CausalConv3d(CausalConv3dOptions{in_channels, out_channels}));
  norm2 = register_module("norm2", FrameGroupNorm(groups, out_channels));
  conv2 = register_module("conv2", CausalConv3d(CausalConv3dOptions{out_channels, out_channels}));
  if (in_channels != out_channels) {
    shortcut = register_module(
        "shortcut", CausalConv3d(CausalConv3dOptions{in_channels, out_channels, {1, 1, 1}, {1, 1, 1}, true}));
  }
}

torch::Tensor ResBlock3dImpl::forward(const torch::Tensor& x) {
  auto h = conv1(torch::silu(norm1(x)));
  h = conv2(torch::silu(norm2(h)));
  return (shortcut ? shortcut(x) : x) + h;
}

torch::Tensor upsample_time_causal(const torch::Tensor& x) {
  if (x.size(2) == 1) return x;
  auto rest = x.narrow(2, 1, x.size(2) - 1).repeat_interleave(2, 2);
  return torch::cat({x.narrow(2, 0, 1), rest}, 2);
}

torch::Tensor upsample_space(const torch::Tensor& x) {
  return x.repeat_interleave(2, 3).repeat_interleave(2, 4);
}

CausalUpsampleImpl::CausalUpsampleImpl(int64_t in_channels, int64_t out_channels, bool temporal)
    : temporal_(temporal) {
  conv = register_module("conv", CausalConv3d(CausalConv3dOptions{in_channels, out_channels}));
}

torch::Tensor CausalUpsampleImpl::forward(const torch::Tensor& x) {
  auto h = temporal_ ? upsample_time_causal(x) : x;
  return conv(upsample_space(h));
}

}  // namespace mirage::vae
