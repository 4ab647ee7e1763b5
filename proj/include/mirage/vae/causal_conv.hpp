// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace mirage::vae {

using Triple = std::array<int64_t, 3>;

struct CausalConv3dOptions {
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  Triple kernel{3, 3, 3};
  Triple stride{1, 1, 1};
  bool bias = true;
};

/// Additive side branch evaluated on the same (unpadded) input as its host
/// convolution. The result must match the host output shape.
class ConvBranch : public torch::nn::Module {
 public:
  virtual torch::Tensor forward(const torch::Tensor& x) = 0;
};

/// 3D convolution that only looks at the past along time.
///
/// The temporal axis is padded on the past side with kt-1 copies of the first
/// frame and never on the future side, so output slice τ (stride s) depends on
/// input frames ≤ s·τ. Spatial padding is zero, kernel/2 on each side.
class CausalConv3dImpl : public torch::nn::Module {
 public:
  explicit CausalConv3dImpl(const CausalConv3dOptions& options);

  torch::Tensor forward(const torch::Tensor& x);
  /// Host convolution alone, without side branches.
  torch::Tensor forward_base(const torch::Tensor& x);

  /// Registers a named side branch. Throws ContractError if `name` exists.
  void add_branch(const std::string& name, std::shared_ptr<ConvBranch> branch);
  bool has_branch(const std::string& name) const;
  std::shared_ptr<ConvBranch> branch(const std::string& name) const;
  void remove_branch(const std::string& name);
  const std::vector<std::pair<std::string, std::shared_ptr<ConvBranch>>>& branches() const { return branches_; }

  const CausalConv3dOptions& options() const { return options_; }

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  CausalConv3dOptions options_;
  std::vector<std::pair<std::string, std::shared_ptr<ConvBranch>>> branches_;
};
TORCH_MODULE(CausalConv3d);

/// Replicate-first-frame causal padding followed by conv3d with explicit weights.
/// Shared by host convolutions and adapter branches so both obey one rule.
torch::Tensor causal_conv3d(const torch::Tensor& x, const torch::Tensor& weight, const torch::Tensor& bias,
                            const Triple& stride);

/// GroupNorm applied independently to every time step: statistics are pooled
/// over (channel group, H, W) of one frame, never across frames.
class FrameGroupNormImpl : public torch::nn::Module {
 public:
  FrameGroupNormImpl(int64_t groups, int64_t channels, double eps = 1e-6);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  int64_t groups_;
  double eps_;
};
TORCH_MODULE(FrameGroupNorm);

/// norm → SiLU → conv → norm → SiLU → conv, plus a 1×1×1 shortcut when widths differ.
class ResBlock3dImpl : public torch::nn::Module {
 public:
  ResBlock3dImpl(int64_t in_channels, int64_t out_channels, int64_t groups);
  torch::Tensor forward(const torch::Tensor& x);

  FrameGroupNorm norm1{nullptr}, norm2{nullptr};
  CausalConv3d conv1{nullptr}, conv2{nullptr}, shortcut{nullptr};
};
TORCH_MODULE(ResBlock3d);

/// Nearest-neighbour upsampling followed by a causal conv. Temporally the
/// first frame is kept once and every later frame is doubled (T → 2T−1),
/// which keeps the anchor frame causal.
class CausalUpsampleImpl : public torch::nn::Module {
 public:
  CausalUpsampleImpl(int64_t in_channels, int64_t out_channels, bool temporal);
  torch::Tensor forward(const torch::Tensor& x);

  bool temporal() const { return temporal_; }
  CausalConv3d conv{nullptr};

 private:
  bool temporal_;
};
TORCH_MODULE(CausalUpsample);

/// T → 2T−1 with the first frame kept once.
torch::Tensor upsample_time_causal(const torch::Tensor& x);
/// H,W → 2H,2W nearest neighbour.
torch::Tensor upsample_space(const torch::Tensor& x);

}  // namespace mirage::vae
