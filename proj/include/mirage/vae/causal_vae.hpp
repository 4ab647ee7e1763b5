// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <array>
#include <functional>

#include "mirage/core/video.hpp"
#include "mirage/vae/causal_conv.hpp"
#include "mirage/vae/config.hpp"

namespace mirage::vae {

struct EncoderFeatures {
  torch::Tensor latent;                 // [B, C_z, T', H/8, W/8]
  std::array<torch::Tensor, 4> stages;  // Enc-1 .. Enc-4 outputs
};

/// Causal 3D encoder: [B,3,T,H,W] in [-1,1] → [B,C_z,T',H/8,W/8].
class CausalEncoder3dImpl : public torch::nn::Module {
 public:
  explicit CausalEncoder3dImpl(const VaeConfig& cfg);

  torch::Tensor forward(const torch::Tensor& x) { return forward_features(x).latent; }
  EncoderFeatures forward_features(const torch::Tensor& x);

  const VaeConfig& config() const { return cfg_; }

  CausalConv3d conv_in{nullptr}, conv_out{nullptr};
  std::array<ResBlock3d, 4> blocks{nullptr, nullptr, nullptr, nullptr};
  std::array<CausalConv3d, 3> downs{nullptr, nullptr, nullptr};
  FrameGroupNorm norm_out{nullptr};

 private:
  VaeConfig cfg_;
};
TORCH_MODULE(CausalEncoder3d);

/// Where a decoder hook fires inside stage k (1-based, Dec-1..Dec-4):
/// before the stage's residual block (after its upsampler) or after it.
enum class HookPoint { kBeforeBlock, kAfterBlock };

/// Called at every hook point; returns the (possibly modified) feature.
using DecoderHook = std::function<torch::Tensor(int stage, HookPoint point, const torch::Tensor& h)>;

/// Causal 3D decoder: [B,C_z,T',h,w] → [B,3,T,8h,8w] in network space.
class CausalDecoder3dImpl : public torch::nn::Module {
 public:
  explicit CausalDecoder3dImpl(const VaeConfig& cfg);

  torch::Tensor forward(const torch::Tensor& z, const DecoderHook& hook = {});

  const VaeConfig& config() const { return cfg_; }

  CausalConv3d conv_in{nullptr}, conv_out{nullptr};
  std::array<ResBlock3d, 4> blocks{nullptr, nullptr, nullptr, nullptr};
  std::array<CausalUpsample, 3> ups{nullptr, nullptr, nullptr};
  FrameGroupNorm norm_out{nullptr};

 private:
  VaeConfig cfg_;
};
TORCH_MODULE(CausalDecoder3d);

/// Encoder/decoder pair registered as "encoder" and "decoder".
class CausalVaeImpl : public torch::nn::Module {
 public:
  explicit CausalVaeImpl(const VaeConfig& cfg);

  CausalEncoder3d encoder{nullptr};
  CausalDecoder3d decoder{nullptr};
};
TORCH_MODULE(CausalVae);

/// Inference-mode encode of one clip.
LatentVolume encode3d(CausalEncoder3d& encoder, const VideoClip& clip);

/// Inference-mode decode of one latent. The output clip has 1 + 4(T'−1) frames.
/// `hook`, if given, is forwarded to the decoder (used for latent injection).
VideoClip decode3d(CausalDecoder3d& decoder, const LatentVolume& z, double fps = 10.0,
                   const DecoderHook& hook = {});

/// Checks a network-layout batch [B,3,T,H,W] against the clip invariants.
void check_video_batch(const torch::Tensor& x);

}  // namespace mirage::vae
