// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <map>
#include <vector>

#include "mirage/core/video.hpp"
#include "mirage/vae/causal_vae.hpp"

namespace mirage::injection {

/// One tapped 2D-encoder feature.
struct Tap {
  int encoder_stage;     // 1 = full resolution, 2 = half resolution
  int spatial_divisor;   // 1 or 2
  int64_t channels;
};

enum class Placement {
  kAfterBlock,   // fuse at the output of the decoder stage (default)
  kBeforeBlock,  // fuse right after the stage's upsampler, before its residual block
};

struct InjectionConfig {
  bool enabled = true;
  Placement placement = Placement::kAfterBlock;
  std::vector<int> sites{3, 4};  // decoder stages receiving a fusion block
  int64_t full_channels = 16;    // 2D encoder width at scale 1
  int64_t half_channels = 16;    // 2D encoder width at scale 1/2
  int64_t norm_groups = 4;
  /// Anti-pattern for ablations: skip 3D encoder features straight into the decoder.
  bool skip3d = false;

  std::vector<Tap> taps() const;
};

/// Per-frame taps in network layout [B, C, T, h, w].
struct TapSet {
  torch::Tensor full;  // scale 1
  torch::Tensor half;  // scale 1/2

  const torch::Tensor& at_divisor(int divisor) const;
};

/// Frame-wise 2D convolutional encoder. Frames are folded into the batch axis,
/// so no operation can mix information across time.
class FrameEncoder2dImpl : public torch::nn::Module {
 public:
  explicit FrameEncoder2dImpl(const InjectionConfig& cfg);

  /// [B,3,T,H,W] → taps at scales 1 and 1/2, reshaped back to [B,C,T,h,w].
  TapSet forward(const torch::Tensor& x);

  torch::nn::Conv2d conv_in{nullptr}, conv1{nullptr}, down{nullptr}, conv2{nullptr};
  torch::nn::GroupNorm norm1{nullptr}, norm2{nullptr};
};
TORCH_MODULE(FrameEncoder2d);

/// Cross-modal fusion block: concatenate decoder and tap features along
/// channels and merge with a 1×1×1 convolution, added residually. The merge
/// weights start at zero so a fresh block returns its decoder input unchanged.
class CmfbImpl : public torch::nn::Module {
 public:
  CmfbImpl(int64_t decoder_channels, int64_t tap_channels);
  torch::Tensor forward(const torch::Tensor& z3d, const torch::Tensor& tap);

  torch::Tensor weight;  // [C_dec, C_dec + C_tap, 1, 1, 1]
  torch::Tensor bias;    // [C_dec]
};
TORCH_MODULE(Cmfb);

/// Holds the fusion blocks ("cmfb<stage>") and, for the ablation variant,
/// the 3D skip merges ("skip<stage>").
class InjectorImpl : public torch::nn::Module {
 public:
  /// Throws ContractError("temporal leakage site") if a site's decoder stage
  /// does not run at the full frame count.
  InjectorImpl(const InjectionConfig& cfg, const vae::VaeConfig& vae_cfg);

  /// Decoder hook fusing `taps` at the configured sites.
  vae::DecoderHook hook(const TapSet& taps) const;
  /// Decoder hook adding skip-connected encoder stages (ablation variant).
  vae::DecoderHook skip_hook(const vae::EncoderFeatures& features) const;

  const InjectionConfig& config() const { return cfg_; }
  std::map<int, Cmfb> cmfbs;
  std::map<int, Cmfb> skips;

 private:
  InjectionConfig cfg_;
  vae::VaeConfig vae_cfg_;
};
TORCH_MODULE(Injector);

/// Per-frame 2D taps of one clip, [C, T, h, w] per tap.
std::map<int, torch::Tensor> encode2d_taps(FrameEncoder2d& encoder, const VideoClip& clip);

/// Fuses one tap into one decoder feature (batched [B,C,T,h,w] or unbatched [C,T,h,w]).
/// Throws ShapeError when frame counts or spatial sizes differ.
torch::Tensor cmfb_fuse(Cmfb& block, const torch::Tensor& z3d, const torch::Tensor& tap);

/// decode3d with taps fused at the injector's sites. Inference mode.
VideoClip decode_with_injection(vae::CausalDecoder3d& decoder, Injector& injector, const LatentVolume& z,
                                const TapSet& taps, double fps = 10.0);

/// Network-space variant used by training and tests: z [B,C_z,T',h,w] → [B,3,T,H,W].
torch::Tensor decode_network(vae::CausalDecoder3d& decoder, Injector& injector, const torch::Tensor& z,
                             const TapSet* taps);

/// Source frame k perturbed; returns the first output frame index that changed
/// when only the side channel (taps or skip features) sees the perturbation, or
/// -1 if nothing changed. Used by the isolation checks.
int64_t first_changed_frame(const torch::Tensor& a, const torch::Tensor& b);

}  // namespace mirage::injection
