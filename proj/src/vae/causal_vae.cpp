// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/vae/causal_vae.hpp"

#include <string>

#include "mirage/core/error.hpp"
#include "mirage/core/temporal.hpp"

namespace mirage::vae {

void check_video_batch(const torch::Tensor& x) {
  if (x.dim() != 5 || x.size(1) != 3) throw ShapeError("video batch must be [B,3,T,H,W]");
  if (!core::valid_frame_count(x.size(2))) {
    throw ShapeError("T = " + std::to_string(x.size(2)) + ": T ≡ 1 (mod 4) violated");
  }
  if (x.size(3) % 8 != 0 || x.size(4) % 8 != 0) throw ShapeError("H and W must be divisible by 8");
}

CausalEncoder3dImpl::CausalEncoder3dImpl(const VaeConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const auto& ch = cfg.encoder_channels;
  conv_in = register_module("conv_in", CausalConv3d(CausalConv3dOptions{3, ch[0]}));
  for (int k = 0; k < 4; ++k) {
    if (k > 0) {
      const int64_t st = cfg.temporal_downsample[k - 1] ? 2 : 1;
      downs[k - 1] = register_module("down" + std::to_string(k),
                                     CausalConv3d(CausalConv3dOptions{ch[k - 1], ch[k], {3, 3, 3}, {st, 2, 2}}));
    }
    blocks[k] = register_module("block" + std::to_string(k + 1), ResBlock3d(ch[k], ch[k], cfg.norm_groups));
  }
  norm_out = register_module("norm_out", FrameGroupNorm(cfg.norm_groups, ch[3]));
  conv_out = register_module("conv_out", CausalConv3d(CausalConv3dOptions{ch[3], cfg.latent_channels}));
}

EncoderFeatures CausalEncoder3dImpl::forward_features(const torch::Tensor& x) {
  check_video_batch(x);
  EncoderFeatures f;
  auto h = conv_in(x);
  for (int k = 0; k < 4; ++k) {
    if (k > 0) h = downs[k - 1](h);
    h = blocks[k](h);
    f.stages[k] = h;
  }
  f.latent = conv_out(torch::silu(norm_out(h)));
  return f;
}

CausalDecoder3dImpl::CausalDecoder3dImpl(const VaeConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const auto& ch = cfg.decoder_channels;
  conv_in = register_module("conv_in", CausalConv3d(CausalConv3dOptions{cfg.latent_channels, ch[0]}));
  for (int k = 0; k < 4; ++k) {
    if (k > 0) {
      ups[k - 1] = register_module("up" + std::to_string(k + 1),
                                   CausalUpsample(ch[k - 1], ch[k], cfg.temporal_downsample[k - 1]));
    }
    blocks[k] = register_module("block" + std::to_string(k + 1), ResBlock3d(ch[k], ch[k], cfg.norm_groups));
  }
  norm_out = register_module("norm_out", FrameGroupNorm(cfg.norm_groups, ch[3]));
  conv_out = register_module("conv_out", CausalConv3d(CausalConv3dOptions{ch[3], 3}));
}

torch::Tensor CausalDecoder3dImpl::forward(const torch::Tensor& z, const DecoderHook& hook) {
  if (z.dim() != 5 || z.size(1) != cfg_.latent_channels) {
    throw ShapeError("latent batch must be [B," + std::to_string(cfg_.latent_channels) + ",T',h,w]");
  }
  auto h = conv_in(z);
  for (int k = 0; k < 4; ++k) {
    const int stage = k + 1;
    if (k > 0) h = ups[k - 1](h);
    if (hook) h = hook(stage, HookPoint::kBeforeBlock, h);
    h = blocks[k](h);
    if (hook) h = hook(stage, HookPoint::kAfterBlock, h);
  }
  return conv_out(torch::silu(norm_out(h)));
}

CausalVaeImpl::CausalVaeImpl(const VaeConfig& cfg) {
  encoder = register_module("encoder", CausalEncoder3d(cfg));
  decoder = register_module("decoder", CausalDecoder3d(cfg));
}

LatentVolume encode3d(CausalEncoder3d& encoder, const VideoClip& clip) {
  torch::NoGradGuard guard;
  const auto dtype = encoder->conv_in->weight.scalar_type();
  auto z = encoder(clip.to_network().to(dtype));
  return LatentVolume(z.squeeze(0));
}

VideoClip decode3d(CausalDecoder3d& decoder, const LatentVolume& z, double fps, const DecoderHook& hook) {
  torch::NoGradGuard guard;
  const auto dtype = decoder->conv_in->weight.scalar_type();
  return VideoClip::from_network(decoder(z.batched().to(dtype), hook), fps);
}

}  // namespace mirage::vae
