// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/injection/injection.hpp"

#include <string>

#include "mirage/core/error.hpp"

namespace mirage::injection {

namespace {

std::string dims(const torch::Tensor& t) {
  std::string s = "[";
  for (int64_t i = 0; i < t.dim(); ++i) s += (i ? "," : "") + std::to_string(t.size(i));
  return s + "]";
}

int stage_divisor(int stage) { return 1 << (4 - stage); }

}  // namespace

std::vector<Tap> InjectionConfig::taps() const {
  return {Tap{1, 1, full_channels}, Tap{2, 2, half_channels}};
}

const torch::Tensor& TapSet::at_divisor(int divisor) const {
  if (divisor == 1) return full;
  if (divisor == 2) return half;
  throw ConfigError("no tap at spatial scale 1/" + std::to_string(divisor));
}

FrameEncoder2dImpl::FrameEncoder2dImpl(const InjectionConfig& cfg) {
  using namespace torch::nn;
  conv_in = register_module("conv_in", Conv2d(Conv2dOptions(3, cfg.full_channels, 3).padding(1)));
  norm1 = register_module("norm1", GroupNorm(GroupNormOptions(cfg.norm_groups, cfg.full_channels)));
  conv1 = register_module("conv1", Conv2d(Conv2dOptions(cfg.full_channels, cfg.full_channels, 3).padding(1)));
  down = register_module("down",
                         Conv2d(Conv2dOptions(cfg.full_channels, cfg.half_channels, 3).stride(2).padding(1)));
  norm2 = register_module("norm2", GroupNorm(GroupNormOptions(cfg.norm_groups, cfg.half_channels)));
  conv2 = register_module("conv2", Conv2d(Conv2dOptions(cfg.half_channels, cfg.half_channels, 3).padding(1)));
}

TapSet FrameEncoder2dImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 5 || x.size(1) != 3) throw ShapeError("2D tap encoder expects [B,3,T,H,W], got " + dims(x));
  const auto b = x.size(0), t = x.size(2);
  // Batch of B·T independent images.
  auto frames = x.permute({0, 2, 1, 3, 4}).reshape({b * t, 3, x.size(3), x.size(4)});
  auto h = conv_in(frames);
  auto full = h + conv1(torch::silu(norm1(h)));
  auto g = down(full);
  auto half = g + conv2(torch::silu(norm2(g)));
  auto unfold = [&](const torch::Tensor& f) {
    return f.reshape({b, t, f.size(1), f.size(2), f.size(3)}).permute({0, 2, 1, 3, 4});
  };
  return TapSet{unfold(full), unfold(half)};
}

CmfbImpl::CmfbImpl(int64_t decoder_channels, int64_t tap_channels) {
  weight = register_parameter("weight", torch::zeros({decoder_channels, decoder_channels + tap_channels, 1, 1, 1}));
  bias = register_parameter("bias", torch::zeros({decoder_channels}));
}

torch::Tensor CmfbImpl::forward(const torch::Tensor& z3d, const torch::Tensor& tap) {
  if (z3d.size(2) != tap.size(2)) {
    throw ShapeError("fusion frame mismatch: decoder " + dims(z3d) + " vs tap " + dims(tap));
  }
  if (z3d.size(3) != tap.size(3) || z3d.size(4) != tap.size(4)) {
    throw ShapeError("fusion spatial mismatch: decoder " + dims(z3d) + " vs tap " + dims(tap));
  }
  if (z3d.size(1) + tap.size(1) != weight.size(1)) {
    throw ShapeError("fusion channel mismatch: decoder " + dims(z3d) + " vs tap " + dims(tap));
  }
  return z3d + torch::conv3d(torch::cat({z3d, tap}, 1), weight, bias);
}

torch::Tensor cmfb_fuse(Cmfb& block, const torch::Tensor& z3d, const torch::Tensor& tap) {
  if (z3d.dim() == 4 && tap.dim() == 4) return block(z3d.unsqueeze(0), tap.unsqueeze(0)).squeeze(0);
  if (z3d.dim() != 5 || tap.dim() != 5) throw ShapeError("fusion inputs must both be [C,T,h,w] or [B,C,T,h,w]");
  return block(z3d, tap);
}

InjectorImpl::InjectorImpl(const InjectionConfig& cfg, const vae::VaeConfig& vae_cfg)
    : cfg_(cfg), vae_cfg_(vae_cfg) {
  if (cfg.enabled) {
    for (int stage : cfg.sites) {
      if (stage < 1 || stage > 4) throw ConfigError("fusion site must be a decoder stage 1..4");
      // A stage keeps a one-to-one frame correspondence only if no temporal
      // upsampling happens after it.
      for (int k = stage - 1; k < 3; ++k) {
        if (vae_cfg.temporal_downsample[k]) {
          throw ContractError("temporal leakage site: decoder stage " + std::to_string(stage) +
                              " runs below the output frame count");
        }
      }
      const int div = stage_divisor(stage);
      if (div > 2) throw ConfigError("no tap at spatial scale 1/" + std::to_string(div));
      const int64_t tap_ch = div == 1 ? cfg.full_channels : cfg.half_channels;
      const int64_t dec_ch = vae_cfg.decoder_channels[stage - 1];
      cmfbs.emplace(stage, register_module("cmfb" + std::to_string(stage), Cmfb(dec_ch, tap_ch)));
    }
  }
  if (cfg.skip3d) {
    // Decoder stage s meets encoder stage 5-s at the same spatial scale.
    for (int stage = 2; stage <= 4; ++stage) {
      const int64_t dec_ch = vae_cfg.decoder_channels[stage - 1];
      const int64_t enc_ch = vae_cfg.encoder_channels[4 - stage];
      auto block = register_module("skip" + std::to_string(stage), Cmfb(dec_ch, enc_ch));
      torch::NoGradGuard guard;
      block->weight.normal_(0.0, 1.0 / std::sqrt(static_cast<double>(dec_ch + enc_ch)));
      skips.emplace(stage, block);
    }
  }
}

vae::DecoderHook InjectorImpl::hook(const TapSet& taps) const {
  if (!cfg_.enabled) return {};
  const auto point = cfg_.placement == Placement::kAfterBlock ? vae::HookPoint::kAfterBlock
                                                              : vae::HookPoint::kBeforeBlock;
  auto blocks = cmfbs;
  return [blocks, taps, point](int stage, vae::HookPoint p, const torch::Tensor& h) -> torch::Tensor {
    if (p != point) return h;
    auto it = blocks.find(stage);
    if (it == blocks.end()) return h;
    auto block = it->second;
    return block(h, taps.at_divisor(stage_divisor(stage)));
  };
}

vae::DecoderHook InjectorImpl::skip_hook(const vae::EncoderFeatures& features) const {
  auto blocks = skips;
  return [blocks, features](int stage, vae::HookPoint p, const torch::Tensor& h) -> torch::Tensor {
    if (p != vae::HookPoint::kAfterBlock) return h;
    auto it = blocks.find(stage);
    if (it == blocks.end()) return h;
    torch::Tensor f = features.stages[4 - stage];
    while (f.size(2) < h.size(2)) f = vae::upsample_time_causal(f);
    auto block = it->second;
    return block(h, f);
  };
}

std::map<int, torch::Tensor> encode2d_taps(FrameEncoder2d& encoder, const VideoClip& clip) {
  torch::NoGradGuard guard;
  const auto dtype = encoder->conv_in->weight.scalar_type();
  auto taps = encoder(clip.to_network().to(dtype));
  return {{1, taps.full.squeeze(0).contiguous()}, {2, taps.half.squeeze(0).contiguous()}};
}

torch::Tensor decode_network(vae::CausalDecoder3d& decoder, Injector& injector, const torch::Tensor& z,
                             const TapSet* taps) {
  if (!taps || !injector->config().enabled) return decoder(z);
  const int64_t frames = vae::causal_upsample_frames(vae::causal_upsample_frames(z.size(2)));
  if (taps->full.size(2) != frames || taps->half.size(2) != frames) {
    throw ShapeError("tap/latent frame-count mismatch: taps have " + std::to_string(taps->full.size(2)) +
                     " frames, latent decodes to " + std::to_string(frames));
  }
  return decoder(z, injector->hook(*taps));
}

VideoClip decode_with_injection(vae::CausalDecoder3d& decoder, Injector& injector, const LatentVolume& z,
                                const TapSet& taps, double fps) {
  torch::NoGradGuard guard;
  const auto dtype = decoder->conv_in->weight.scalar_type();
  return VideoClip::from_network(decode_network(decoder, injector, z.batched().to(dtype), &taps), fps);
}

int64_t first_changed_frame(const torch::Tensor& a, const torch::Tensor& b) {
  // [B,C,T,H,W]
  for (int64_t t = 0; t < a.size(2); ++t) {
    if (!torch::equal(a.select(2, t), b.select(2, t))) return t;
  }
  return -1;
}

}  // namespace mirage::injection
