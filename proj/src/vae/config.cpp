// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/vae/config.hpp"

#include <string>

#include "mirage/core/error.hpp"
#include "mirage/core/temporal.hpp"

namespace mirage::vae {

VaeConfig VaeConfig::desk() { return VaeConfig{}; }

VaeConfig VaeConfig::full_scale() {
  VaeConfig c;
  c.encoder_channels = {128, 128, 256, 256};
  c.decoder_channels = {512, 512, 256, 256};
  c.latent_channels = 16;
  c.norm_groups = 32;
  return c;
}

void VaeConfig::validate() const {
  auto check = [&](int64_t ch, const char* what) {
    if (ch <= 0 || ch % norm_groups != 0) {
      throw ConfigError(std::string(what) + " width " + std::to_string(ch) + " must be a positive multiple of " +
                        std::to_string(norm_groups) + " groups");
    }
  };
  if (norm_groups <= 0) throw ConfigError("norm_groups must be positive");
  for (auto c : encoder_channels) check(c, "encoder");
  for (auto c : decoder_channels) check(c, "decoder");
  if (latent_channels <= 0) throw ConfigError("latent_channels must be positive");
  int temporal = 0;
  for (bool b : temporal_downsample) temporal += b ? 1 : 0;
  if (temporal != 2) throw ConfigError("exactly two stages must downsample time (4x total)");
}

TemporalSchedule temporal_schedule(const VaeConfig& cfg, int64_t frames) {
  if (!core::valid_frame_count(frames)) {
    throw ShapeError("T = " + std::to_string(frames) + ": T ≡ 1 (mod 4) violated");
  }
  TemporalSchedule s;
  int64_t t = frames;
  int64_t div = 1;
  for (int k = 0; k < 4; ++k) {
    if (k > 0) {
      if (cfg.temporal_downsample[k - 1]) t = causal_downsample_frames(t);
      div *= 2;
    }
    s.encoder.push_back({cfg.encoder_channels[k], t, div});
  }
  // The decoder restores time in its first two transitions so that the last
  // two stages run at full frame rate.
  for (int k = 0; k < 4; ++k) {
    if (k > 0) {
      if (cfg.temporal_downsample[k - 1]) t = causal_upsample_frames(t);
      div /= 2;
    }
    s.decoder.push_back({cfg.decoder_channels[k], t, div});
  }
  return s;
}

}  // namespace mirage::vae
