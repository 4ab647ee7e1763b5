// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "helpers.hpp"
#include "mirage/core/error.hpp"
#include "mirage/core/temporal.hpp"
#include "mirage/vae/causal_vae.hpp"

using namespace mirage;
using mirage::test::bit_equal;

namespace {

vae::CausalVae make_vae(int64_t latent_channels = 4, torch::Dtype dtype = torch::kDouble) {
  vae::VaeConfig cfg;
  cfg.latent_channels = latent_channels;
  torch::manual_seed(3);
  vae::CausalVae m(cfg);
  m->to(dtype);
  m->eval();
  return m;
}

std::vector<std::pair<int64_t, int64_t>> frames_of(const std::vector<vae::StageShape>& s) {
  std::vector<std::pair<int64_t, int64_t>> out;
  for (const auto& e : s) out.push_back({e.channels, e.frames});
  return out;
}

}  // namespace

TEST_SUITE("causal_vae") {
  TEST_CASE("latent shape for a 9-frame 64x96 clip") {
    auto m = make_vae(8, torch::kFloat);
    torch::manual_seed(1);
    const VideoClip clip(torch::rand({9, 64, 96, 3}));
    const auto z = vae::encode3d(m->encoder, clip);
    CHECK(z.data().sizes() == torch::IntArrayRef({8, 3, 8, 12}));
    const auto back = vae::decode3d(m->decoder, z);
    CHECK(back.frames().sizes() == torch::IntArrayRef({9, 64, 96, 3}));
  }

  TEST_CASE("stage feature shapes follow the schedule") {
    auto m = make_vae(4, torch::kFloat);
    torch::NoGradGuard g;
    const auto x = torch::rand({1, 3, 9, 32, 48}) * 2 - 1;
    const auto f = m->encoder->forward_features(x);
    const auto sched = vae::temporal_schedule(m->encoder->config(), 9);
    for (int i = 0; i < 4; ++i) {
      CHECK(f.stages[static_cast<size_t>(i)].size(1) == sched.encoder[static_cast<size_t>(i)].channels);
      CHECK(f.stages[static_cast<size_t>(i)].size(2) == sched.encoder[static_cast<size_t>(i)].frames);
      CHECK(f.stages[static_cast<size_t>(i)].size(3) == 32 / sched.encoder[static_cast<size_t>(i)].spatial_divisor);
    }
    std::vector<int64_t> dec_frames;
    vae::DecoderHook hook = [&](int, vae::HookPoint p, const torch::Tensor& h) {
      if (p == vae::HookPoint::kAfterBlock) dec_frames.push_back(h.size(2));
      return h;
    };
    m->decoder->forward(f.latent, hook);
    CHECK(dec_frames == std::vector<int64_t>{3, 5, 9, 9});
  }

  TEST_CASE("temporal schedules") {
    const auto desk = vae::temporal_schedule(vae::VaeConfig::desk(), 9);
    std::vector<int64_t> enc, dec;
    for (const auto& s : desk.encoder) enc.push_back(s.frames);
    for (const auto& s : desk.decoder) dec.push_back(s.frames);
    CHECK(enc == std::vector<int64_t>{9, 5, 3, 3});
    CHECK(dec == std::vector<int64_t>{3, 5, 9, 9});

    const auto full = vae::temporal_schedule(vae::VaeConfig::full_scale(), 9);
    CHECK(frames_of(full.encoder) == std::vector<std::pair<int64_t, int64_t>>{{128, 9}, {128, 5}, {256, 3}, {256, 3}});
    CHECK(frames_of(full.decoder) == std::vector<std::pair<int64_t, int64_t>>{{512, 3}, {512, 5}, {256, 9}, {256, 9}});

    // T = 5: each causal stride-2 stage maps n frames to 1 + (n-1)/2.
    const auto five = vae::temporal_schedule(vae::VaeConfig::desk(), 5);
    enc.clear();
    for (const auto& s : five.encoder) enc.push_back(s.frames);
    CHECK(enc == std::vector<int64_t>{5, 3, 2, 2});
    CHECK(five.decoder.front().frames == core::latent_frame_count(5));
  }

  TEST_CASE("encoder causality: perturbing frame 5 keeps latent slices 0 and 1") {
    auto m = make_vae();
    torch::NoGradGuard g;
    const auto x = torch::rand({1, 3, 9, 32, 48}, torch::kDouble) * 2 - 1;
    auto x2 = x.clone();
    x2.select(2, 5).add_(0.5);
    const auto z1 = m->encoder->forward(x), z2 = m->encoder->forward(x2);
    CHECK(bit_equal(z1.narrow(2, 0, 2), z2.narrow(2, 0, 2)));
    CHECK_FALSE(bit_equal(z1.select(2, 2), z2.select(2, 2)));
  }

  TEST_CASE("encoder causality at 32-bit within 1e-6") {
    auto m = make_vae(4, torch::kFloat);
    torch::NoGradGuard g;
    for (int64_t k = 1; k < 9; ++k) {
      const auto x = torch::rand({1, 3, 9, 16, 24}) * 2 - 1;
      auto x2 = x.clone();
      x2.narrow(2, k, 9 - k).copy_(torch::rand({1, 3, 9 - k, 16, 24}));
      const int64_t keep = core::frame_to_latent_index(k, 9);
      const auto z1 = m->encoder->forward(x), z2 = m->encoder->forward(x2);
      CHECK((z1.narrow(2, 0, keep) - z2.narrow(2, 0, keep)).abs().max().item<double>() <= 1e-6);
    }
  }

  TEST_CASE("decoder causality: perturbing latent slice 2 keeps frames 0-4") {
    auto m = make_vae();
    torch::NoGradGuard g;
    const auto z = torch::randn({1, 4, 3, 4, 6}, torch::kDouble);
    auto z2 = z.clone();
    z2.select(2, 2).add_(1.0);
    const auto y1 = m->decoder->forward(z), y2 = m->decoder->forward(z2);
    CHECK(bit_equal(y1.narrow(2, 0, 5), y2.narrow(2, 0, 5)));
    CHECK_FALSE(bit_equal(y1.narrow(2, 5, 4), y2.narrow(2, 5, 4)));
  }

  TEST_CASE("shape round trip over valid T, H, W") {
    auto m = make_vae(4, torch::kFloat);
    for (int64_t T : {1, 5, 9, 13})
      for (auto [H, W] : std::vector<std::pair<int64_t, int64_t>>{{8, 8}, {16, 40}, {32, 24}}) {
        const VideoClip c(torch::rand({T, H, W, 3}));
        const auto back = vae::decode3d(m->decoder, vae::encode3d(m->encoder, c));
        CHECK(back.frames().sizes() == c.frames().sizes());
      }
  }

  TEST_CASE("non-conforming batches are rejected") {
    auto m = make_vae(4, torch::kFloat);
    CHECK_THROWS_AS(m->encoder->forward(torch::rand({1, 3, 8, 16, 16})), ShapeError);
    CHECK_THROWS_AS(m->encoder->forward(torch::rand({1, 3, 9, 12, 16})), ShapeError);
    CHECK_THROWS_AS(m->encoder->forward(torch::rand({1, 4, 9, 16, 16})), ShapeError);
  }

  TEST_CASE("causal conv on a single frame equals a 2D conv with the folded kernel") {
    torch::manual_seed(8);
    const auto x = torch::randn({2, 3, 1, 6, 7}, torch::kDouble);
    const auto w = torch::randn({4, 3, 3, 3, 3}, torch::kDouble);
    const auto b = torch::randn({4}, torch::kDouble);
    const auto y = vae::causal_conv3d(x, w, b, {1, 1, 1});
    // Replicated first frame: every temporal tap sees frame 0.
    const auto ref = torch::conv2d(x.select(2, 0), w.sum(2), b, 1, 1);
    CHECK(torch::allclose(y.select(2, 0), ref, 1e-12, 1e-12));
  }

  TEST_CASE("causal conv output at time t depends only on inputs up to t") {
    torch::manual_seed(9);
    const auto x = torch::randn({1, 2, 7, 5, 5}, torch::kDouble);
    const auto w = torch::randn({3, 2, 3, 3, 3}, torch::kDouble);
    const auto b = torch::zeros({3}, torch::kDouble);
    const auto y = vae::causal_conv3d(x, w, b, {1, 1, 1});
    CHECK(y.size(2) == 7);
    for (int64_t t = 0; t < 7; ++t) {
      auto x2 = x.clone();
      x2.narrow(2, t, 7 - t).add_(1.0);
      const auto y2 = vae::causal_conv3d(x2, w, b, {1, 1, 1});
      CHECK(bit_equal(y.narrow(2, 0, t), y2.narrow(2, 0, t)));
    }
    // Direct oracle for one interior output: sum over taps of frames t-2..t.
    const int64_t t = 4;
    auto ref = torch::zeros({1, 3, 5, 5}, torch::kDouble);
    for (int64_t k = 0; k < 3; ++k) ref += torch::conv2d(x.select(2, t - 2 + k), w.select(2, k), {}, 1, 1);
    CHECK(torch::allclose(y.select(2, t), ref, 1e-12, 1e-12));
  }

  TEST_CASE("strided causal conv groups frames {0},{1,2},{3,4}") {
    torch::manual_seed(10);
    const auto x = torch::randn({1, 2, 5, 4, 4}, torch::kDouble);
    const auto w = torch::randn({2, 2, 3, 1, 1}, torch::kDouble);
    const auto y = vae::causal_conv3d(x, w, torch::zeros({2}, torch::kDouble), {2, 1, 1});
    CHECK(y.size(2) == 3);
    auto x2 = x.clone();
    x2.select(2, 3).add_(1.0);
    const auto y2 = vae::causal_conv3d(x2, w, torch::zeros({2}, torch::kDouble), {2, 1, 1});
    CHECK(bit_equal(y.narrow(2, 0, 2), y2.narrow(2, 0, 2)));
    CHECK_FALSE(bit_equal(y.select(2, 2), y2.select(2, 2)));
  }

  TEST_CASE("frame group norm never mixes frames") {
    vae::FrameGroupNorm n(2, 4);
    n->to(torch::kDouble);
    const auto x = torch::randn({1, 4, 3, 5, 5}, torch::kDouble);
    auto x2 = x.clone();
    x2.select(2, 2).mul_(3.0).add_(1.0);
    const auto y = n->forward(x), y2 = n->forward(x2);
    CHECK(bit_equal(y.narrow(2, 0, 2), y2.narrow(2, 0, 2)));
  }
}
