// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mirage/core/error.hpp"
#include "mirage/pipeline/model.hpp"

using namespace mirage;
using namespace mirage::pipeline;
using mirage::test::bit_equal;
using mirage::test::TempDir;

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.denoiser.width = 32;
  c.denoiser.depth = 1;
  c.denoiser.heads = 2;
  c.denoiser.time_embed_dim = 16;
  return c;
}

VideoClip random_clip(uint64_t seed) {
  torch::manual_seed(seed);
  return VideoClip(torch::rand({5, 32, 48, 3}));
}

// Without clipping the product telescopes: ᾱ_t = f(t+1)/f(0).
double cosine_closed_form(int t, int steps, double s) {
  auto f = [&](double u) {
    const double c = std::cos((u / steps + s) / (1 + s) * M_PI / 2);
    return c * c;
  };
  return f(t + 1) / f(0);
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("cosine schedule matches an independent product and is strictly decreasing") {
    const auto sched = NoiseSchedule::cosine(1000);
    REQUIRE(sched.size() == 1000);
    for (int t = 0; t < 1000; ++t) {
      if (t < 990) CHECK(std::abs(sched.alpha_bar(t) / cosine_closed_form(t, 1000, 0.008) - 1.0) <= 1e-9);
      CHECK(sched.alpha_bar(t) > 0.0);
      CHECK(sched.alpha_bar(t) <= 1.0);
      if (t > 0) CHECK(sched.alpha_bar(t) < sched.alpha_bar(t - 1));
      CHECK(std::abs(sched.signal_scale(t) * sched.signal_scale(t) + sched.noise_scale(t) * sched.noise_scale(t) -
                     1.0) <= 1e-12);
    }
  }

  TEST_CASE("schedule rejects out-of-range timesteps and bad tables") {
    const auto sched = NoiseSchedule::cosine(1000);
    CHECK_THROWS_AS(sched.alpha_bar(-1), ConfigError);
    CHECK_THROWS_AS(sched.alpha_bar(1000), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule({0.9, 0.95}), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule({1.5}), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule({0.5, 0.0}), ConfigError);
  }

  TEST_CASE("add_noise worked examples") {
    const auto sched = NoiseSchedule({0.64, 0.36});
    const auto z0 = torch::tensor({1.0, -2.0}, torch::kDouble);
    const auto eps = torch::tensor({0.5, 1.0}, torch::kDouble);
    // √0.64 = 0.8, √0.36 = 0.6
    CHECK(torch::allclose(add_noise(z0, 0, eps, sched), torch::tensor({1.1, -1.0}, torch::kDouble)));
    // √0.36 = 0.6, √0.64 = 0.8
    CHECK(torch::allclose(add_noise(z0, 1, eps, sched), torch::tensor({1.0, -0.4}, torch::kDouble)));
  }

  TEST_CASE("add_noise has the right first two moments") {
    const auto sched = NoiseSchedule::cosine(1000);
    const int t = 199;
    torch::manual_seed(3);
    const auto z0 = torch::full({10000}, 2.0, torch::kDouble);
    const auto zt = add_noise(z0, t, torch::randn({10000}, torch::kDouble), sched);
    const double mean = zt.mean().item<double>(), var = zt.var().item<double>();
    const double m_ref = 2.0 * sched.signal_scale(t), v_ref = 1.0 - sched.alpha_bar(t);
    CHECK(std::abs(mean - m_ref) <= 0.02 * m_ref);
    CHECK(std::abs(var - v_ref) <= 0.05 * v_ref);
  }

  TEST_CASE("predict_clean inverts add_noise with the true noise") {
    const auto sched = NoiseSchedule::cosine(1000);
    torch::manual_seed(4);
    const auto z0 = torch::randn({4, 3, 4, 6}, torch::kDouble);
    const auto eps = torch::randn({4, 3, 4, 6}, torch::kDouble);
    for (int t : {0, 199, 500, 999}) {
      const auto back = predict_clean(add_noise(z0, t, eps, sched), eps, t, sched);
      CHECK(((back - z0).abs().max()).item<double>() <= 1e-5 * std::max(1.0, 1.0 / sched.signal_scale(t)));
    }
  }

  TEST_CASE("one-step denoise with a zero predictor rescales the input") {
    const auto sched = NoiseSchedule::cosine(1000);
    const auto z = torch::randn({1, 4, 3, 4, 6}, torch::kDouble);
    NoisePredictor zero = [](const torch::Tensor& x, int) { return torch::zeros_like(x); };
    const auto out = one_step_denoise(zero, z, 199, sched);
    CHECK(torch::allclose(out, z / sched.signal_scale(199), 1e-12, 1e-12));
  }

  TEST_CASE("one-step denoise sees the clean latent, not a noised one") {
    const auto sched = NoiseSchedule::cosine(1000);
    const auto z = torch::randn({1, 4, 3, 4, 6}, torch::kDouble);
    torch::Tensor seen;
    int calls = 0;
    NoisePredictor spy = [&](const torch::Tensor& x, int t) {
      seen = x.clone();
      ++calls;
      CHECK(t == 199);
      return 0.5 * x;
    };
    const auto out = one_step_denoise(spy, z, 199, sched);
    CHECK(calls == 1);
    CHECK(bit_equal(seen, z));
    CHECK(torch::allclose(out, (z - sched.noise_scale(199) * 0.5 * z) / sched.signal_scale(199), 1e-12, 1e-12));
  }

  TEST_CASE("noise prediction loss: perfect predictor gives 0, zero predictor about 1") {
    const auto sched = NoiseSchedule::cosine(1000);
    torch::manual_seed(5);
    const auto z0 = torch::randn({2, 4, 3, 8, 8}, torch::kDouble);
    const auto eps = torch::randn({2, 4, 3, 8, 8}, torch::kDouble);
    const int t = 300;
    NoisePredictor oracle = [&](const torch::Tensor& zt, int tt) {
      return (zt - sched.signal_scale(tt) * z0) / sched.noise_scale(tt);
    };
    CHECK(noise_pred_loss(oracle, z0, t, eps, sched).item<double>() <= 1e-20);
    NoisePredictor zero = [](const torch::Tensor& x, int) { return torch::zeros_like(x); };
    CHECK(std::abs(noise_pred_loss(zero, z0, t, eps, sched).item<double>() - 1.0) <= 0.1);
  }

  TEST_CASE("denoiser preserves the latent shape and counts calls") {
    DenoiserConfig dc = tiny_model().denoiser;
    PatchDenoiser den(dc);
    torch::NoGradGuard g;
    const auto z = torch::randn({1, 4, 3, 4, 6});
    const auto out = den->forward(z, 199);
    CHECK(out.sizes() == z.sizes());
    CHECK(den->forward_calls() == 1);
    CHECK_THROWS(den->forward(torch::randn({1, 4, 3, 5, 6}), 199));
  }

  TEST_CASE("edit is deterministic and produces a valid clip") {
    MirageModel m(tiny_model(), 11);
    m->eval();
    const auto clip = random_clip(1);
    const auto a = edit(m, clip);
    const auto b = edit(m, clip);
    CHECK(bit_equal(a.x_dr.frames(), b.x_dr.frames()));
    CHECK(a.x_dr.num_frames() == 5);
    CHECK(a.x_dr.height() == 32);
    CHECK(a.z_dr.num_slices() == 2);
    CHECK(a.timings_ms.count("total") == 1);
  }

  TEST_CASE("model construction is seeded") {
    MirageModel a(tiny_model(), 3), b(tiny_model(), 3), c(tiny_model(), 4);
    CHECK(hash_tensors(component_tensors(a, "vae")) == hash_tensors(component_tensors(b, "vae")));
    CHECK(hash_tensors(component_tensors(a, "vae")) != hash_tensors(component_tensors(c, "vae")));
  }

  TEST_CASE("checkpoint round trip reproduces the edit bit-for-bit") {
    TempDir tmp("ckpt");
    MirageModel m(tiny_model(), 12);
    {
      torch::NoGradGuard g;
      for (auto& p : m->parameters()) p.add_(0.01 * torch::randn_like(p));
    }
    m->eval();
    save_checkpoint(m, tmp / "ckpt");
    for (const auto& c : checkpoint_components()) CHECK(std::filesystem::exists(tmp / "ckpt" / (c + ".tc")));
    auto loaded = load_checkpoint(tmp / "ckpt");
    for (const auto& c : checkpoint_components()) {
      CHECK(hash_tensors(component_tensors(m, c)) == hash_tensors(component_tensors(loaded, c)));
    }
    const auto clip = random_clip(2);
    CHECK(bit_equal(edit(m, clip).x_dr.frames(), edit(loaded, clip).x_dr.frames()));
  }

  TEST_CASE("missing checkpoint component is named") {
    TempDir tmp("ckpt");
    MirageModel m(tiny_model(), 13);
    save_checkpoint(m, tmp / "ckpt");
    std::filesystem::remove(tmp / "ckpt" / "injection.tc");
    try {
      load_checkpoint(tmp / "ckpt");
      FAIL("expected a load error");
    } catch (const LoadError& e) {
      CHECK(std::string(e.what()).find("injection") != std::string::npos);
    }
  }

  TEST_CASE("model config survives json") {
    auto c = tiny_model();
    c.injection.sites = {3, 4};
    c.adapters.rank = 4;
    const auto back = model_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
  }
}
