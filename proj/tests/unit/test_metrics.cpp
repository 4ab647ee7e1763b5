// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mirage/core/error.hpp"
#include "mirage/metrics/metrics.hpp"
#include "mirage/metrics/report.hpp"

using namespace mirage;
using namespace mirage::metrics;

namespace {

VideoClip constant_clip(double v, int64_t t = 5, int64_t h = 16, int64_t w = 24) {
  return VideoClip(torch::full({t, h, w, 3}, v, torch::kDouble));
}

VideoClip random_clip(uint64_t seed) {
  torch::manual_seed(seed);
  return VideoClip(torch::rand({5, 16, 24, 3}, torch::kDouble));
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("PSNR worked examples") {
    CHECK(psnr(constant_clip(0.0), constant_clip(0.1)) == doctest::Approx(20.0));
    CHECK(psnr(constant_clip(0.2), constant_clip(0.21)) == doctest::Approx(40.0));
    CHECK(psnr(constant_clip(0.5), constant_clip(0.5)) == kPsnrSentinel);
    // per-frame average: frame errors 0.1 and 0.01 → 20 and 40 dB
    auto a = torch::zeros({5, 8, 8, 3}, torch::kDouble);
    auto b = a.clone();
    b.fill_(0.01);
    b[0].fill_(0.1);
    const double expect = (20.0 + 4 * 40.0) / 5.0;
    CHECK(psnr(a, b) == doctest::Approx(expect));
    CHECK_THROWS_AS(psnr(a, b.narrow(1, 0, 4)), ShapeError);
  }

  TEST_CASE("SSIM of constant frames reduces to the luminance term") {
    const double c1 = 0.01 * 0.01;
    const double expect = (2 * 0.5 * 0.3 + c1) / (0.25 + 0.09 + c1);
    CHECK(ssim(constant_clip(0.5), constant_clip(0.3)) == doctest::Approx(expect).epsilon(1e-9));
    const auto r = random_clip(1);
    CHECK(ssim(r, r) == doctest::Approx(1.0));
    CHECK(ssim(r, random_clip(2)) < 0.5);
    CHECK(ssim(r, random_clip(2)) == doctest::Approx(ssim(random_clip(2), r)));
  }

  TEST_CASE("SSIM rejects frames smaller than its window") {
    const auto a = torch::zeros({1, 8, 10, 3}, torch::kDouble);
    CHECK_THROWS_AS(ssim(a, a), InputError);
  }

  TEST_CASE("warp error is zero along the true motion") {
    torch::manual_seed(3);
    const auto base = torch::rand({16, 40, 3}, torch::kDouble);
    std::vector<torch::Tensor> frames;
    for (int t = 0; t < 5; ++t) frames.push_back(base.narrow(1, 2 * t, 24));
    // frame t+1 at x equals frame t at x+2, so content at p moves to p − 2
    const VideoClip x(torch::stack(frames));
    auto flow = torch::zeros({4, 16, 24, 2}, torch::kDouble);
    flow.select(3, 0).fill_(-2.0);
    CHECK(warp_error(x, flow) == doctest::Approx(0.0));
    CHECK(warp_error(x, torch::zeros_like(flow)) > 0.01);
    CHECK(warp_error(x, flow, {}, true) == doctest::Approx(0.0));
    auto mask = torch::zeros({4, 16, 24}, torch::kDouble);
    CHECK(warp_error(x, torch::zeros_like(flow), mask) == 0.0);
    CHECK_THROWS_AS(warp_error(x, flow.narrow(0, 0, 3)), ShapeError);
    CHECK_THROWS_AS(warp_error(x, flow, torch::zeros({4, 16, 23})), ShapeError);
  }

  TEST_CASE("warp error uses bilinear sampling") {
    // Horizontal ramp: a half-pixel flow samples the midpoint.
    auto f = torch::zeros({5, 8, 16, 3}, torch::kDouble);
    for (int64_t xx = 0; xx < 16; ++xx) f.select(2, xx).fill_(xx / 16.0);
    const VideoClip x(f);
    auto flow = torch::zeros({4, 8, 16, 2}, torch::kDouble);
    flow.select(3, 0).fill_(0.5);
    // every valid sample differs by 0.5/16
    CHECK(warp_error(x, flow, {}, true) == doctest::Approx(0.5 / 16.0));
    CHECK(warp_error(x, flow) == doctest::Approx(std::pow(0.5 / 16.0, 2)));
  }

  TEST_CASE("Fréchet distance examples") {
    Eigen::MatrixXd a(4, 2);
    a << 0, 0, 1, 0, 0, 1, 1, 1;
    CHECK(frechet_distance(a, a) == doctest::Approx(0.0).epsilon(1e-9));
    Eigen::MatrixXd b = a;
    b.col(0).array() += 3.0;
    b.col(1).array() -= 4.0;
    CHECK(frechet_distance(a, b) == doctest::Approx(25.0));
    // isotropic scaling by 2: Tr(Σ + 4Σ − 2·2Σ) = Tr(Σ)
    Eigen::MatrixXd c = 2.0 * a;
    const Eigen::RowVectorXd mu_a = a.colwise().mean(), mu_c = c.colwise().mean();
    const Eigen::MatrixXd ca = a.rowwise() - mu_a;
    const double tr = (ca.transpose() * ca).trace() / (a.rows() - 1);
    CHECK(frechet_distance(a, c) == doctest::Approx((mu_a - mu_c).squaredNorm() + tr));
    CHECK(frechet_distance(a, c) == doctest::Approx(frechet_distance(c, a)));
    CHECK_THROWS_AS(frechet_distance(a.topRows(1), b), InputError);
    CHECK_THROWS_AS(frechet_distance(a, Eigen::MatrixXd::Zero(4, 3)), InputError);
  }

  TEST_CASE("actor window grows the box union by the margin") {
    std::vector<alignment::BBox2D> boxes{{10, 10, 20, 20}, {12, 8, 18, 16}};
    const auto w = actor_window(boxes, 64, 96, 0.1);
    // union [10,20]×[8,20]; margins 1 and 1.2
    CHECK(w.x0 == 9);
    CHECK(w.x1 == 21);
    CHECK(w.y0 == 6);
    CHECK(w.y1 == 22);
    const auto clamped = actor_window(std::vector<alignment::BBox2D>{{0, 0, 96, 64}}, 64, 96, 0.1);
    CHECK(clamped.x0 == 0);
    CHECK(clamped.x1 == 96);
    CHECK_THROWS_AS(actor_window(std::vector<alignment::BBox2D>{}, 64, 96), InputError);
    CHECK_THROWS_AS(actor_window(std::vector<alignment::BBox2D>{{5, 5, 5, 9}}, 64, 96), InputError);
    CHECK_THROWS_AS(actor_window(std::vector<alignment::BBox2D>{{200, 200, 210, 210}}, 64, 96), InputError);
    const auto c = actor_crop(random_clip(4), std::vector<alignment::BBox2D>{{2, 3, 10, 7}}, 0.0);
    CHECK(c.sizes() == torch::IntArrayRef({5, 4, 8, 3}));
  }

  TEST_CASE("mode names") {
    CHECK(parse_mode("full_resolution") == EvalMode::kFullResolution);
    CHECK(parse_mode("actor_centric") == EvalMode::kActorCentric);
    CHECK(std::string(mode_name(EvalMode::kActorCentric)) == "actor_centric");
    CHECK_THROWS_AS(parse_mode("cropped"), ConfigError);
  }

  TEST_CASE("evaluate aggregates per-clip values and is order independent") {
    std::vector<EvalItem> items;
    for (int i = 0; i < 3; ++i) {
      auto gt = random_clip(10 + i);
      auto pred = VideoClip((gt.frames() + 0.05 * (i + 1)).clamp(0, 1));
      items.push_back({"c" + std::to_string(i), pred, gt, {}, {}, {{2, 2, 14, 14}}});
    }
    const auto r = evaluate(items, EvalMode::kFullResolution);
    REQUIRE(r.clips.size() == 3);
    double mean = 0;
    for (const auto& c : r.clips) mean += c.psnr / 3;
    CHECK(r.aggregate.at("psnr") == doctest::Approx(mean));
    CHECK(r.aggregate.count("vfid") == 1);
    CHECK(r.aggregate.count("e_warp") == 0);
    CHECK(r.clips[0].psnr > r.clips[2].psnr);

    std::vector<EvalItem> rev(items.rbegin(), items.rend());
    const auto r2 = evaluate(rev, EvalMode::kFullResolution);
    for (const auto& k : {"psnr", "ssim", "perceptual", "vfid"}) {
      CHECK(r2.aggregate.at(k) == doctest::Approx(r.aggregate.at(k)).epsilon(1e-9));
    }

    const auto one = evaluate({items[0]}, EvalMode::kFullResolution);
    CHECK(one.aggregate.count("vfid") == 0);

    const auto actor = evaluate(items, EvalMode::kActorCentric);
    REQUIRE(actor.clips[0].crop.has_value());
    CHECK(actor.clips[0].crop->x1 - actor.clips[0].crop->x0 == 16);

    const auto j = r.to_json();
    CHECK(j.contains("aggregate"));
    CHECK(r.table().find("c1") != std::string::npos);
  }

  TEST_CASE("identical prediction reports the sentinel") {
    const auto g = random_clip(20);
    const auto r = evaluate({{"same", g, g, {}, {}, {}}}, EvalMode::kFullResolution);
    CHECK(r.clips[0].psnr == kPsnrSentinel);
    CHECK(r.clips[0].ssim == doctest::Approx(1.0));
    CHECK(r.clips[0].perceptual == doctest::Approx(0.0));
  }

  TEST_CASE("actor-centric evaluation needs boxes") {
    const auto g = random_clip(21);
    CHECK_THROWS_AS(evaluate({{"x", g, g, {}, {}, {}}}, EvalMode::kActorCentric), InputError);
  }

  TEST_CASE("video features are deterministic") {
    VideoFeatureNet a, b;
    const auto c = random_clip(22);
    CHECK((a->features(c) - b->features(c)).norm() == 0.0);
  }
  TEST_CASE("PSNR matches a direct per-frame formula") {
    torch::manual_seed(30);
    const auto a = torch::rand({5, 16, 24, 3}, torch::kDouble);
    const auto b = torch::rand({5, 16, 24, 3}, torch::kDouble);
    const auto* pa = a.data_ptr<double>();
    const auto* pb = b.data_ptr<double>();
    const int64_t per = 16 * 24 * 3;
    double total = 0;
    for (int64_t t = 0; t < 5; ++t) {
      double se = 0;
      for (int64_t i = 0; i < per; ++i) se += (pa[t * per + i] - pb[t * per + i]) * (pa[t * per + i] - pb[t * per + i]);
      total += 10.0 * std::log10(1.0 / (se / per));
    }
    CHECK(std::abs(psnr(a, b) - total / 5) <= 1e-9);
  }
}
