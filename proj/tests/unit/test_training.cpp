// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "mirage/core/error.hpp"
#include "mirage/pipeline/model.hpp"
#include "mirage/training/losses.hpp"
#include "mirage/training/trainer.hpp"

using namespace mirage;
using namespace mirage::training;
using adapters::Stage;
using mirage::test::bit_equal;

namespace {

pipeline::ModelConfig tiny_model() {
  pipeline::ModelConfig c;
  c.denoiser.width = 32;
  c.denoiser.depth = 1;
  c.denoiser.heads = 2;
  c.denoiser.time_embed_dim = 16;
  return c;
}

std::vector<ClipPair> tiny_data() {
  torch::manual_seed(21);
  std::vector<ClipPair> d;
  for (int i = 0; i < 2; ++i) {
    const auto gt = torch::rand({5, 32, 48, 3});
    const auto ni = (gt + 0.1 * torch::randn_like(gt)).clamp(0, 1);
    d.push_back({"p" + std::to_string(i), VideoClip(ni), VideoClip(gt)});
  }
  return d;
}

StageConfig tiny_stage(Stage s) {
  auto c = StageConfig::desk(s);
  c.steps = 3;
  c.frames = 5;
  c.height = 32;
  c.width = 48;
  c.gram_activation_step = 1;
  c.warmup_steps = 1;
  c.lr = 1e-3;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("gram matrix worked example") {
    const auto f = torch::tensor({{1.0, 2.0}, {3.0, 4.0}}, torch::kDouble);
    const auto g = gram_matrix(f);
    CHECK(torch::allclose(g, torch::tensor({{2.5, 5.5}, {5.5, 12.5}}, torch::kDouble)));
    CHECK(torch::allclose(g, g.t()));
    const auto batched = gram_matrix(torch::stack({f, 2 * f}));
    CHECK(torch::allclose(batched[1], 4 * g));
    CHECK_THROWS_AS(gram_matrix(torch::ones({3})), ShapeError);
  }

  TEST_CASE("gram matrix is positive semidefinite") {
    torch::manual_seed(1);
    const auto g = gram_matrix(torch::randn({6, 40}, torch::kDouble));
    CHECK(torch::linalg_eigvalsh(g, "L").min().item<double>() >= -1e-12);
  }

  TEST_CASE("losses vanish on identical inputs and are positive otherwise") {
    PerceptualNet net;
    torch::manual_seed(2);
    const auto a = torch::rand({1, 3, 5, 32, 48});
    const auto b = (a + 0.2 * torch::randn_like(a)).clamp(0, 1);
    const auto same = loss_vae(net, a, a);
    CHECK(same.total.item<double>() == doctest::Approx(0.0).epsilon(1e-9));
    const auto diff = loss_vae(net, a, b, 0.1);
    CHECK(diff.total.item<double>() > 0.0);
    CHECK(diff.total.item<double>() ==
          doctest::Approx(diff.mse.item<double>() + 0.1 * diff.perceptual.item<double>()).epsilon(1e-6));
    CHECK(diff.mse.item<double>() == doctest::Approx((a - b).pow(2).mean().item<double>()).epsilon(1e-6));
    CHECK_THROWS_AS(loss_vae(net, a, b.narrow(3, 0, 16)), ShapeError);
  }

  TEST_CASE("harmonization loss gates the Gram term") {
    PerceptualNet net;
    torch::manual_seed(3);
    const auto a = torch::rand({1, 3, 5, 32, 48});
    const auto b = torch::rand({1, 3, 5, 32, 48});
    const auto off = loss_harmon(net, a, b, 0.0, 0.1);
    CHECK(off.total.item<double>() == doctest::Approx(off.perceptual.item<double>()));
    const auto on = loss_harmon(net, a, b, 1.0, 0.1);
    CHECK(on.total.item<double>() ==
          doctest::Approx(on.perceptual.item<double>() + 0.1 * on.gram.item<double>()).epsilon(1e-6));
    CHECK(on.gram.item<double>() > 0.0);
  }

  TEST_CASE("perceptual distance is symmetric, non-negative and zero on identity") {
    PerceptualNet net;
    torch::manual_seed(4);
    for (int i = 0; i < 5; ++i) {
      const auto a = torch::rand({3, 5, 16, 24});
      const auto b = torch::rand({3, 5, 16, 24});
      const double ab = perceptual_distance(net, a, b).item<double>();
      const double ba = perceptual_distance(net, b, a).item<double>();
      CHECK(ab >= 0.0);
      CHECK(ab == doctest::Approx(ba).epsilon(1e-6));
      CHECK(perceptual_distance(net, a, a).item<double>() == doctest::Approx(0.0));
    }
  }

  TEST_CASE("perceptual net is fixed by its seed") {
    PerceptualNet a(9), b(9);
    CHECK(bit_equal(a->weights[0], b->weights[0]));
    CHECK(a->parameters().empty());
  }

  TEST_CASE("Gram weight schedule") {
    auto cfg = StageConfig::full_scale(Stage::kH);
    CHECK(gram_weight_at(cfg, 0) == 0.0);
    CHECK(gram_weight_at(cfg, 1999) == 0.0);
    CHECK(gram_weight_at(cfg, 2000) == 1.0);
    cfg.warmup_target = WarmupTarget::kGramWeight;
    CHECK(gram_weight_at(cfg, 2000) == doctest::Approx(0.1));
    CHECK(gram_weight_at(cfg, 2499) == doctest::Approx(0.1));
    CHECK(gram_weight_at(cfg, 2500) == 1.0);
    CHECK(lr_at(cfg, 0) == cfg.lr);
  }

  TEST_CASE("learning-rate warm-up") {
    const auto cfg = StageConfig::full_scale(Stage::kH);
    CHECK(lr_at(cfg, 250) == doctest::Approx(1e-5));
    CHECK(lr_at(cfg, 499) == doctest::Approx(1e-5));
    CHECK(lr_at(cfg, 600) == doctest::Approx(1e-4));
    const auto a = StageConfig::full_scale(Stage::kA);
    CHECK(lr_at(a, 0) == doctest::Approx(1e-4));
    CHECK(a.steps == 10000);
    CHECK(a.batch_size == 8);
    CHECK(a.height == 512);
    CHECK(a.width == 768);
  }

  TEST_CASE("stage config validation") {
    auto c = StageConfig::desk(Stage::kA);
    c.frames = 8;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = StageConfig::desk(Stage::kA);
    c.lr = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("batch indices cover every example once per epoch") {
    std::multiset<size_t> seen;
    for (int step = 0; step < 5; ++step)
      for (size_t i : batch_indices(10, 2, step, 7)) seen.insert(i);
    for (size_t i = 0; i < 10; ++i) CHECK(seen.count(i) == 1);
    CHECK(batch_indices(10, 2, 3, 7) == batch_indices(10, 2, 3, 7));
    CHECK_THROWS_AS(batch_indices(0, 2, 0, 7), InputError);
  }

  TEST_CASE("short training runs are reproducible and respect the freeze contract") {
    const auto data = tiny_data();
    auto run = [&]() {
      pipeline::MirageModel m(tiny_model(), 17);
      auto base = tiny_stage(Stage::kBase);
      const auto r0 = pretrain_base(m, data, base);
      const auto ra = train_stage_a(m, data, tiny_stage(Stage::kA));
      check_gradient_contract(m, Stage::kA);
      const auto rh = train_stage_h(m, data, tiny_stage(Stage::kH));
      check_gradient_contract(m, Stage::kH);
      CHECK(ra.frozen_hash_before == ra.frozen_hash_after);
      CHECK(rh.frozen_hash_before == rh.frozen_hash_after);
      CHECK(r0.log.size() == 3);
      CHECK(rh.log.size() == 3);
      std::vector<double> losses;
      for (const auto* r : {&r0, &ra, &rh})
        for (const auto& e : r->log) losses.push_back(e.loss);
      std::map<std::string, torch::Tensor> all;
      for (auto& p : m->named_parameters(true)) all.emplace(p.key(), p.value());
      return std::make_pair(losses, pipeline::hash_tensors(all));
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }

  TEST_CASE("stage A trains only its group") {
    const auto data = tiny_data();
    pipeline::MirageModel m(tiny_model(), 18);
    const auto before = pipeline::hash_tensors(pipeline::component_tensors(m, "vae"));
    const auto inj_before = pipeline::hash_tensors(pipeline::component_tensors(m, "injection"));
    const auto r = train_stage_a(m, data, tiny_stage(Stage::kA));
    CHECK(pipeline::hash_tensors(pipeline::component_tensors(m, "vae")) == before);
    CHECK(pipeline::hash_tensors(pipeline::component_tensors(m, "injection")) != inj_before);
    for (const auto& n : r.trainable) {
      const auto role = adapters::classify_parameter(n);
      CHECK((role == adapters::ParameterRole::kEncoder2d || role == adapters::ParameterRole::kFusion ||
             role == adapters::ParameterRole::kReconstructionLora));
    }
  }

  TEST_CASE("empty training set is rejected") {
    pipeline::MirageModel m(tiny_model(), 19);
    CHECK_THROWS_AS(train_stage_a(m, {}, tiny_stage(Stage::kA)), InputError);
  }
}
