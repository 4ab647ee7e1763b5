// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "mirage/adapters/lora.hpp"
#include "mirage/core/error.hpp"
#include "mirage/pipeline/model.hpp"

using namespace mirage;
using mirage::test::bit_equal;

namespace {

vae::CausalDecoder3d make_decoder() {
  torch::manual_seed(31);
  vae::CausalDecoder3d d(vae::VaeConfig{});
  d->eval();
  return d;
}

pipeline::ModelConfig tiny_model() {
  pipeline::ModelConfig c;
  c.denoiser.width = 32;
  c.denoiser.depth = 2;
  c.denoiser.heads = 2;
  c.denoiser.time_embed_dim = 16;
  return c;
}

std::map<std::string, std::shared_ptr<torch::nn::Module>> modules_by_name(torch::nn::Module& root) {
  std::map<std::string, std::shared_ptr<torch::nn::Module>> m;
  for (auto& item : root.named_modules()) m[item.key()] = item.value();
  return m;
}

}  // namespace

TEST_SUITE("adapters") {
  TEST_CASE("zero-init causal LoRA leaves the decoder output bit-identical") {
    auto d = make_decoder();
    const auto z = torch::randn({1, 4, 3, 4, 6});
    torch::NoGradGuard g;
    const auto before = d->forward(z);
    Rng rng(1);
    adapters::CausalLora3dSpec spec;
    spec.targets = pipeline::default_decoder_lora_targets();
    adapters::attach(*d, spec, rng);
    spec.name = adapters::kHarmonizationLora;
    adapters::attach(*d, spec, rng);
    CHECK(bit_equal(d->forward(z), before));
  }

  TEST_CASE("zero-init 2D LoRA leaves the denoiser output bit-identical") {
    pipeline::DenoiserConfig dc;
    dc.width = 32;
    dc.depth = 2;
    dc.heads = 2;
    dc.time_embed_dim = 16;
    torch::manual_seed(2);
    pipeline::PatchDenoiser den(dc);
    const auto z = torch::randn({1, 4, 3, 4, 6});
    torch::NoGradGuard g;
    const auto before = den->forward(z, 199);
    Rng rng(2);
    adapters::Lora2dSpec spec;
    spec.targets = dc.attention_projections();
    adapters::attach(*den, spec, rng);
    CHECK(bit_equal(den->forward(z, 199), before));
  }

  TEST_CASE("trainable parameter count matches the enumerated branch shapes") {
    auto d = make_decoder();
    adapters::CausalLora3dSpec spec;
    spec.targets = pipeline::default_decoder_lora_targets();
    const auto mods = modules_by_name(*d);
    int64_t expected = 0;
    for (const auto& t : spec.targets) {
      auto conv = std::dynamic_pointer_cast<vae::CausalConv3dImpl>(mods.at(t));
      REQUIRE(conv);
      const int64_t in = conv->options().in_channels, out = conv->options().out_channels;
      // down [r, in, 1,1,1] + up [out, r, 3,3,3]
      expected += spec.rank * in + out * spec.rank * 27;
    }
    Rng rng(3);
    const auto group = adapters::attach(*d, spec, rng);
    CHECK(group.parameter_count() == expected);
    CHECK(adapters::expected_parameter_count(*d, spec) == expected);

    pipeline::DenoiserConfig dc;
    pipeline::PatchDenoiser den(dc);
    adapters::Lora2dSpec s2;
    s2.targets = dc.attention_projections();
    const int64_t per = s2.rank * dc.width + dc.width * s2.rank;
    const auto g2 = adapters::attach(*den, s2, rng);
    CHECK(g2.parameter_count() == per * static_cast<int64_t>(s2.targets.size()));
  }

  TEST_CASE("only branch parameters appear in the trainable group") {
    auto d = make_decoder();
    std::set<std::string> base;
    for (auto& p : d->named_parameters(true)) base.insert(p.key());
    adapters::CausalLora3dSpec spec;
    spec.targets = {"block4.conv1", "conv_out"};
    Rng rng(4);
    const auto group = adapters::attach(*d, spec, rng);
    CHECK(group.parameters.size() == 4);
    for (const auto& [name, t] : group.parameters) {
      CHECK(base.count(name) == 0);
      CHECK(name.find(adapters::kReconstructionLora) != std::string::npos);
    }
  }

  TEST_CASE("attach errors") {
    auto d = make_decoder();
    Rng rng(5);
    adapters::CausalLora3dSpec spec;
    spec.targets = {"block4.conv1"};
    adapters::attach(*d, spec, rng);
    try {
      adapters::attach(*d, spec, rng);
      FAIL("expected a contract error");
    } catch (const ContractError& e) {
      CHECK(std::string(e.what()).find("already adapted") != std::string::npos);
    }
    spec.targets = {"block4.conv9"};
    spec.name = adapters::kHarmonizationLora;
    try {
      adapters::attach(*d, spec, rng);
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("block4.conv9") != std::string::npos);
    }
    // A failed attach modifies nothing.
    spec.targets = {"conv_out", "nope"};
    CHECK_THROWS_AS(adapters::attach(*d, spec, rng), ConfigError);
    auto conv_out = std::dynamic_pointer_cast<vae::CausalConv3dImpl>(modules_by_name(*d).at("conv_out"));
    CHECK_FALSE(conv_out->has_branch(adapters::kHarmonizationLora));
  }

  TEST_CASE("2D LoRA merge matches the adapted forward") {
    torch::manual_seed(6);
    adapters::AdaptableLinear lin(12, 10);
    Rng rng(6);
    adapters::Lora2dSpec spec;
    auto root = std::make_shared<torch::nn::Module>();
    root->register_module("lin", lin);
    spec.targets = {"lin"};
    auto group = adapters::attach(*root, spec, rng);
    {
      torch::NoGradGuard g;
      for (auto& [n, p] : group.parameters) p.normal_();
    }
    const auto x = torch::randn({5, 12});
    torch::NoGradGuard g;
    const auto adapted = lin->forward(x);
    auto branch = std::dynamic_pointer_cast<adapters::Lora2dBranch>(lin->branch(adapters::kDenoiserLora));
    const auto w_ref = lin->weight + branch->scale * torch::mm(branch->up, branch->down);
    adapters::merge(*root, adapters::kDenoiserLora);
    CHECK_FALSE(lin->has_branch(adapters::kDenoiserLora));
    CHECK(torch::allclose(lin->weight, w_ref, 1e-6, 1e-6));
    const auto merged = lin->forward(x);
    CHECK(((merged - adapted).abs().max() / adapted.abs().max()).item<double>() <= 1e-5);
  }

  TEST_CASE("zero-init merge is a no-op") {
    adapters::AdaptableLinear lin(6, 6);
    auto root = std::make_shared<torch::nn::Module>();
    root->register_module("lin", lin);
    const auto w = lin->weight.clone();
    Rng rng(7);
    adapters::Lora2dSpec spec;
    spec.targets = {"lin"};
    adapters::attach(*root, spec, rng);
    adapters::merge(*root, adapters::kDenoiserLora);
    CHECK(bit_equal(lin->weight, w));
  }

  TEST_CASE("causal 3D branches with a temporal kernel are runtime-branch only") {
    auto d = make_decoder();
    Rng rng(8);
    adapters::CausalLora3dSpec spec;
    spec.targets = {"block4.conv1"};
    adapters::attach(*d, spec, rng);
    try {
      adapters::merge(*d, adapters::kReconstructionLora);
      FAIL("expected a contract error");
    } catch (const ContractError& e) {
      CHECK(std::string(e.what()).find("runtime-branch only") != std::string::npos);
    }
  }

  TEST_CASE("causal 3D branch with a 1x1x1 kernel merges") {
    auto d = make_decoder();
    d->to(torch::kDouble);
    Rng rng(9);
    adapters::CausalLora3dSpec spec;
    spec.targets = {"block4.conv1", "conv_out"};
    spec.kernel = {1, 1, 1};
    auto group = adapters::attach(*d, spec, rng);
    {
      torch::NoGradGuard g;
      for (auto& [n, p] : group.parameters) p.normal_(0.0, 0.1);
    }
    d->to(torch::kDouble);
    torch::NoGradGuard g;
    const auto z = torch::randn({1, 4, 3, 4, 6}, torch::kDouble);
    const auto adapted = d->forward(z);
    adapters::merge(*d, adapters::kReconstructionLora);
    const auto merged = d->forward(z);
    CHECK(((merged - adapted).abs().max() / adapted.abs().max()).item<double>() <= 1e-5);
  }

  TEST_CASE("causal LoRA branches stay causal") {
    auto d = make_decoder();
    d->to(torch::kDouble);
    Rng rng(10);
    adapters::CausalLora3dSpec spec;
    spec.targets = pipeline::default_decoder_lora_targets();
    auto group = adapters::attach(*d, spec, rng);
    {
      torch::NoGradGuard g;
      for (auto& [n, p] : group.parameters) p.normal_(0.0, 0.1);
    }
    d->to(torch::kDouble);
    torch::NoGradGuard g;
    const auto z = torch::randn({1, 4, 3, 4, 6}, torch::kDouble);
    auto z2 = z.clone();
    z2.select(2, 1).add_(1.0);
    CHECK(bit_equal(d->forward(z).narrow(2, 0, 1), d->forward(z2).narrow(2, 0, 1)));
  }

  TEST_CASE("freeze contract partitions every parameter exactly once") {
    pipeline::MirageModel m(tiny_model(), 1);
    std::set<std::string> all;
    for (auto& p : m->named_parameters(true)) all.insert(p.key());
    for (auto stage : {adapters::Stage::kBase, adapters::Stage::kA, adapters::Stage::kH}) {
      const auto part = adapters::freeze_contract(*m, stage);
      std::set<std::string> seen;
      for (const auto& n : part.frozen) CHECK(seen.insert(n).second);
      for (const auto& n : part.trainable) CHECK(seen.insert(n).second);
      CHECK(seen == all);
    }
  }

  TEST_CASE("stage trainable groups") {
    pipeline::MirageModel m(tiny_model(), 1);
    auto roles = [&](adapters::Stage s) {
      std::set<adapters::ParameterRole> r;
      for (const auto& n : adapters::freeze_contract(*m, s).trainable) r.insert(adapters::classify_parameter(n));
      return r;
    };
    using R = adapters::ParameterRole;
    CHECK((roles(adapters::Stage::kA) == std::set<R>{R::kEncoder2d, R::kFusion, R::kReconstructionLora}));
    CHECK((roles(adapters::Stage::kH) == std::set<R>{R::kDenoiserLora, R::kHarmonizationLora}));
    CHECK((roles(adapters::Stage::kBase) == std::set<R>{R::kVaeBase, R::kDenoiserBase}));
    CHECK_THROWS_AS(adapters::classify_parameter("mystery.weight"), ContractError);
  }
}
