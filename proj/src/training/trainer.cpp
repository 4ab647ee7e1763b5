// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/training/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <set>

#include "mirage/core/error.hpp"
#include "mirage/core/rng.hpp"
#include "mirage/pipeline/denoiser.hpp"

namespace mirage::training {

using adapters::Stage;

StageConfig StageConfig::full_scale(Stage stage) {
  StageConfig c;
  c.stage = stage;
  c.steps = 10000;
  c.batch_size = 8;
  c.height = 512;
  c.width = 768;
  return c;
}

StageConfig StageConfig::desk(Stage stage) {
  StageConfig c;
  c.stage = stage;
  c.steps = 1000;
  return c;
}

void StageConfig::validate() const {
  if (steps < 0) throw ConfigError("steps must be ≥ 0");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (lambda1 < 0 || lambda2 < 0) throw ConfigError("loss weights must be ≥ 0");
  if (gram_activation_step < 0 || warmup_steps < 0) throw ConfigError("schedule steps must be ≥ 0");
  if (!(warmup_factor > 0)) throw ConfigError("warmup_factor must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be ≥ 1");
  if (frames < 1 || frames % 4 != 1) throw ConfigError("frames must satisfy T ≡ 1 (mod 4)");
  if (height % 8 || width % 8 || height < 8 || width < 8) throw ConfigError("clip size must be a positive multiple of 8");
}

double lr_at(const StageConfig& cfg, int step) {
  if (cfg.stage == Stage::kH && cfg.warmup_target == WarmupTarget::kLearningRate && step < cfg.warmup_steps) {
    return cfg.lr * cfg.warmup_factor;
  }
  return cfg.lr;
}

double gram_weight_at(const StageConfig& cfg, int step) {
  if (step < cfg.gram_activation_step) return 0.0;
  if (cfg.warmup_target == WarmupTarget::kGramWeight && step < cfg.gram_activation_step + cfg.warmup_steps) {
    return cfg.warmup_factor;
  }
  return 1.0;
}

std::vector<size_t> batch_indices(size_t n, int batch_size, int step, uint64_t seed) {
  if (n == 0) throw InputError("empty training set");
  std::vector<size_t> out;
  const size_t per_epoch = n;
  for (int b = 0; b < batch_size; ++b) {
    const size_t flat = static_cast<size_t>(step) * batch_size + b;
    const size_t epoch = flat / per_epoch;
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 eng(seed * 0x9E3779B97F4A7C15ULL + epoch);
    std::shuffle(perm.begin(), perm.end(), eng);
    out.push_back(perm[flat % per_epoch]);
  }
  return out;
}

uint64_t frozen_hash(pipeline::MirageModel& model, Stage stage) {
  const auto partition = adapters::freeze_contract(*model, stage);
  const std::set<std::string> frozen(partition.frozen.begin(), partition.frozen.end());
  std::map<std::string, torch::Tensor> tensors;
  for (const auto& p : model->named_parameters(true))
    if (frozen.count(p.key())) tensors.emplace(p.key(), p.value());
  return pipeline::hash_tensors(tensors);
}

void check_gradient_contract(pipeline::MirageModel& model, Stage stage) {
  const auto partition = adapters::freeze_contract(*model, stage);
  const std::set<std::string> frozen(partition.frozen.begin(), partition.frozen.end());
  for (const auto& p : model->named_parameters(true)) {
    if (frozen.count(p.key()) && p.value().grad().defined() && p.value().grad().abs().max().item<double>() != 0.0) {
      throw ContractError("gradient on frozen parameter '" + p.key() + "'");
    }
  }
}

namespace {

// Batch of network-layout clips [B,3,T,H,W] for the chosen pairs.
std::pair<torch::Tensor, torch::Tensor> make_batch(const std::vector<ClipPair>& data, const std::vector<size_t>& idx,
                                                   torch::Dtype dtype) {
  std::vector<torch::Tensor> ni, gt;
  for (size_t i : idx) {
    ni.push_back(data[i].ni.to_network().squeeze(0));
    gt.push_back(data[i].gt.to_network().squeeze(0));
  }
  return {torch::stack(ni).to(dtype), torch::stack(gt).to(dtype)};
}

using StepFn = std::function<LossTerms(const torch::Tensor& ni, const torch::Tensor& gt, int step)>;

StageResult run_stage(pipeline::MirageModel& model, const std::vector<ClipPair>& data, const StageConfig& cfg,
                      const TrainHooks& hooks, const StepFn& step_fn) {
  cfg.validate();
  if (data.empty()) throw InputError("empty training set");
  model->train();
  StageResult result;
  result.trainable = adapters::freeze_contract(*model, cfg.stage).trainable;
  auto params = adapters::apply_freeze(*model, cfg.stage);
  result.frozen_hash_before = frozen_hash(model, cfg.stage);

  torch::optim::AdamW opt(params, torch::optim::AdamWOptions(lr_at(cfg, 0)).betas({0.9, 0.999}).weight_decay(0.0));
  std::ofstream log;
  if (!hooks.log_path.empty()) {
    log.open(hooks.log_path, std::ios::app);
    if (!log) throw IoError("cannot write loss log " + hooks.log_path.string());
  }
  const auto dtype = model->denoiser->conditioning.scalar_type();

  for (int step = 0; step < cfg.steps; ++step) {
    const double lr = lr_at(cfg, step);
    for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
    auto [ni, gt] = make_batch(data, batch_indices(data.size(), cfg.batch_size, step, cfg.seed), dtype);
    opt.zero_grad();
    LossTerms terms = step_fn(ni, gt, step);
    if (!std::isfinite(terms.total.item<double>())) throw NumericError("non-finite loss at step " + std::to_string(step));
    terms.total.backward();
    check_gradient_contract(model, cfg.stage);
    opt.step();

    LogEntry e{step, terms.total.item<double>(), terms.mse.item<double>(), terms.perceptual.item<double>(),
               terms.gram.item<double>(), lr};
    result.log.push_back(e);
    if (log.is_open()) {
      nlohmann::json j{{"step", e.step}, {"loss", e.loss}, {"mse", e.mse}, {"perceptual", e.perceptual},
                       {"gram", e.gram}, {"lr", e.lr}};
      log << j.dump() << "\n";
    }
    if (hooks.print_every > 0 && (step % hooks.print_every == 0 || step + 1 == cfg.steps)) {
      std::cerr << "step " << step << " loss " << e.loss << " mse " << e.mse << "\n";
    }
  }
  opt.zero_grad();
  result.frozen_hash_after = frozen_hash(model, cfg.stage);
  if (result.frozen_hash_after != result.frozen_hash_before) throw ContractError("frozen parameters changed during training");
  model->eval();
  return result;
}

}  // namespace

StageResult pretrain_base(pipeline::MirageModel& model, const std::vector<ClipPair>& data, const StageConfig& cfg_in,
                          const TrainHooks& hooks) {
  StageConfig cfg = cfg_in;
  cfg.stage = Stage::kBase;
  PerceptualNet net;
  Rng rng = Rng(cfg.seed).fork("pretrain");
  const auto& schedule = model->schedule();
  return run_stage(model, data, cfg, hooks, [&](const torch::Tensor& ni, const torch::Tensor& gt, int) {
    auto x = torch::cat({gt, ni});
    auto z = model->vae->encoder(x);
    auto y = model->vae->decoder(z);
    LossTerms t = loss_vae(net, to_pixels(y), to_pixels(x), cfg.lambda1);
    const int ts = static_cast<int>(rng.uniform_int(0, schedule.size() - 1));
    auto eps = rng.normal(z.sizes(), z.scalar_type());
    auto denoise = pipeline::noise_pred_loss(model->denoiser, z.detach(), ts, eps, schedule);
    t.gram = denoise.detach();  // logged in the spare column
    t.total = t.total + denoise;
    return t;
  });
}

StageResult train_stage_a(pipeline::MirageModel& model, const std::vector<ClipPair>& data, const StageConfig& cfg_in,
                          const TrainHooks& hooks) {
  StageConfig cfg = cfg_in;
  cfg.stage = Stage::kA;
  PerceptualNet net;
  return run_stage(model, data, cfg, hooks, [&](const torch::Tensor& ni, const torch::Tensor& gt, int) {
    auto x_ro = model->reconstruct(gt, ni);
    return loss_vae(net, to_pixels(x_ro), to_pixels(gt), cfg.lambda1);
  });
}

StageResult train_stage_h(pipeline::MirageModel& model, const std::vector<ClipPair>& data, const StageConfig& cfg_in,
                          const TrainHooks& hooks) {
  StageConfig cfg = cfg_in;
  cfg.stage = Stage::kH;
  PerceptualNet net;
  return run_stage(model, data, cfg, hooks, [&](const torch::Tensor& ni, const torch::Tensor& gt, int step) {
    auto x_dr = model->edit_network(ni);
    return loss_harmon(net, to_pixels(x_dr), to_pixels(gt), gram_weight_at(cfg, step), cfg.lambda2);
  });
}

}  // namespace mirage::training
