// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mirage/adapters/lora.hpp"
#include "mirage/core/video.hpp"
#include "mirage/pipeline/model.hpp"
#include "mirage/training/losses.hpp"

namespace mirage::training {

/// What the initial constant warm-up period scales in Stage H.
enum class WarmupTarget { kLearningRate, kGramWeight };

struct StageConfig {
  adapters::Stage stage = adapters::Stage::kA;
  int steps = 10000;
  double lr = 1e-4;
  double lambda1 = 0.1;  // perceptual weight in Stage A
  double lambda2 = 0.1;  // Gram weight in Stage H
  int gram_activation_step = 2000;
  int warmup_steps = 500;
  double warmup_factor = 0.1;
  WarmupTarget warmup_target = WarmupTarget::kLearningRate;
  int batch_size = 2;
  int frames = 9;
  int height = 64;
  int width = 96;
  uint64_t seed = 0;

  /// Full-size preset (512×768, 10k steps, batch 8). Kept as configuration only.
  static StageConfig full_scale(adapters::Stage stage);
  /// Desk preset: 9-frame 64×96 clips, batch 2, 1000 steps.
  static StageConfig desk(adapters::Stage stage);

  void validate() const;
};

/// Stage H: lr·warmup_factor during the first warmup_steps (when the warm-up
/// targets the learning rate), lr afterwards. Other stages: constant lr.
double lr_at(const StageConfig& cfg, int step);

/// 0 before gram_activation_step, 1 after; warmup_factor during the first
/// warmup_steps after activation when the warm-up targets the Gram weight.
double gram_weight_at(const StageConfig& cfg, int step);

struct ClipPair {
  std::string id;
  VideoClip ni;
  VideoClip gt;
};

struct LogEntry {
  int step;
  double loss;
  double mse;
  double perceptual;
  double gram;
  double lr;
};

struct StageResult {
  std::vector<LogEntry> log;
  uint64_t frozen_hash_before = 0;
  uint64_t frozen_hash_after = 0;
  std::vector<std::string> trainable;
};

/// Optional per-step JSONL sink; empty path disables it.
struct TrainHooks {
  std::filesystem::path log_path;
  int print_every = 0;  // 0 = silent
};

/// Base warm start: VAE reconstruction (MSE + λ1·perceptual, no injection) plus
/// the denoiser's noise-prediction loss at a uniformly drawn timestep. Uses
/// both clips of every pair.
StageResult pretrain_base(pipeline::MirageModel& model, const std::vector<ClipPair>& data, const StageConfig& cfg,
                          const TrainHooks& hooks = {});

/// Stage A: x_RO = D(E(x_GT)) with taps from x_NI, loss_vae. Only the Stage A group trains.
StageResult train_stage_a(pipeline::MirageModel& model, const std::vector<ClipPair>& data, const StageConfig& cfg,
                          const TrainHooks& hooks = {});

/// Stage H: loss_harmon through the full one-step edit path. Only the Stage H group trains.
StageResult train_stage_h(pipeline::MirageModel& model, const std::vector<ClipPair>& data, const StageConfig& cfg,
                          const TrainHooks& hooks = {});

/// Hash of every parameter outside the stage's trainable group.
uint64_t frozen_hash(pipeline::MirageModel& model, adapters::Stage stage);

/// Throws ContractError if any parameter outside `trainable` holds a gradient.
void check_gradient_contract(pipeline::MirageModel& model, adapters::Stage stage);

/// Batch indices for a step: seeded per-epoch permutation, deterministic.
std::vector<size_t> batch_indices(size_t dataset_size, int batch_size, int step, uint64_t seed);

}  // namespace mirage::training
