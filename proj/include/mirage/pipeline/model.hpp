// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mirage/core/video.hpp"
#include "mirage/injection/injection.hpp"
#include "mirage/pipeline/denoiser.hpp"
#include "mirage/pipeline/schedule.hpp"
#include "mirage/vae/causal_vae.hpp"

namespace mirage::pipeline {

struct AdapterConfig {
  int64_t rank = 8;
  double alpha = 8.0;
  vae::Triple kernel{3, 3, 3};  // causal 3D up-projection
  /// Decoder conv names (relative to the decoder). Empty = default_decoder_lora_targets().
  std::vector<std::string> decoder_targets;
  /// Denoiser linear names. Empty = every attention projection.
  std::vector<std::string> denoiser_targets;
  bool reconstruction = true;
  bool harmonization = true;
  bool denoiser = true;
};

struct ModelConfig {
  vae::VaeConfig vae;
  injection::InjectionConfig injection;
  DenoiserConfig denoiser;
  AdapterConfig adapters;
  int timestep = 199;
  int schedule_steps = 1000;

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Decoder convolutions that carry the causal 3D LoRA branches by default.
std::vector<std::string> default_decoder_lora_targets();

/// Assembled editing model. Submodules are registered as "vae", "encoder2d",
/// "injection" and "denoiser"; adapter branches live inside their hosts.
class MirageModelImpl : public torch::nn::Module {
 public:
  MirageModelImpl(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  /// Stage A path: decode E3D(x_gt) with taps from x_ni. Network layout in and out.
  torch::Tensor reconstruct(const torch::Tensor& x_gt, const torch::Tensor& x_ni);
  /// Edit path: one denoiser call on E3D(x_ni), decode with taps from x_ni.
  /// `z_dr` receives the denoised latent when non-null.
  torch::Tensor edit_network(const torch::Tensor& x_ni, torch::Tensor* z_dr = nullptr,
                             std::map<std::string, double>* timings_ms = nullptr);

  /// Decoder with injection (and the skip ablation when configured).
  torch::Tensor decode(const torch::Tensor& z, const torch::Tensor& x_side, const vae::EncoderFeatures* features);

  vae::CausalVae vae{nullptr};
  injection::FrameEncoder2d encoder2d{nullptr};
  injection::Injector injection{nullptr};
  PatchDenoiser denoiser{nullptr};

 private:
  ModelConfig cfg_;
  NoiseSchedule schedule_;
};
TORCH_MODULE(MirageModel);

struct EditResult {
  VideoClip x_dr;
  LatentVolume z_dr;
  std::map<std::string, double> timings_ms;  // per phase and "total"
};

/// Inference-mode edit of one clip.
EditResult edit(MirageModel& model, const VideoClip& x_ni);

// ---------------------------------------------------------------------------
// Checkpoints: one TensorContainer per component plus model_config.json.

/// Components stored in a checkpoint directory, in write order.
const std::vector<std::string>& checkpoint_components();

void save_checkpoint(MirageModel& model, const std::filesystem::path& dir);
/// Builds the model from the stored config and loads every component.
/// Throws LoadError naming a missing or inconsistent component.
MirageModel load_checkpoint(const std::filesystem::path& dir);
/// Loads the listed components from `dir` into an existing model.
void load_components(MirageModel& model, const std::filesystem::path& dir, const std::vector<std::string>& components);

/// Name → tensor for one component ("vae", "encoder2d", "injection",
/// "denoiser" hold base weights; "adapters" holds every adapter branch).
std::map<std::string, torch::Tensor> component_tensors(MirageModel& model, const std::string& component);

/// Order-stable FNV-1a hash over the named tensors' bytes.
uint64_t hash_tensors(const std::map<std::string, torch::Tensor>& tensors);

}  // namespace mirage::pipeline
