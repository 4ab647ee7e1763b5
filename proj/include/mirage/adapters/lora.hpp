// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <memory>
#include <string>
#include <vector>

#include "mirage/core/rng.hpp"
#include "mirage/vae/causal_conv.hpp"

namespace mirage::adapters {

/// Branch names used inside host modules. Parameter roles are derived from them.
inline constexpr const char* kReconstructionLora = "lora_recon";
inline constexpr const char* kHarmonizationLora = "lora_harmon";
inline constexpr const char* kDenoiserLora = "lora_2d";

class LinearBranch : public torch::nn::Module {
 public:
  virtual torch::Tensor forward(const torch::Tensor& x) = 0;
};

/// Linear layer that can carry additive side branches (LoRA hosts in the denoiser).
class AdaptableLinearImpl : public torch::nn::Module {
 public:
  AdaptableLinearImpl(int64_t in_features, int64_t out_features, bool bias = true);

  torch::Tensor forward(const torch::Tensor& x);
  void add_branch(const std::string& name, std::shared_ptr<LinearBranch> branch);
  bool has_branch(const std::string& name) const;
  std::shared_ptr<LinearBranch> branch(const std::string& name) const;
  void remove_branch(const std::string& name);
  const std::vector<std::pair<std::string, std::shared_ptr<LinearBranch>>>& branches() const { return branches_; }

  int64_t in_features() const { return weight.size(1); }
  int64_t out_features() const { return weight.size(0); }

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  std::vector<std::pair<std::string, std::shared_ptr<LinearBranch>>> branches_;
};
TORCH_MODULE(AdaptableLinear);

/// ΔW·x with ΔW = (α/r)·B·A, B zero-initialized.
class Lora2dBranch : public LinearBranch {
 public:
  Lora2dBranch(int64_t in_features, int64_t out_features, int64_t rank, double alpha, Rng& rng);
  torch::Tensor forward(const torch::Tensor& x) override;
  torch::Tensor delta_weight() const;  // (α/r)·B·A, [out, in]

  torch::Tensor down;  // A [r, in]
  torch::Tensor up;    // B [out, r], zeros at init
  double scale;
};

/// Causal 3D branch: 1×1×1 down-projection to rank r, then a causal
/// kt×kh×kw up-projection back to the host width. Same causal padding and
/// stride as the host, up-projection zero-initialized.
class CausalLora3dBranch : public vae::ConvBranch {
 public:
  CausalLora3dBranch(int64_t in_channels, int64_t out_channels, int64_t rank, double alpha,
                     const vae::Triple& kernel, const vae::Triple& stride, Rng& rng);
  torch::Tensor forward(const torch::Tensor& x) override;

  torch::Tensor down;  // [r, C_in, 1, 1, 1]
  torch::Tensor up;    // [C_out, r, kt, kh, kw], zeros at init
  double scale;
  vae::Triple stride;
};

struct Lora2dSpec {
  int64_t rank = 8;
  double alpha = 8.0;
  std::vector<std::string> targets;  // AdaptableLinear names relative to the root
  std::string name = kDenoiserLora;
};

struct CausalLora3dSpec {
  int64_t rank = 8;
  double alpha = 8.0;
  std::vector<std::string> targets;  // CausalConv3d names relative to the root
  vae::Triple kernel{3, 3, 3};
  std::string name = kReconstructionLora;
};

/// Parameters created by one attach() call, keyed by full name under the root.
struct AdapterGroup {
  std::string name;
  std::vector<std::pair<std::string, torch::Tensor>> parameters;
  int64_t parameter_count() const;
};

/// Attaches branches to every target. Throws ConfigError naming an unknown or
/// wrongly-typed target, ContractError("already adapted") if a target already
/// carries a branch with the spec's name. Nothing is modified on error.
AdapterGroup attach(torch::nn::Module& root, const Lora2dSpec& spec, Rng& rng);
AdapterGroup attach(torch::nn::Module& root, const CausalLora3dSpec& spec, Rng& rng);

/// Folds every branch called `name` into its host weights and removes it.
/// 3D branches with a temporal kernel > 1 cannot be folded: ContractError
/// "runtime-branch only" is raised before anything changes.
void merge(torch::nn::Module& root, const std::string& name);

/// Folds every adapter branch found under `root`.
void merge_all(torch::nn::Module& root);

/// Closed-form trainable parameter count for a spec applied to `root`.
int64_t expected_parameter_count(torch::nn::Module& root, const CausalLora3dSpec& spec);
int64_t expected_parameter_count(torch::nn::Module& root, const Lora2dSpec& spec);

// ---------------------------------------------------------------------------
// Freeze contracts

enum class ParameterRole {
  kVaeBase,
  kReconstructionLora,
  kHarmonizationLora,
  kEncoder2d,
  kFusion,
  kDenoiserBase,
  kDenoiserLora,
};

const char* role_name(ParameterRole role);

/// Role of a full parameter name of the assembled model ("vae.", "encoder2d.",
/// "injection.", "denoiser." prefixes). Throws ContractError for names that
/// belong to no role.
ParameterRole classify_parameter(const std::string& name);

/// Base: pretraining of the backbone. A: VAE adaptation. H: harmonization.
enum class Stage { kBase, kA, kH };

struct Partition {
  std::vector<std::string> frozen;
  std::vector<std::string> trainable;
};

Partition freeze_contract(const torch::nn::Module& model, Stage stage);

/// Applies freeze_contract: sets requires_grad accordingly and returns the
/// trainable tensors in name order.
std::vector<torch::Tensor> apply_freeze(torch::nn::Module& model, Stage stage);

}  // namespace mirage::adapters
