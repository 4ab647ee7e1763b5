// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/adapters/lora.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mirage/core/error.hpp"

namespace mirage::adapters {

namespace {

torch::Tensor kaiming_uniform(at::IntArrayRef shape, int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return rng.uniform(shape, -bound, bound);
}

std::map<std::string, std::shared_ptr<torch::nn::Module>> module_index(torch::nn::Module& root) {
  std::map<std::string, std::shared_ptr<torch::nn::Module>> out;
  for (const auto& item : root.named_modules("", /*include_self=*/false)) out.emplace(item.key(), item.value());
  return out;
}

template <typename Host>
std::vector<std::pair<std::string, Host*>> resolve_targets(torch::nn::Module& root,
                                                           const std::vector<std::string>& targets,
                                                           const std::string& branch_name, const char* kind) {
  if (targets.empty()) throw ConfigError("adapter '" + branch_name + "' has an empty target list");
  auto index = module_index(root);
  std::vector<std::pair<std::string, Host*>> hosts;
  for (const auto& t : targets) {
    auto it = index.find(t);
    if (it == index.end()) throw ConfigError("unknown adapter target '" + t + "'");
    auto* host = dynamic_cast<Host*>(it->second.get());
    if (!host) throw ConfigError("adapter target '" + t + "' is not a " + kind);
    if (host->has_branch(branch_name)) {
      throw ContractError("already adapted: '" + t + "' carries '" + branch_name + "'");
    }
    hosts.emplace_back(t, host);
  }
  return hosts;
}

void collect(AdapterGroup& group, const std::string& host_name, const std::string& branch_name,
             torch::nn::Module& branch) {
  for (const auto& p : branch.named_parameters(true)) {
    group.parameters.emplace_back(host_name + "." + branch_name + "." + p.key(), p.value());
  }
}

}  // namespace

// ---------------------------------------------------------------------------

AdaptableLinearImpl::AdaptableLinearImpl(int64_t in_features, int64_t out_features, bool with_bias) {
  torch::nn::Linear proto(torch::nn::LinearOptions(in_features, out_features).bias(with_bias));
  weight = register_parameter("weight", proto->weight.detach().clone());
  if (with_bias) bias = register_parameter("bias", proto->bias.detach().clone());
}

torch::Tensor AdaptableLinearImpl::forward(const torch::Tensor& x) {
  auto y = torch::linear(x, weight, bias);
  for (auto& [name, b] : branches_) y = y + b->forward(x);
  return y;
}

void AdaptableLinearImpl::add_branch(const std::string& name, std::shared_ptr<LinearBranch> branch) {
  if (has_branch(name)) throw ContractError("already adapted: branch '" + name + "' exists");
  register_module(name, branch);
  branches_.emplace_back(name, std::move(branch));
}

bool AdaptableLinearImpl::has_branch(const std::string& name) const {
  return std::any_of(branches_.begin(), branches_.end(), [&](const auto& b) { return b.first == name; });
}

std::shared_ptr<LinearBranch> AdaptableLinearImpl::branch(const std::string& name) const {
  for (const auto& [n, b] : branches_)
    if (n == name) return b;
  return nullptr;
}

void AdaptableLinearImpl::remove_branch(const std::string& name) {
  auto it = std::find_if(branches_.begin(), branches_.end(), [&](const auto& b) { return b.first == name; });
  if (it == branches_.end()) return;
  branches_.erase(it);
  unregister_module(name);
}

Lora2dBranch::Lora2dBranch(int64_t in_features, int64_t out_features, int64_t rank, double alpha, Rng& rng)
    : scale(alpha / static_cast<double>(rank)) {
  down = register_parameter("down", kaiming_uniform({rank, in_features}, in_features, rng));
  up = register_parameter("up", torch::zeros({out_features, rank}));
}

torch::Tensor Lora2dBranch::forward(const torch::Tensor& x) {
  return torch::linear(torch::linear(x, down), up) * scale;
}

torch::Tensor Lora2dBranch::delta_weight() const { return torch::matmul(up, down) * scale; }

CausalLora3dBranch::CausalLora3dBranch(int64_t in_channels, int64_t out_channels, int64_t rank, double alpha,
                                       const vae::Triple& kernel, const vae::Triple& host_stride, Rng& rng)
    : scale(alpha / static_cast<double>(rank)), stride(host_stride) {
  down = register_parameter("down", kaiming_uniform({rank, in_channels, 1, 1, 1}, in_channels, rng));
  up = register_parameter("up", torch::zeros({out_channels, rank, kernel[0], kernel[1], kernel[2]}));
}

torch::Tensor CausalLora3dBranch::forward(const torch::Tensor& x) {
  auto h = torch::conv3d(x, down);
  return vae::causal_conv3d(h, up, {}, stride) * scale;
}

int64_t AdapterGroup::parameter_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : parameters) n += t.numel();
  return n;
}

AdapterGroup attach(torch::nn::Module& root, const Lora2dSpec& spec, Rng& rng) {
  if (spec.rank < 1) throw ConfigError("LoRA rank must be ≥ 1");
  auto hosts = resolve_targets<AdaptableLinearImpl>(root, spec.targets, spec.name, "linear host");
  AdapterGroup group{spec.name, {}};
  for (auto& [name, host] : hosts) {
    const auto dtype = host->weight.scalar_type();
    auto branch = std::make_shared<Lora2dBranch>(host->in_features(), host->out_features(), spec.rank, spec.alpha, rng);
    branch->to(dtype);
    host->add_branch(spec.name, branch);
    collect(group, name, spec.name, *branch);
  }
  return group;
}

AdapterGroup attach(torch::nn::Module& root, const CausalLora3dSpec& spec, Rng& rng) {
  if (spec.rank < 1) throw ConfigError("LoRA rank must be ≥ 1");
  auto hosts = resolve_targets<vae::CausalConv3dImpl>(root, spec.targets, spec.name, "causal conv host");
  for (auto& [name, host] : hosts) {
    const auto& k = host->options().kernel;
    for (int i = 0; i < 3; ++i) {
      if (spec.kernel[i] > k[i] || spec.kernel[i] % 2 == 0) {
        throw ConfigError("adapter kernel must be odd and no larger than the host kernel at '" + name + "'");
      }
    }
  }
  AdapterGroup group{spec.name, {}};
  for (auto& [name, host] : hosts) {
    const auto& o = host->options();
    auto branch = std::make_shared<CausalLora3dBranch>(o.in_channels, o.out_channels, spec.rank, spec.alpha,
                                                       spec.kernel, o.stride, rng);
    branch->to(host->weight.scalar_type());
    host->add_branch(spec.name, branch);
    collect(group, name, spec.name, *branch);
  }
  return group;
}

void merge(torch::nn::Module& root, const std::string& name) {
  auto index = module_index(root);
  // Validate everything first so a refusal leaves the model untouched.
  for (auto& [path, m] : index) {
    if (auto* conv = dynamic_cast<vae::CausalConv3dImpl*>(m.get())) {
      auto b = std::dynamic_pointer_cast<CausalLora3dBranch>(conv->branch(name));
      if (conv->has_branch(name) && !b) throw ContractError("branch '" + name + "' at '" + path + "' is not a LoRA branch");
      if (b && b->up.size(2) > 1) {
        throw ContractError("runtime-branch only: '" + path + "." + name + "' has temporal kernel " +
                            std::to_string(b->up.size(2)) + " > 1 and cannot be folded");
      }
    }
  }
  torch::NoGradGuard guard;
  for (auto& [path, m] : index) {
    if (auto* lin = dynamic_cast<AdaptableLinearImpl*>(m.get())) {
      if (auto b = std::dynamic_pointer_cast<Lora2dBranch>(lin->branch(name))) {
        lin->weight.add_(b->delta_weight());
        lin->remove_branch(name);
      }
    } else if (auto* conv = dynamic_cast<vae::CausalConv3dImpl*>(m.get())) {
      if (auto b = std::dynamic_pointer_cast<CausalLora3dBranch>(conv->branch(name))) {
        // up ∘ down collapses to one kernel applied at the current frame (the
        // last temporal tap of the causal host), centered spatially.
        auto down2 = b->down.flatten(1);                                   // [r, C_in]
        auto fused = torch::einsum("orhw,ri->oihw", {b->up.select(2, 0), down2}) * b->scale;
        const auto kh = fused.size(2), kw = fused.size(3);
        const auto& hk = conv->options().kernel;
        conv->weight.select(2, hk[0] - 1)
            .narrow(2, (hk[1] - kh) / 2, kh)
            .narrow(3, (hk[2] - kw) / 2, kw)
            .add_(fused);
        conv->remove_branch(name);
      }
    }
  }
}

void merge_all(torch::nn::Module& root) {
  std::set<std::string> names;
  for (const auto& item : root.named_modules("", false)) {
    if (auto* conv = dynamic_cast<vae::CausalConv3dImpl*>(item.value().get()))
      for (const auto& [n, b] : conv->branches()) names.insert(n);
    if (auto* lin = dynamic_cast<AdaptableLinearImpl*>(item.value().get()))
      for (const auto& [n, b] : lin->branches()) names.insert(n);
  }
  for (const auto& n : names) merge(root, n);
}

int64_t expected_parameter_count(torch::nn::Module& root, const CausalLora3dSpec& spec) {
  auto index = module_index(root);
  const int64_t volume = spec.kernel[0] * spec.kernel[1] * spec.kernel[2];
  int64_t n = 0;
  for (const auto& t : spec.targets) {
    auto* host = dynamic_cast<vae::CausalConv3dImpl*>(index.at(t).get());
    n += spec.rank * (host->options().in_channels + host->options().out_channels * volume);
  }
  return n;
}

int64_t expected_parameter_count(torch::nn::Module& root, const Lora2dSpec& spec) {
  auto index = module_index(root);
  int64_t n = 0;
  for (const auto& t : spec.targets) {
    auto* host = dynamic_cast<AdaptableLinearImpl*>(index.at(t).get());
    n += spec.rank * (host->in_features() + host->out_features());
  }
  return n;
}

// ---------------------------------------------------------------------------

const char* role_name(ParameterRole role) {
  switch (role) {
    case ParameterRole::kVaeBase: return "vae_base";
    case ParameterRole::kReconstructionLora: return "reconstruction_lora";
    case ParameterRole::kHarmonizationLora: return "harmonization_lora";
    case ParameterRole::kEncoder2d: return "encoder2d";
    case ParameterRole::kFusion: return "fusion";
    case ParameterRole::kDenoiserBase: return "denoiser_base";
    case ParameterRole::kDenoiserLora: return "denoiser_lora";
  }
  return "?";
}

ParameterRole classify_parameter(const std::string& name) {
  auto starts = [&](const char* p) { return name.rfind(p, 0) == 0; };
  auto has = [&](const char* branch) { return name.find(std::string(".") + branch + ".") != std::string::npos; };
  if (starts("vae.")) {
    if (has(kReconstructionLora)) return ParameterRole::kReconstructionLora;
    if (has(kHarmonizationLora)) return ParameterRole::kHarmonizationLora;
    if (has("lora_")) throw ContractError("unclassified adapter parameter '" + name + "'");
    return ParameterRole::kVaeBase;
  }
  if (starts("encoder2d.")) return ParameterRole::kEncoder2d;
  if (starts("injection.")) return ParameterRole::kFusion;
  if (starts("denoiser.")) {
    if (has(kDenoiserLora)) return ParameterRole::kDenoiserLora;
    if (has("lora_")) throw ContractError("unclassified adapter parameter '" + name + "'");
    return ParameterRole::kDenoiserBase;
  }
  throw ContractError("parameter '" + name + "' belongs to no training group");
}

namespace {

bool trainable_in(ParameterRole role, Stage stage) {
  switch (stage) {
    case Stage::kBase:
      return role == ParameterRole::kVaeBase || role == ParameterRole::kDenoiserBase;
    case Stage::kA:
      return role == ParameterRole::kEncoder2d || role == ParameterRole::kFusion ||
             role == ParameterRole::kReconstructionLora;
    case Stage::kH:
      return role == ParameterRole::kDenoiserLora || role == ParameterRole::kHarmonizationLora;
  }
  return false;
}

}  // namespace

Partition freeze_contract(const torch::nn::Module& model, Stage stage) {
  Partition p;
  for (const auto& item : model.named_parameters(true)) {
    (trainable_in(classify_parameter(item.key()), stage) ? p.trainable : p.frozen).push_back(item.key());
  }
  return p;
}

std::vector<torch::Tensor> apply_freeze(torch::nn::Module& model, Stage stage) {
  const auto partition = freeze_contract(model, stage);
  std::set<std::string> trainable(partition.trainable.begin(), partition.trainable.end());
  std::vector<torch::Tensor> out;
  for (auto& item : model.named_parameters(true)) {
    const bool on = trainable.count(item.key()) > 0;
    item.value().set_requires_grad(on);
    if (on) out.push_back(item.value());
  }
  return out;
}

}  // namespace mirage::adapters
