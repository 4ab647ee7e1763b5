// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/pipeline/model.hpp"

#include <chrono>
#include <fstream>

#include "mirage/adapters/lora.hpp"
#include "mirage/core/error.hpp"
#include "mirage/core/rng.hpp"
#include "mirage/core/tensor_container.hpp"

namespace mirage::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

void ModelConfig::validate() const {
  vae.validate();
  denoiser.validate();
  if (denoiser.latent_channels != vae.latent_channels) throw ConfigError("denoiser latent channels differ from the VAE's");
  if (adapters.rank < 1) throw ConfigError("adapter rank must be ≥ 1");
  if (!(adapters.alpha > 0)) throw ConfigError("adapter alpha must be positive");
  if (timestep < 0 || timestep >= schedule_steps) throw ConfigError("timestep outside schedule range");
}

std::vector<std::string> default_decoder_lora_targets() {
  std::vector<std::string> t;
  for (int k = 1; k <= 4; ++k) {
    t.push_back("block" + std::to_string(k) + ".conv1");
    t.push_back("block" + std::to_string(k) + ".conv2");
  }
  for (int k = 2; k <= 4; ++k) t.push_back("up" + std::to_string(k) + ".conv");
  t.push_back("conv_out");
  return t;
}

json to_json(const ModelConfig& c) {
  json j;
  j["vae"] = {{"encoder_channels", c.vae.encoder_channels},
              {"decoder_channels", c.vae.decoder_channels},
              {"latent_channels", c.vae.latent_channels},
              {"norm_groups", c.vae.norm_groups},
              {"temporal_downsample", c.vae.temporal_downsample}};
  j["injection"] = {{"enabled", c.injection.enabled},
                    {"placement", c.injection.placement == injection::Placement::kAfterBlock ? "after_block"
                                                                                             : "before_block"},
                    {"sites", c.injection.sites},
                    {"full_channels", c.injection.full_channels},
                    {"half_channels", c.injection.half_channels},
                    {"norm_groups", c.injection.norm_groups},
                    {"skip3d", c.injection.skip3d}};
  j["denoiser"] = {{"patch", c.denoiser.patch},
                   {"latent_channels", c.denoiser.latent_channels},
                   {"width", c.denoiser.width},
                   {"depth", c.denoiser.depth},
                   {"heads", c.denoiser.heads},
                   {"time_embed_dim", c.denoiser.time_embed_dim},
                   {"mlp_ratio", c.denoiser.mlp_ratio}};
  j["adapters"] = {{"rank", c.adapters.rank},
                   {"alpha", c.adapters.alpha},
                   {"kernel", c.adapters.kernel},
                   {"decoder_targets", c.adapters.decoder_targets},
                   {"denoiser_targets", c.adapters.denoiser_targets},
                   {"reconstruction", c.adapters.reconstruction},
                   {"harmonization", c.adapters.harmonization},
                   {"denoiser", c.adapters.denoiser}};
  j["timestep"] = c.timestep;
  j["schedule_steps"] = c.schedule_steps;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  try {
    ModelConfig c;
    const auto& v = j.at("vae");
    c.vae.encoder_channels = v.at("encoder_channels").get<std::array<int64_t, 4>>();
    c.vae.decoder_channels = v.at("decoder_channels").get<std::array<int64_t, 4>>();
    c.vae.latent_channels = v.at("latent_channels");
    c.vae.norm_groups = v.at("norm_groups");
    c.vae.temporal_downsample = v.at("temporal_downsample").get<std::array<bool, 3>>();
    const auto& in = j.at("injection");
    c.injection.enabled = in.at("enabled");
    c.injection.placement = in.at("placement") == "before_block" ? injection::Placement::kBeforeBlock
                                                                 : injection::Placement::kAfterBlock;
    c.injection.sites = in.at("sites").get<std::vector<int>>();
    c.injection.full_channels = in.at("full_channels");
    c.injection.half_channels = in.at("half_channels");
    c.injection.norm_groups = in.at("norm_groups");
    c.injection.skip3d = in.at("skip3d");
    const auto& d = j.at("denoiser");
    c.denoiser.patch = d.at("patch").get<std::array<int64_t, 3>>();
    c.denoiser.latent_channels = d.at("latent_channels");
    c.denoiser.width = d.at("width");
    c.denoiser.depth = d.at("depth");
    c.denoiser.heads = d.at("heads");
    c.denoiser.time_embed_dim = d.at("time_embed_dim");
    c.denoiser.mlp_ratio = d.at("mlp_ratio");
    const auto& a = j.at("adapters");
    c.adapters.rank = a.at("rank");
    c.adapters.alpha = a.at("alpha");
    c.adapters.kernel = a.at("kernel").get<vae::Triple>();
    c.adapters.decoder_targets = a.at("decoder_targets").get<std::vector<std::string>>();
    c.adapters.denoiser_targets = a.at("denoiser_targets").get<std::vector<std::string>>();
    c.adapters.reconstruction = a.at("reconstruction");
    c.adapters.harmonization = a.at("harmonization");
    c.adapters.denoiser = a.at("denoiser");
    c.timestep = j.at("timestep");
    c.schedule_steps = j.at("schedule_steps");
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

namespace {

bool any_requires_grad(const torch::nn::Module& m) {
  for (const auto& p : m.parameters(true))
    if (p.requires_grad()) return true;
  return false;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

MirageModelImpl::MirageModelImpl(const ModelConfig& cfg, uint64_t seed)
    : cfg_(cfg), schedule_(NoiseSchedule::cosine(cfg.schedule_steps)) {
  cfg_.validate();
  seed_default_generator(seed);
  vae = register_module("vae", vae::CausalVae(cfg_.vae));
  encoder2d = register_module("encoder2d", injection::FrameEncoder2d(cfg_.injection));
  injection = register_module("injection", injection::Injector(cfg_.injection, cfg_.vae));
  denoiser = register_module("denoiser", PatchDenoiser(cfg_.denoiser));

  Rng rng = Rng(seed).fork("adapters");
  const auto& ac = cfg_.adapters;
  const auto targets = ac.decoder_targets.empty() ? default_decoder_lora_targets() : ac.decoder_targets;
  if (ac.reconstruction) {
    adapters::CausalLora3dSpec spec{ac.rank, ac.alpha, targets, ac.kernel, adapters::kReconstructionLora};
    adapters::attach(*vae->decoder, spec, rng);
  }
  if (ac.harmonization) {
    adapters::CausalLora3dSpec spec{ac.rank, ac.alpha, targets, ac.kernel, adapters::kHarmonizationLora};
    adapters::attach(*vae->decoder, spec, rng);
  }
  if (ac.denoiser) {
    adapters::Lora2dSpec spec{ac.rank, ac.alpha,
                              ac.denoiser_targets.empty() ? cfg_.denoiser.attention_projections() : ac.denoiser_targets,
                              adapters::kDenoiserLora};
    adapters::attach(*denoiser, spec, rng);
  }
}

torch::Tensor MirageModelImpl::decode(const torch::Tensor& z, const torch::Tensor& x_side,
                                      const vae::EncoderFeatures* features) {
  vae::DecoderHook inject, skip;
  if (cfg_.injection.enabled && x_side.defined()) {
    injection::TapSet taps;
    if (any_requires_grad(*encoder2d)) {
      taps = encoder2d(x_side);
    } else {
      torch::NoGradGuard no_grad;
      taps = encoder2d(x_side);
    }
    const int64_t frames = vae::causal_upsample_frames(vae::causal_upsample_frames(z.size(2)));
    if (taps.full.size(2) != frames) {
      throw ShapeError("tap/latent frame-count mismatch: " + std::to_string(taps.full.size(2)) + " vs " +
                       std::to_string(frames));
    }
    inject = injection->hook(taps);
  }
  if (features) skip = injection->skip_hook(*features);
  if (!inject && !skip) return vae->decoder(z);
  return vae->decoder(z, [inject, skip](int stage, vae::HookPoint p, const torch::Tensor& h) {
    torch::Tensor out = inject ? inject(stage, p, h) : h;
    return skip ? skip(stage, p, out) : out;
  });
}

torch::Tensor MirageModelImpl::reconstruct(const torch::Tensor& x_gt, const torch::Tensor& x_ni) {
  vae::EncoderFeatures f;
  if (any_requires_grad(*vae->encoder)) {
    f = vae->encoder->forward_features(x_gt);
  } else {
    torch::NoGradGuard no_grad;
    f = vae->encoder->forward_features(x_gt);
  }
  return decode(f.latent, x_ni, cfg_.injection.skip3d ? &f : nullptr);
}

torch::Tensor MirageModelImpl::edit_network(const torch::Tensor& x_ni, torch::Tensor* z_dr,
                                            std::map<std::string, double>* timings_ms) {
  auto t0 = std::chrono::steady_clock::now();
  vae::EncoderFeatures f;
  {
    torch::NoGradGuard no_grad;  // the 3D encoder is never trained through the edit path
    f = vae->encoder->forward_features(x_ni);
  }
  if (timings_ms) (*timings_ms)["encode3d"] = ms_since(t0);

  auto t1 = std::chrono::steady_clock::now();
  auto z = one_step_denoise(denoiser, f.latent, cfg_.timestep, schedule_);
  if (timings_ms) (*timings_ms)["denoise"] = ms_since(t1);
  if (z_dr) *z_dr = z;

  auto t2 = std::chrono::steady_clock::now();
  auto out = decode(z, x_ni, cfg_.injection.skip3d ? &f : nullptr);
  if (timings_ms) (*timings_ms)["decode"] = ms_since(t2);
  return out;
}

EditResult edit(MirageModel& model, const VideoClip& x_ni) {
  torch::NoGradGuard no_grad;
  auto t0 = std::chrono::steady_clock::now();
  const auto dtype = model->denoiser->conditioning.scalar_type();
  auto x = x_ni.to_network().to(dtype);
  vae::check_video_batch(x);
  torch::Tensor z;
  std::map<std::string, double> timings;
  auto y = model->edit_network(x, &z, &timings);
  timings["total"] = ms_since(t0);
  return EditResult{VideoClip::from_network(y, x_ni.fps()), LatentVolume(z.squeeze(0)), timings};
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& checkpoint_components() {
  static const std::vector<std::string> names{"vae", "encoder2d", "injection", "denoiser", "adapters"};
  return names;
}

std::map<std::string, torch::Tensor> component_tensors(MirageModel& model, const std::string& component) {
  const auto& names = checkpoint_components();
  if (std::find(names.begin(), names.end(), component) == names.end()) {
    throw ConfigError("unknown checkpoint component '" + component + "'");
  }
  std::map<std::string, torch::Tensor> out;
  auto take = [&](const std::string& name, const torch::Tensor& t) {
    const bool adapter = name.find(".lora_") != std::string::npos;
    if (component == "adapters") {
      if (adapter) out.emplace(name, t);
    } else if (!adapter && name.rfind(component + ".", 0) == 0) {
      out.emplace(name.substr(component.size() + 1), t);
    }
  };
  for (const auto& p : model->named_parameters(true)) take(p.key(), p.value());
  for (const auto& b : model->named_buffers(true)) take(b.key(), b.value());
  return out;
}

uint64_t hash_tensors(const std::map<std::string, torch::Tensor>& tensors) {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 1099511628211ULL;
  };
  for (const auto& [name, t] : tensors) {
    mix(name.data(), name.size());
    auto c = t.detach().cpu().contiguous();
    mix(c.data_ptr(), c.nbytes());
  }
  return h;
}

void save_checkpoint(MirageModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "model_config.json");
    if (!f) throw IoError("cannot write " + (dir / "model_config.json").string());
    f << to_json(model->config()).dump(2) << "\n";
  }
  for (const auto& comp : checkpoint_components()) {
    core::TensorContainer c;
    for (auto& [name, t] : component_tensors(model, comp)) c.tensors.emplace(name, t.detach().clone());
    c.metadata["component"] = comp;
    core::save_container(c, dir / (comp + ".tc"));
  }
}

void load_components(MirageModel& model, const fs::path& dir, const std::vector<std::string>& components) {
  torch::NoGradGuard no_grad;
  for (const auto& comp : components) {
    const auto path = dir / (comp + ".tc");
    if (!fs::exists(path)) throw LoadError("checkpoint component '" + comp + "' missing (" + path.string() + ")");
    const auto stored = core::load_container(path);
    auto expected = component_tensors(model, comp);
    for (auto& [name, t] : expected) {
      auto it = stored.tensors.find(name);
      if (it == stored.tensors.end()) {
        throw LoadError("checkpoint component '" + comp + "' lacks tensor '" + name + "'");
      }
      if (!it->second.sizes().equals(t.sizes())) {
        throw LoadError("checkpoint component '" + comp + "' tensor '" + name + "' has the wrong shape");
      }
      t.copy_(it->second);
    }
    for (const auto& [name, _] : stored.tensors) {
      if (!expected.count(name)) {
        throw LoadError("checkpoint component '" + comp + "' has unexpected tensor '" + name + "'");
      }
    }
  }
}

MirageModel load_checkpoint(const fs::path& dir) {
  const auto cfg_path = dir / "model_config.json";
  if (!fs::exists(cfg_path)) throw LoadError("checkpoint component 'model_config' missing (" + cfg_path.string() + ")");
  std::ifstream f(cfg_path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw LoadError("checkpoint component 'model_config' unreadable: " + std::string(e.what()));
  }
  MirageModel model(model_config_from_json(j), 0);
  load_components(model, dir, checkpoint_components());
  model->eval();
  return model;
}

}  // namespace mirage::pipeline
