// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/cli/run_config.hpp"

#include <fstream>
#include <sstream>

#include "mirage/core/error.hpp"

namespace mirage::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Section order for the echo.
const std::vector<std::string> kSections{"data", "vae", "injection", "adapters", "pipeline", "training", "metrics"};

}  // namespace

RunConfig::RunConfig() {
  values_["data"] = {{"scenes", "4"},      {"frames", "9"},        {"height", "64"},    {"width", "96"},
                     {"fps", "10"},        {"asset_gaussians", "160"}, {"mismatch", "1"}, {"floaters", "4"},
                     {"max_pan", "1"},     {"val_fraction", "0.2"}};
  values_["vae"] = {{"encoder_channels", "16,16,32,32"},
                    {"decoder_channels", "32,32,16,16"},
                    {"latent_channels", "4"},
                    {"norm_groups", "4"}};
  values_["injection"] = {{"enabled", "true"},     {"placement", "after_block"}, {"sites", "3,4"},
                          {"full_channels", "16"}, {"half_channels", "16"},      {"norm_groups", "4"},
                          {"skip3d", "false"}};
  values_["adapters"] = {{"rank", "8"},
                         {"alpha", "8"},
                         {"kernel", "3,3,3"},
                         {"decoder_targets", ""},
                         {"denoiser_targets", ""},
                         {"reconstruction", "true"},
                         {"harmonization", "true"},
                         {"denoiser", "true"}};
  values_["pipeline"] = {{"timestep", "199"}, {"schedule_steps", "1000"}, {"patch", "1,2,2"},
                         {"width", "128"},    {"depth", "4"},             {"heads", "4"},
                         {"time_embed_dim", "64"}};
  values_["training"] = {{"steps", "1000"},
                         {"pretrain_steps", "500"},
                         {"lr", "1e-3"},
                         {"pretrain_lr", "2e-3"},
                         {"lambda1", "0.1"},
                         {"lambda2", "0.1"},
                         {"gram_activation_step", "2000"},
                         {"warmup_steps", "500"},
                         {"warmup_factor", "0.1"},
                         {"warmup_target", "lr"},
                         {"batch_size", "2"}};
  values_["metrics"] = {{"mode", "full_resolution"}, {"warp_mean_abs", "false"}};
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  auto s = values_.find(section);
  if (s == values_.end()) throw ConfigError("unknown config section [" + section + "]");
  auto k = s->second.find(key);
  if (k == s->second.end()) throw ConfigError("unknown config key '" + key + "' in [" + section + "]");
  k->second = value;
}

const std::string& RunConfig::get(const std::string& section, const std::string& key) const {
  auto s = values_.find(section);
  if (s == values_.end()) throw ConfigError("unknown config section [" + section + "]");
  auto k = s->second.find(key);
  if (k == s->second.end()) throw ConfigError("unknown config key '" + key + "' in [" + section + "]");
  return k->second;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    line = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!cfg.values_.count(section)) throw ConfigError(where + "unknown config section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside any section");
    try {
      cfg.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path.string());
  return parse(std::string(std::istreambuf_iterator<char>(f), {}), path.string());
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  for (const auto& s : kSections) {
    os << "[" << s << "]\n";
    for (const auto& [k, v] : values_.at(s)) os << k << " = " << v << "\n";
    os << "\n";
  }
  return os.str();
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << serialize();
}

int64_t RunConfig::get_int(const std::string& s, const std::string& k) const {
  const auto& v = get(s, k);
  try {
    size_t pos = 0;
    const int64_t x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("[" + s + "] " + k + ": expected an integer, got '" + v + "'");
  }
}

double RunConfig::get_double(const std::string& s, const std::string& k) const {
  const auto& v = get(s, k);
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("[" + s + "] " + k + ": expected a number, got '" + v + "'");
  }
}

bool RunConfig::get_bool(const std::string& s, const std::string& k) const {
  const auto& v = get(s, k);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("[" + s + "] " + k + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& s, const std::string& k) const {
  std::vector<std::string> out;
  std::istringstream in(get(s, k));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int64_t> RunConfig::get_ints(const std::string& s, const std::string& k) const {
  std::vector<int64_t> out;
  for (const auto& item : get_list(s, k)) {
    try {
      out.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw ConfigError("[" + s + "] " + k + ": expected integers, got '" + item + "'");
    }
  }
  return out;
}

namespace {

template <size_t N>
std::array<int64_t, N> fixed(const std::vector<int64_t>& v, const std::string& name) {
  if (v.size() != N) throw ConfigError(name + ": expected " + std::to_string(N) + " values");
  std::array<int64_t, N> a{};
  std::copy(v.begin(), v.end(), a.begin());
  return a;
}

}  // namespace

pipeline::ModelConfig RunConfig::model_config() const {
  pipeline::ModelConfig c;
  c.vae.encoder_channels = fixed<4>(get_ints("vae", "encoder_channels"), "[vae] encoder_channels");
  c.vae.decoder_channels = fixed<4>(get_ints("vae", "decoder_channels"), "[vae] decoder_channels");
  c.vae.latent_channels = get_int("vae", "latent_channels");
  c.vae.norm_groups = get_int("vae", "norm_groups");

  c.injection.enabled = get_bool("injection", "enabled");
  const auto& placement = get("injection", "placement");
  if (placement == "after_block") c.injection.placement = injection::Placement::kAfterBlock;
  else if (placement == "before_block") c.injection.placement = injection::Placement::kBeforeBlock;
  else throw ConfigError("[injection] placement: expected after_block or before_block");
  c.injection.sites.clear();
  for (auto s : get_ints("injection", "sites")) c.injection.sites.push_back(static_cast<int>(s));
  c.injection.full_channels = get_int("injection", "full_channels");
  c.injection.half_channels = get_int("injection", "half_channels");
  c.injection.norm_groups = get_int("injection", "norm_groups");
  c.injection.skip3d = get_bool("injection", "skip3d");

  c.adapters.rank = get_int("adapters", "rank");
  c.adapters.alpha = get_double("adapters", "alpha");
  c.adapters.kernel = fixed<3>(get_ints("adapters", "kernel"), "[adapters] kernel");
  c.adapters.decoder_targets = get_list("adapters", "decoder_targets");
  c.adapters.denoiser_targets = get_list("adapters", "denoiser_targets");
  c.adapters.reconstruction = get_bool("adapters", "reconstruction");
  c.adapters.harmonization = get_bool("adapters", "harmonization");
  c.adapters.denoiser = get_bool("adapters", "denoiser");

  c.timestep = static_cast<int>(get_int("pipeline", "timestep"));
  c.schedule_steps = static_cast<int>(get_int("pipeline", "schedule_steps"));
  c.denoiser.patch = fixed<3>(get_ints("pipeline", "patch"), "[pipeline] patch");
  c.denoiser.width = get_int("pipeline", "width");
  c.denoiser.depth = get_int("pipeline", "depth");
  c.denoiser.heads = get_int("pipeline", "heads");
  c.denoiser.time_embed_dim = get_int("pipeline", "time_embed_dim");
  c.denoiser.latent_channels = c.vae.latent_channels;
  c.validate();
  return c;
}

training::StageConfig RunConfig::stage_config(adapters::Stage stage) const {
  training::StageConfig c;
  c.stage = stage;
  const bool base = stage == adapters::Stage::kBase;
  c.steps = static_cast<int>(get_int("training", base ? "pretrain_steps" : "steps"));
  c.lr = get_double("training", base ? "pretrain_lr" : "lr");
  c.lambda1 = get_double("training", "lambda1");
  c.lambda2 = get_double("training", "lambda2");
  c.gram_activation_step = static_cast<int>(get_int("training", "gram_activation_step"));
  c.warmup_steps = static_cast<int>(get_int("training", "warmup_steps"));
  c.warmup_factor = get_double("training", "warmup_factor");
  const auto& target = get("training", "warmup_target");
  if (target == "lr") c.warmup_target = training::WarmupTarget::kLearningRate;
  else if (target == "gram") c.warmup_target = training::WarmupTarget::kGramWeight;
  else throw ConfigError("[training] warmup_target: expected lr or gram");
  c.batch_size = static_cast<int>(get_int("training", "batch_size"));
  c.frames = static_cast<int>(get_int("data", "frames"));
  c.height = static_cast<int>(get_int("data", "height"));
  c.width = static_cast<int>(get_int("data", "width"));
  c.validate();
  return c;
}

alignment::SceneSpec RunConfig::scene_spec() const {
  alignment::SceneSpec s;
  s.frames = static_cast<int>(get_int("data", "frames"));
  s.height = static_cast<int>(get_int("data", "height"));
  s.width = static_cast<int>(get_int("data", "width"));
  s.fps = get_double("data", "fps");
  s.asset_gaussians = static_cast<int>(get_int("data", "asset_gaussians"));
  s.mismatch = get_double("data", "mismatch");
  s.floaters = static_cast<int>(get_int("data", "floaters"));
  s.max_pan = static_cast<int>(get_int("data", "max_pan"));
  s.validate();
  return s;
}

metrics::EvalMode RunConfig::eval_mode() const { return metrics::parse_mode(get("metrics", "mode")); }

}  // namespace mirage::cli
