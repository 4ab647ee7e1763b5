// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/cli/commands.hpp"

#include <torch/torch.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <random>
#include <set>

#include "mirage/alignment/curate.hpp"
#include "mirage/alignment/synth.hpp"
#include "mirage/core/clip_io.hpp"
#include "mirage/core/error.hpp"
#include "mirage/core/rng.hpp"
#include "mirage/core/tensor_container.hpp"
#include "mirage/metrics/report.hpp"
#include "mirage/pipeline/model.hpp"
#include "mirage/training/trainer.hpp"

namespace mirage::cli {

using nlohmann::json;

namespace {

void log(const std::string& msg) { std::cerr << "mirage: " << msg << "\n"; }

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot read " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw LoadError("bad JSON in " + path.string() + ": " + e.what());
  }
}

// Outputs are never overwritten; a rerun into the same place is refused.
void make_fresh_dir(const fs::path& out) {
  if (out.empty()) throw InputError("--out is required");
  if (fs::exists(out)) throw IoError("output directory exists: " + out.string());
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
}

void require_dir(const fs::path& dir, const std::string& what) {
  if (!fs::is_directory(dir)) throw InputError(what + " not found: " + dir.string());
}

std::string scene_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d", i);
  return buf;
}

// Bundle directories are recognised by their scene.json.
std::vector<fs::path> list_bundles(const fs::path& root) {
  require_dir(root, "bundle directory");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "scene.json")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::vector<training::ClipPair> load_pairs(const fs::path& data, const std::string& which) {
  const json split = read_json(data / "split.json");
  if (!split.contains(which)) throw LoadError("split.json has no '" + which + "' list");
  std::vector<training::ClipPair> pairs;
  for (const auto& id : split.at(which)) {
    const fs::path dir = data / "pairs" / id.get<std::string>();
    pairs.push_back({id.get<std::string>(), core::load_clip(dir / "ni"), core::load_clip(dir / "gt")});
  }
  return pairs;
}

json stage_summary(const training::StageResult& r) {
  json j;
  j["steps"] = r.log.size();
  if (!r.log.empty()) {
    j["first_loss"] = r.log.front().loss;
    j["final_loss"] = r.log.back().loss;
  }
  j["frozen_hash_before"] = r.frozen_hash_before;
  j["frozen_hash_after"] = r.frozen_hash_after;
  j["trainable_parameters"] = r.trainable.size();
  return j;
}

const char* kStageMarker = "train_stage.json";

}  // namespace

void cmd_synth(const RunConfig& cfg, uint64_t seed, const fs::path& out) {
  const auto spec = cfg.scene_spec();
  const int64_t n = cfg.get_int("data", "scenes");
  if (n < 0) throw ConfigError("[data] scenes must be >= 0");
  make_fresh_dir(out);
  cfg.save(out / "config.ini");
  const Rng root(seed);
  json scenes = json::array();
  for (int i = 0; i < n; ++i) {
    const uint64_t scene_seed = root.fork(scene_id(i)).seed();
    alignment::save_bundle(alignment::synth_scene(scene_seed, spec), out / scene_id(i));
    scenes.push_back({{"id", scene_id(i)}, {"seed", scene_seed}});
    log("wrote " + scene_id(i));
  }
  write_json(out / "manifest.json", {{"seed", seed}, {"spec", alignment::to_json(spec)}, {"scenes", scenes}});
}

void cmd_align(const RunConfig& cfg, const fs::path& bundles, const fs::path& out) {
  const auto dirs = list_bundles(bundles);
  make_fresh_dir(out);
  cfg.save(out / "config.ini");
  json skipped = json::array();
  for (const auto& dir : dirs) {
    const std::string id = dir.filename().string();
    try {
      const auto report = alignment::align(alignment::load_bundle(dir));
      fs::create_directories(out / id);
      write_json(out / id / "alignment.json", report.to_json());
    } catch (const Error& e) {
      log("skipping " + id + ": " + e.what());
      skipped.push_back({{"id", id}, {"reason", e.what()}});
    }
  }
  write_json(out / "skipped.json", skipped);
}

void cmd_curate(const RunConfig& cfg, uint64_t seed, const fs::path& bundles, const fs::path& out) {
  const auto dirs = list_bundles(bundles);
  const double val_fraction = cfg.get_double("data", "val_fraction");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("[data] val_fraction must be in [0,1)");
  make_fresh_dir(out);
  cfg.save(out / "config.ini");

  std::vector<std::string> ids;
  json skipped = json::array();
  for (const auto& dir : dirs) {
    const std::string id = dir.filename().string();
    try {
      const auto bundle = alignment::load_bundle(dir);
      const auto pair = alignment::curate(bundle);
      const fs::path p = out / "pairs" / id;
      core::save_clip(pair.ni, p / "ni");
      core::save_clip(pair.gt, p / "gt");
      write_json(p / "alignment.json", pair.report.to_json());
      fs::copy_file(dir / "boxes.json", p / "boxes.json");
      fs::copy_file(dir / "flow" / "flow.tc", p / "flow.tc");
      ids.push_back(id);
    } catch (const Error& e) {
      log("skipping " + id + ": " + e.what());
      skipped.push_back({{"id", id}, {"reason", e.what()}});
      fs::remove_all(out / "pairs" / id);
    }
  }
  if (ids.empty() && !dirs.empty()) throw InputError("no pair could be curated from " + bundles.string());

  // One clip per scene, so shuffling ids splits by scene.
  std::vector<std::string> order = ids;
  std::mt19937_64 engine(Rng(seed).fork("split").seed());
  std::shuffle(order.begin(), order.end(), engine);
  const auto n_val = static_cast<size_t>(std::lround(val_fraction * static_cast<double>(order.size())));
  std::vector<std::string> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::string> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  write_json(out / "split.json", {{"seed", seed}, {"train", train}, {"val", val}, {"skipped", skipped}});
  log("curated " + std::to_string(ids.size()) + " pairs (" + std::to_string(train.size()) + " train, " +
      std::to_string(val.size()) + " val)");
}

void cmd_train(const RunConfig& cfg, uint64_t seed, const std::string& stage, const fs::path& data,
               const std::optional<fs::path>& checkpoint, const fs::path& out) {
  if (stage != "a" && stage != "h") throw InputError("stage must be 'a' or 'h', got '" + stage + "'");
  if (stage == "h" && !checkpoint) throw InputError("stage h requires a stage-a checkpoint (--checkpoint)");
  require_dir(data, "data directory");
  if (checkpoint) {
    require_dir(*checkpoint, "checkpoint");
    if (stage == "h") {
      const fs::path marker = *checkpoint / kStageMarker;
      if (!fs::exists(marker)) throw InputError("not a stage-a checkpoint: " + checkpoint->string());
    }
  }
  const auto pairs = load_pairs(data, "train");
  if (pairs.empty()) throw InputError("no training pairs in " + data.string());

  auto stage_cfg = [&](adapters::Stage s) {
    auto c = cfg.stage_config(s);
    c.seed = seed;
    c.frames = static_cast<int>(pairs.front().gt.num_frames());
    c.height = static_cast<int>(pairs.front().gt.height());
    c.width = static_cast<int>(pairs.front().gt.width());
    return c;
  };

  make_fresh_dir(out);
  cfg.save(out / "config.ini");
  training::TrainHooks hooks;
  hooks.print_every = 50;
  json summary;

  pipeline::MirageModel model = checkpoint ? pipeline::load_checkpoint(*checkpoint)
                                           : pipeline::MirageModel(cfg.model_config(), seed);
  if (stage == "a") {
    if (!checkpoint) {
      hooks.log_path = out / "loss_base.jsonl";
      summary["base"] = stage_summary(training::pretrain_base(model, pairs, stage_cfg(adapters::Stage::kBase), hooks));
    }
    hooks.log_path = out / "loss_a.jsonl";
    summary["a"] = stage_summary(training::train_stage_a(model, pairs, stage_cfg(adapters::Stage::kA), hooks));
  } else {
    hooks.log_path = out / "loss_h.jsonl";
    summary["h"] = stage_summary(training::train_stage_h(model, pairs, stage_cfg(adapters::Stage::kH), hooks));
  }
  pipeline::save_checkpoint(model, out / "checkpoint");
  write_json(out / "checkpoint" / kStageMarker, {{"stage", stage}});
  write_json(out / "train_summary.json", summary);
}

void cmd_edit(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& clip, const fs::path& out) {
  require_dir(checkpoint, "checkpoint");
  auto model = pipeline::load_checkpoint(checkpoint);
  const auto x_ni = core::load_clip(clip);
  make_fresh_dir(out);
  const auto result = pipeline::edit(model, x_ni);
  core::save_clip(result.x_dr, out);
  cfg.save(out / "config.ini");
  write_json(out / "timing.json", result.timings_ms);
}

namespace {

// Aux files of a clip directory live next to it or one level up.
std::optional<fs::path> find_aux(const fs::path& clip_dir, const std::string& name) {
  for (const auto& d : {clip_dir, clip_dir.parent_path()}) {
    if (fs::exists(d / name)) return d / name;
  }
  return std::nullopt;
}

bool is_clip(const fs::path& d) { return fs::exists(d / "meta.json"); }

std::optional<fs::path> resolve_clip(const fs::path& base, const std::vector<std::string>& subdirs) {
  for (const auto& s : subdirs) {
    const fs::path p = s.empty() ? base : base / s;
    if (is_clip(p)) return p;
  }
  return std::nullopt;
}

metrics::EvalItem make_item(const std::string& id, const fs::path& pred, const fs::path& gt) {
  metrics::EvalItem item{id, core::load_clip(pred), core::load_clip(gt), {}, {}, {}};
  if (auto flow = find_aux(gt, "flow.tc")) {
    const auto c = core::load_container(*flow);
    item.flow = c.tensors.at("flow");
    item.mask = c.tensors.at("mask").to(torch::kFloat);
  } else {
    log(id + ": no flow.tc next to the reference; warp error skipped");
  }
  if (auto boxes = find_aux(gt, "boxes.json")) {
    for (const auto& b : read_json(*boxes)) item.boxes.push_back(alignment::bbox_from_json(b));
  }
  return item;
}

}  // namespace

void cmd_eval(const RunConfig& cfg, const fs::path& pred, const fs::path& gt, const std::optional<fs::path>& split,
              const std::optional<fs::path>& out) {
  require_dir(pred, "prediction directory");
  require_dir(gt, "reference directory");
  const auto mode = cfg.eval_mode();
  std::vector<metrics::EvalItem> items;
  if (is_clip(gt)) {
    if (!is_clip(pred)) throw InputError("reference is a clip but prediction is not: " + pred.string());
    items.push_back(make_item(gt.filename().string(), pred, gt));
  } else {
    std::set<std::string> wanted;
    if (split) {
      const json doc = read_json(*split);
      if (!doc.contains("val")) throw LoadError("split.json has no 'val' list");
      for (const auto& id : doc.at("val")) wanted.insert(id.get<std::string>());
    }
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(gt)) {
      if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      const std::string id = d.filename().string();
      if (split && !wanted.count(id)) continue;
      const auto g = resolve_clip(d, {"gt", ""});
      if (!g) continue;
      const auto p = resolve_clip(pred / id, {"", "ni"});
      if (!p) throw InputError("no prediction clip for '" + id + "' under " + pred.string());
      items.push_back(make_item(id, *p, *g));
    }
  }
  if (items.empty()) throw InputError("no clips to evaluate under " + gt.string());
  const auto report = metrics::evaluate(items, mode, cfg.get_bool("metrics", "warp_mean_abs"));
  std::cout << report.table();
  if (out) {
    make_fresh_dir(*out);
    cfg.save(*out / "config.ini");
    write_json(*out / "report.json", report.to_json());
    std::ofstream(*out / "report.txt") << report.table();
  }
}

int run(int argc, char** argv) {
  CLI::App app{"mirage: one-step video editing pipeline at desk scale"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::string> config_path;
  uint64_t seed = 0;
  std::string out;
  app.add_option("--config", config_path, "run config (key = value with [section] headers)");
  app.add_option("--seed", seed, "root seed")->capture_default_str();
  app.add_option("--out", out, "output directory (must not exist)");

  auto* synth = app.add_subcommand("synth", "generate synthetic scene bundles");

  std::string bundles;
  auto* align = app.add_subcommand("align", "alignment reports for scene bundles");
  align->add_option("--bundles", bundles, "bundle directory")->required();
  auto* curate = app.add_subcommand("curate", "build the paired dataset and its split");
  curate->add_option("--bundles", bundles, "bundle directory")->required();

  std::string stage, data;
  std::optional<std::string> checkpoint;
  auto* train = app.add_subcommand("train", "train stage a or h");
  train->add_option("stage", stage, "a or h")->required();
  train->add_option("--data", data, "curated dataset directory")->required();
  train->add_option("--checkpoint", checkpoint, "input checkpoint (base for a, stage-a for h)");

  std::string ckpt, clip;
  auto* edit = app.add_subcommand("edit", "edit one clip");
  edit->add_option("--checkpoint", ckpt, "checkpoint directory")->required();
  edit->add_option("--clip", clip, "input clip directory")->required();

  std::string pred, gt;
  std::optional<std::string> mode, split;
  auto* eval = app.add_subcommand("eval", "compare predictions with references");
  eval->add_option("--pred", pred, "prediction clip or collection")->required();
  eval->add_option("--gt", gt, "reference clip or collection")->required();
  eval->add_option("--mode", mode, "full_resolution or actor_centric");
  eval->add_option("--split", split, "split.json; evaluates its val ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUserError;
  }

  try {
    if (const char* workers = std::getenv("MIRAGE_NUM_WORKERS")) {
      const int n = std::atoi(workers);
      if (n <= 0) throw ConfigError(std::string("MIRAGE_NUM_WORKERS must be a positive integer, got '") + workers + "'");
      torch::set_num_threads(n);
    }
    RunConfig cfg = config_path ? RunConfig::load(*config_path) : RunConfig();
    if (mode) cfg.set("metrics", "mode", *mode);
    const std::optional<fs::path> out_opt = out.empty() ? std::nullopt : std::optional<fs::path>(out);
    auto to_path = [](const std::optional<std::string>& s) {
      return s ? std::optional<fs::path>(*s) : std::nullopt;
    };

    if (*synth) cmd_synth(cfg, seed, out);
    else if (*align) cmd_align(cfg, bundles, out);
    else if (*curate) cmd_curate(cfg, seed, bundles, out);
    else if (*train) cmd_train(cfg, seed, stage, data, to_path(checkpoint), out);
    else if (*edit) cmd_edit(cfg, ckpt, clip, out);
    else if (*eval) cmd_eval(cfg, pred, gt, to_path(split), out_opt);
    return kOk;
  } catch (const ContractError& e) {
    std::cerr << "mirage: internal error: " << e.what() << "\n";
    return kInternalError;
  } catch (const NumericError& e) {
    std::cerr << "mirage: internal error: " << e.what() << "\n";
    return kInternalError;
  } catch (const Error& e) {
    std::cerr << "mirage: error: " << e.what() << "\n";
    return kUserError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "mirage: error: " << e.what() << "\n";
    return kUserError;
  } catch (const std::exception& e) {
    std::cerr << "mirage: internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace mirage::cli
