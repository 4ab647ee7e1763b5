// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mirage/alignment/synth.hpp"
#include "mirage/metrics/report.hpp"
#include "mirage/pipeline/model.hpp"
#include "mirage/training/trainer.hpp"

namespace mirage::cli {

/// key = value file with [section] headers. Every key has a default; unknown
/// sections and keys are rejected. '#' and ';' start comments.
class RunConfig {
 public:
  /// All defaults (desk preset).
  RunConfig();

  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  /// Resolved config in the same syntax; parse(serialize()) reproduces it.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  /// Throws ConfigError naming an unknown section or key.
  void set(const std::string& section, const std::string& key, const std::string& value);
  const std::string& get(const std::string& section, const std::string& key) const;

  int64_t get_int(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  std::vector<int64_t> get_ints(const std::string& section, const std::string& key) const;
  std::vector<std::string> get_list(const std::string& section, const std::string& key) const;

  pipeline::ModelConfig model_config() const;
  training::StageConfig stage_config(adapters::Stage stage) const;
  alignment::SceneSpec scene_spec() const;
  metrics::EvalMode eval_mode() const;

  bool operator==(const RunConfig& other) const { return values_ == other.values_; }

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace mirage::cli
