// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mirage/cli/run_config.hpp"

namespace mirage::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUserError = 1, kInternalError = 2 };

/// [data] scenes bundles under out/scene_NNNN plus manifest.json.
void cmd_synth(const RunConfig& cfg, uint64_t seed, const fs::path& out);

/// Alignment reports only: out/<id>/alignment.json.
void cmd_align(const RunConfig& cfg, const fs::path& bundles, const fs::path& out);

/// out/pairs/<id>/{ni,gt,alignment.json,boxes.json,flow.tc} and out/split.json.
/// Unreadable bundles are skipped with a logged reason; InputError when no
/// pair was produced from a non-empty bundle set.
void cmd_curate(const RunConfig& cfg, uint64_t seed, const fs::path& bundles, const fs::path& out);

/// stage "a": optional base checkpoint, otherwise base pretraining first.
/// stage "h": requires a stage-a (or later) checkpoint.
void cmd_train(const RunConfig& cfg, uint64_t seed, const std::string& stage, const fs::path& data,
               const std::optional<fs::path>& checkpoint, const fs::path& out);

/// Writes the edited clip into out plus out/timing.json.
void cmd_edit(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& clip, const fs::path& out);

/// Prints the table; with out also writes report.json and report.txt.
void cmd_eval(const RunConfig& cfg, const fs::path& pred, const fs::path& gt, const std::optional<fs::path>& split,
              const std::optional<fs::path>& out);

/// Full command line. Never throws; returns an ExitCode.
int run(int argc, char** argv);

}  // namespace mirage::cli
