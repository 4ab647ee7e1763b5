// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/cli/commands.hpp"

int main(int argc, char** argv) { return mirage::cli::run(argc, argv); }
