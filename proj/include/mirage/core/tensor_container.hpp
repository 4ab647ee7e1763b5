// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>

namespace mirage::core {

/// Named tensors plus free-form JSON metadata, stored as
///
///   "MIRAGETC" | u64 LE manifest length | UTF-8 JSON manifest | payload
///
/// Payload entries are little-endian, 8-byte aligned, in manifest (name) order.
/// See docs/tensor_container.md for the byte-level layout.
struct TensorContainer {
  std::map<std::string, torch::Tensor> tensors;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Serializes to bytes. Tensors are moved to CPU and made contiguous first.
std::string serialize(const TensorContainer& container);
TensorContainer deserialize(const std::string& bytes);

void save_container(const TensorContainer& container, const std::filesystem::path& path);
TensorContainer load_container(const std::filesystem::path& path);

/// Collects `module.named_parameters()` (and buffers) into a container.
TensorContainer module_state(const torch::nn::Module& module);

/// Copies tensors from `container` into the matching parameters of `module`.
/// Every parameter must be present with matching shape; extra entries are an error.
void load_module_state(torch::nn::Module& module, const TensorContainer& container,
                       const std::string& component);

}  // namespace mirage::core
