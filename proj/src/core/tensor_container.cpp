// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/core/tensor_container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mirage/core/error.hpp"

namespace mirage::core {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'I', 'R', 'A', 'G', 'E', 'T', 'C'};
constexpr uint64_t kAlign = 8;

const char* dtype_tag(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat: return "f32";
    case torch::kDouble: return "f64";
    case torch::kInt: return "i32";
    case torch::kLong: return "i64";
    case torch::kByte: return "u8";
    default: throw ShapeError(std::string("unsupported container dtype ") + c10::toString(t));
  }
}

torch::ScalarType dtype_from_tag(const std::string& tag) {
  if (tag == "f32") return torch::kFloat;
  if (tag == "f64") return torch::kDouble;
  if (tag == "i32") return torch::kInt;
  if (tag == "i64") return torch::kLong;
  if (tag == "u8") return torch::kByte;
  throw LoadError("unknown dtype tag '" + tag + "'");
}

uint64_t round_up(uint64_t n) { return (n + kAlign - 1) / kAlign * kAlign; }

}  // namespace

std::string serialize(const TensorContainer& container) {
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["metadata"] = container.metadata;
  nlohmann::json entries = nlohmann::json::object();
  std::vector<std::pair<uint64_t, torch::Tensor>> payloads;
  uint64_t offset = 0;
  for (const auto& [name, tensor] : container.tensors) {
    auto t = tensor.detach().to(torch::kCPU).contiguous();
    const uint64_t nbytes = static_cast<uint64_t>(t.numel()) * t.element_size();
    entries[name] = {{"dtype", dtype_tag(t.scalar_type())},
                     {"shape", t.sizes().vec()},
                     {"offset", offset},
                     {"nbytes", nbytes}};
    payloads.emplace_back(offset, std::move(t));
    offset = round_up(offset + nbytes);
  }
  manifest["tensors"] = std::move(entries);
  const std::string header = manifest.dump();

  std::string out;
  out.reserve(16 + header.size() + offset);
  out.append(kMagic, sizeof(kMagic));
  const uint64_t len = header.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out.append(header);
  const size_t payload_start = out.size();
  out.resize(payload_start + offset, '\0');
  for (const auto& [off, t] : payloads) {
    const size_t nbytes = static_cast<size_t>(t.numel()) * t.element_size();
    if (nbytes) std::memcpy(out.data() + payload_start + off, t.data_ptr(), nbytes);
  }
  return out;
}

TensorContainer deserialize(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw LoadError("not a tensor container (bad magic)");
  }
  uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof(len));
  if (16 + len > bytes.size()) throw LoadError("truncated container manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("container manifest is not valid JSON: ") + e.what());
  }
  const size_t payload_start = 16 + len;
  TensorContainer c;
  c.metadata = manifest.value("metadata", nlohmann::json::object());
  std::vector<std::pair<uint64_t, uint64_t>> spans;
  for (const auto& [name, e] : manifest.at("tensors").items()) {
    const auto dtype = dtype_from_tag(e.at("dtype").get<std::string>());
    const auto shape = e.at("shape").get<std::vector<int64_t>>();
    const uint64_t off = e.at("offset").get<uint64_t>();
    const uint64_t nbytes = e.at("nbytes").get<uint64_t>();
    if (payload_start + off + nbytes > bytes.size()) throw LoadError("truncated payload for '" + name + "'");
    auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
    if (static_cast<uint64_t>(t.numel()) * t.element_size() != nbytes) {
      throw LoadError("size mismatch for '" + name + "'");
    }
    if (nbytes) std::memcpy(t.data_ptr(), bytes.data() + payload_start + off, nbytes);
    c.tensors.emplace(name, std::move(t));
    spans.emplace_back(off, off + nbytes);
  }
  std::sort(spans.begin(), spans.end());
  for (size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second) throw LoadError("overlapping container entries");
  }
  return c;
}

void save_container(const TensorContainer& container, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  const std::string bytes = serialize(container);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path.string());
}

TensorContainer load_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

TensorContainer module_state(const torch::nn::Module& module) {
  TensorContainer c;
  for (const auto& p : module.named_parameters(true)) c.tensors.emplace(p.key(), p.value().detach().clone());
  for (const auto& b : module.named_buffers(true)) c.tensors.emplace(b.key(), b.value().detach().clone());
  return c;
}

void load_module_state(torch::nn::Module& module, const TensorContainer& container,
                       const std::string& component) {
  torch::NoGradGuard guard;
  size_t used = 0;
  auto assign = [&](const std::string& name, torch::Tensor& dst) {
    auto it = container.tensors.find(name);
    if (it == container.tensors.end()) {
      throw LoadError(component + ": missing tensor '" + name + "'");
    }
    if (!it->second.sizes().equals(dst.sizes())) {
      throw LoadError(component + ": shape mismatch for '" + name + "'");
    }
    dst.copy_(it->second);
    ++used;
  };
  for (auto& p : module.named_parameters(true)) assign(p.key(), p.value());
  for (auto& b : module.named_buffers(true)) assign(b.key(), b.value());
  if (used != container.tensors.size()) {
    throw LoadError(component + ": container holds " + std::to_string(container.tensors.size()) +
                    " tensors but the module expects " + std::to_string(used));
  }
}

}  // namespace mirage::core
