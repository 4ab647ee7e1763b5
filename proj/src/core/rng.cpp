// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/core/rng.hpp"

#include <cmath>

namespace mirage {

namespace {

// FNV-1a followed by a splitmix64 finalizer.
uint64_t mix(uint64_t seed, std::string_view tag) {
  uint64_t h = 1469598103934665603ULL ^ seed;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

}  // namespace

Rng::Rng(RngSeed seed)
    : seed_(seed.value), engine_(seed.value), gen_(at::make_generator<at::CPUGeneratorImpl>(seed.value)) {}

Rng Rng::fork(std::string_view tag) const { return Rng(RngSeed{mix(seed_, tag)}); }

torch::Tensor Rng::normal(at::IntArrayRef shape, torch::Dtype dtype) {
  auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
  t.normal_(0.0, 1.0, gen_);
  return t;
}

torch::Tensor Rng::uniform(at::IntArrayRef shape, double lo, double hi, torch::Dtype dtype) {
  auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
  t.uniform_(lo, hi, gen_);
  return t;
}

double Rng::uniform_scalar(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double Rng::normal_scalar(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  return std::uniform_int_distribution<int64_t>(lo, hi)(engine_);
}

void seed_default_generator(uint64_t seed) { torch::manual_seed(seed); }

}  // namespace mirage
