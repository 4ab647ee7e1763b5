// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include <cstdint>
#include <random>
#include <string_view>

namespace mirage {

struct RngSeed {
  uint64_t value = 0;
};

/// Deterministic random source. Holds a torch CPU generator for tensor draws
/// and a 64-bit Mersenne engine for scalar draws, both seeded from one value.
/// `fork(tag)` derives an independent stream so that adding draws in one
/// component never shifts the sequence seen by another.
class Rng {
 public:
  explicit Rng(RngSeed seed);
  explicit Rng(uint64_t seed) : Rng(RngSeed{seed}) {}

  Rng fork(std::string_view tag) const;
  uint64_t seed() const { return seed_; }

  torch::Tensor normal(at::IntArrayRef shape, torch::Dtype dtype = torch::kFloat);
  torch::Tensor uniform(at::IntArrayRef shape, double lo = 0.0, double hi = 1.0,
                        torch::Dtype dtype = torch::kFloat);

  double uniform_scalar(double lo = 0.0, double hi = 1.0);
  double normal_scalar(double mean = 0.0, double stddev = 1.0);
  int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive bounds

  std::mt19937_64& engine() { return engine_; }
  at::Generator& generator() { return gen_; }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  at::Generator gen_;
};

/// Seeds torch's default CPU generator. Module constructors draw their default
/// initializations from it, so calling this right before building a model fixes
/// every parameter initialization.
void seed_default_generator(uint64_t seed);

}  // namespace mirage
