// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "helpers.hpp"
#include "mirage/core/clip_io.hpp"
#include "mirage/core/error.hpp"
#include "mirage/core/png_io.hpp"
#include "mirage/core/rng.hpp"
#include "mirage/core/temporal.hpp"
#include "mirage/core/tensor_container.hpp"
#include "mirage/core/video.hpp"

using namespace mirage;
using mirage::test::bit_equal;

namespace {

VideoClip random_clip(int64_t T, int64_t H, int64_t W, uint64_t seed) {
  torch::manual_seed(seed);
  // 8-bit values survive the PNG round trip exactly.
  return VideoClip(torch::round(torch::rand({T, H, W, 3}) * 255) / 255);
}

// Two stride-2 causal downsamples, tracking which source frames feed each
// output slot: slot j of a causal stride-2 stage with replicate padding sees
// inputs {2j-1, 2j} clamped at 0, so groups collapse to {0},{1,2},{3,4},...
std::vector<std::set<int64_t>> simulate_groups(int64_t T) {
  std::vector<std::set<int64_t>> g;
  for (int64_t f = 0; f < T; ++f) g.push_back({f});
  for (int stage = 0; stage < 2; ++stage) {
    std::vector<std::set<int64_t>> next;
    for (int64_t j = 0; 1 + 2 * (j - 1) < static_cast<int64_t>(g.size()) || j == 0; ++j) {
      std::set<int64_t> s;
      const int64_t newest = j == 0 ? 0 : 2 * j;
      const int64_t oldest = j == 0 ? 0 : 2 * j - 1;
      if (newest >= static_cast<int64_t>(g.size())) break;
      for (int64_t i = oldest; i <= newest; ++i) s.insert(g[i].begin(), g[i].end());
      next.push_back(s);
    }
    g = next;
  }
  return g;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("clip invariants are enforced") {
    CHECK_NOTHROW(VideoClip(torch::rand({9, 64, 96, 3})));
    CHECK_THROWS_AS(VideoClip(torch::rand({8, 64, 96, 3})), ShapeError);
    CHECK_THROWS_AS(VideoClip(torch::rand({9, 60, 96, 3})), ShapeError);
    CHECK_THROWS_AS(VideoClip(torch::rand({9, 64, 96, 3}) + 1.5), ShapeError);
    auto bad = torch::rand({5, 8, 8, 3});
    bad[0][0][0][0] = std::nan("");
    CHECK_THROWS_AS(VideoClip{bad}, ShapeError);
  }

  TEST_CASE("network layout round trip") {
    const auto c = random_clip(5, 16, 24, 1);
    const auto x = c.to_network();
    CHECK(x.sizes() == torch::IntArrayRef({1, 3, 5, 16, 24}));
    CHECK(torch::allclose(VideoClip::from_network(x).frames(), c.frames(), 0, 1e-6));
  }

  TEST_CASE("load_clip reads 9 frames and round-trips bit-identically") {
    test::TempDir dir("clip");
    const auto c = random_clip(9, 64, 96, 2);
    core::save_clip(c, dir / "a");
    const auto loaded = core::load_clip(dir / "a");
    CHECK(loaded.num_frames() == 9);
    CHECK(loaded.height() == 64);
    CHECK(loaded.width() == 96);
    CHECK(bit_equal(loaded.frames(), c.frames()));
    core::save_clip(loaded, dir / "b");
    CHECK(bit_equal(core::load_clip(dir / "b").frames(), loaded.frames()));
    CHECK(test::read_file(dir / "a" / "frame_0004.png") == test::read_file(dir / "b" / "frame_0004.png"));
  }

  TEST_CASE("load_clip errors") {
    test::TempDir dir("clip_err");
    core::save_clip(random_clip(9, 16, 16, 3), dir / "c");
    std::filesystem::remove(dir / "c" / "frame_0008.png");
    try {
      core::load_clip(dir / "c");
      FAIL("expected a shape error");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("T ≡ 1 (mod 4) violated") != std::string::npos);
    }
    std::filesystem::remove(dir / "c" / "frame_0003.png");
    try {
      core::load_clip(dir / "c");
      FAIL("expected a load error");
    } catch (const LoadError& e) {
      CHECK(std::string(e.what()).find("missing frame index 3") != std::string::npos);
    }
    CHECK_THROWS_AS(core::load_clip(dir / "nope"), LoadError);
  }

  TEST_CASE("frame_to_latent_index examples") {
    CHECK(core::frame_to_latent_index(0, 9) == 0);
    CHECK(core::frame_to_latent_index(4, 9) == 1);
    CHECK(core::frame_to_latent_index(8, 9) == 2);
    CHECK_THROWS_AS(core::frame_to_latent_index(9, 9), BoundsError);
    CHECK_THROWS_AS(core::frame_to_latent_index(-1, 9), BoundsError);
  }

  TEST_CASE("frame_to_latent_index matches simulated causal stride grouping") {
    for (int64_t T : {1, 5, 9, 13, 17}) {
      const auto groups = simulate_groups(T);
      REQUIRE(static_cast<int64_t>(groups.size()) == core::latent_frame_count(T));
      for (size_t j = 0; j < groups.size(); ++j) {
        // The newest frames in each group are the ones that group owns.
        const int64_t lo = j == 0 ? 0 : *groups[j - 1].rbegin() + 1;
        const int64_t hi = *groups[j].rbegin();
        for (int64_t f = lo; f <= hi; ++f) CHECK(core::frame_to_latent_index(f, T) == static_cast<int64_t>(j));
        const auto [a, b] = core::latent_frame_group(static_cast<int64_t>(j), T);
        CHECK(a == lo);
        CHECK(b == hi + 1);
      }
    }
  }

  TEST_CASE("group sizes are 1,4,4,...") {
    for (int64_t T = 1; T <= 21; T += 4) {
      std::vector<int64_t> sizes(static_cast<size_t>(core::latent_frame_count(T)), 0);
      for (int64_t f = 0; f < T; ++f) ++sizes[static_cast<size_t>(core::frame_to_latent_index(f, T))];
      CHECK(sizes[0] == 1);
      for (size_t j = 1; j < sizes.size(); ++j) CHECK(sizes[j] == 4);
    }
  }

  TEST_CASE("tensor container round trip is bit-exact for every dtype") {
    core::TensorContainer c;
    torch::manual_seed(4);
    c.tensors["f32"] = torch::randn({3, 4});
    c.tensors["f64"] = torch::randn({2, 2, 2}, torch::kDouble);
    c.tensors["i64"] = torch::randint(-1000, 1000, {7}, torch::kLong);
    c.tensors["i32"] = torch::randint(-1000, 1000, {2, 3}, torch::kInt);
    c.tensors["u8"] = torch::randint(0, 255, {5, 1}, torch::kByte);
    c.tensors["scalar"] = torch::tensor(3.5);
    c.tensors["empty"] = torch::zeros({0, 3});
    c.metadata["note"] = "x";
    const auto bytes = core::serialize(c);
    const auto back = core::deserialize(bytes);
    REQUIRE(back.tensors.size() == c.tensors.size());
    for (const auto& [k, v] : c.tensors) CHECK(bit_equal(back.tensors.at(k), v));
    CHECK(back.metadata["note"] == "x");
    CHECK(core::serialize(back) == bytes);

    test::TempDir dir("tc");
    core::save_container(c, dir / "x.tc");
    CHECK(test::read_file(dir / "x.tc") == bytes);
  }

  TEST_CASE("tensor container manifest offsets do not overlap") {
    core::TensorContainer c;
    c.tensors["a"] = torch::ones({10});
    c.tensors["b"] = torch::ones({3, 3}, torch::kDouble);
    c.tensors["c"] = torch::ones({1}, torch::kByte);
    const auto bytes = core::serialize(c);
    // 8-byte magic, 8-byte little-endian manifest length, then the JSON manifest.
    uint64_t n = 0;
    for (int i = 15; i >= 8; --i) n = (n << 8) | static_cast<unsigned char>(bytes[static_cast<size_t>(i)]);
    const auto manifest = nlohmann::json::parse(bytes.substr(16, n));
    std::vector<std::pair<int64_t, int64_t>> spans;
    for (const auto& [name, e] : manifest.at("tensors").items()) spans.push_back({e.at("offset"), e.at("nbytes")});
    CHECK(spans.size() == 3);
    std::sort(spans.begin(), spans.end());
    for (size_t i = 1; i < spans.size(); ++i) CHECK(spans[i - 1].first + spans[i - 1].second <= spans[i].first);
  }

  TEST_CASE("unsupported dtypes are refused on save") {
    core::TensorContainer c;
    c.tensors["h"] = torch::ones({2}, torch::kHalf);
    CHECK_THROWS_AS(core::serialize(c), ShapeError);
  }

  TEST_CASE("corrupt containers are rejected") {
    core::TensorContainer c;
    c.tensors["a"] = torch::ones({10});
    auto bytes = core::serialize(c);
    CHECK_THROWS_AS(core::deserialize(bytes.substr(0, bytes.size() - 4)), LoadError);
    CHECK_THROWS_AS(core::deserialize("xx"), LoadError);
  }

  TEST_CASE("rng determinism and fork independence") {
    Rng a(42), b(42);
    CHECK(bit_equal(a.normal({16}), b.normal({16})));
    CHECK(a.uniform_scalar() == b.uniform_scalar());
    CHECK(Rng(42).fork("x").seed() == Rng(42).fork("x").seed());
    CHECK(Rng(42).fork("x").seed() != Rng(42).fork("y").seed());
    CHECK(Rng(42).fork("x").seed() != Rng(43).fork("x").seed());
  }

  TEST_CASE("png round trip") {
    test::TempDir dir("png");
    core::Image8 img{5, 3, 3, {}};
    for (int i = 0; i < 45; ++i) img.pixels.push_back(static_cast<uint8_t>(i * 5));
    core::write_png(dir / "x.png", img);
    const auto back = core::read_png_rgb(dir / "x.png");
    CHECK(back.width == 5);
    CHECK(back.height == 3);
    CHECK(back.pixels == img.pixels);
  }
}
