#include <doctest.h>

#include <set>
#include <string>

#include "helpers.hpp"
#include "navp/frame.hpp"
#include "navp/rng.hpp"

using namespace navp;
using navp::test::four_colors;

TEST_CASE("rng is reproducible and below() stays in range") {
  Rng a(99), b(99), c(100);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs |= x != c.next();
  }
  CHECK(differs);
  Rng r(5);
  for (int i = 0; i < 10000; ++i) {
    CHECK(r.below(7) < 7);
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const auto v = r.range(3, 5);
    CHECK(v >= 3);
    CHECK(v <= 5);
  }
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}

TEST_CASE("splitmix64 matches the published first output for seed 0") {
  std::uint64_t state = 0;
  CHECK(splitmix64(state) == 0xE220A8397B1DCDAFULL);
}

TEST_CASE("generated scenes are deterministic") {
  const Frame a = generate_scene(42, 64, 64, four_colors(), 3);
  const Frame b = generate_scene(42, 64, 64, four_colors(), 3);
  CHECK(a == b);
  CHECK(save_ppm(a) == save_ppm(b));
  CHECK_FALSE(a == generate_scene(43, 64, 64, four_colors(), 3));
}

TEST_CASE("zero shapes is rejected") {
  CHECK_NAVP_ERROR(generate_scene(42, 64, 64, four_colors(), 0), ErrorCode::kInvalidArgument);
}

TEST_CASE("dimensions under 16 are rejected") {
  CHECK_NAVP_ERROR(generate_scene(1, 15, 64, four_colors(), 1), ErrorCode::kDimensionTooSmall);
  CHECK_NAVP_ERROR(generate_scene(1, 64, 8, four_colors(), 1), ErrorCode::kDimensionTooSmall);
  CHECK_NOTHROW(generate_scene(1, 16, 16, four_colors(), 1));
}

TEST_CASE("every generated pixel is a palette color") {
  const auto palette = four_colors();
  for (std::uint64_t seed : {42ULL, 1ULL, 7ULL, 12345ULL}) {
    const Scene s = generate_scene_with_truth(seed, 64, 64, palette, 3);
    for (std::uint32_t y = 0; y < 64; ++y)
      for (std::uint32_t x = 0; x < 64; ++x) {
        const Rgb px = s.frame.at(x, y);
        const auto label = s.truth.at(x, y);
        REQUIRE(label < palette.size());
        CHECK(px == palette[label]);
      }
  }
}

TEST_CASE("ground truth uses more than background on busy scenes") {
  const Scene s = generate_scene_with_truth(3, 128, 96, ScenePalette::standard(), 12);
  std::set<int> seen(s.truth.labels().begin(), s.truth.labels().end());
  CHECK(seen.size() > 1);
}

TEST_CASE("frame and label map validate their buffers") {
  CHECK_NAVP_ERROR(Frame(0, 4, {}), ErrorCode::kInvalidArgument);
  CHECK_NAVP_ERROR(Frame(2, 2, std::vector<std::uint8_t>(11)), ErrorCode::kInvalidArgument);
  CHECK_NAVP_ERROR(LabelMap(2, 1, {0, 3}, 3), ErrorCode::kInvalidArgument);
  CHECK_NAVP_ERROR(LabelMap(1, 1, {0}, 0), ErrorCode::kInvalidArgument);
  CHECK_NAVP_ERROR(ScenePalette({{1, 1, 1}}), ErrorCode::kInvalidArgument);
  CHECK_NAVP_ERROR(ScenePalette({{1, 1, 1}, {1, 1, 1}}), ErrorCode::kInvalidArgument);
}

TEST_CASE("ppm save of a white pixel is byte-exact") {
  const auto bytes = save_ppm(navp::test::solid(1, 1, {255, 255, 255}));
  const std::string expected = std::string("P6\n1 1\n255\n") + "\xFF\xFF\xFF";
  CHECK(std::string(bytes.begin(), bytes.end()) == expected);
}

TEST_CASE("ppm round trip and header parsing") {
  const Frame f = generate_scene(9, 33, 17, four_colors(), 2);
  CHECK(load_ppm(save_ppm(f)) == f);

  const std::string with_comment = "P6\n# made by hand\n2 1\n255\n\x01\x02\x03\x04\x05\x06";
  const std::vector<std::uint8_t> bytes(with_comment.begin(), with_comment.end());
  const Frame g = load_ppm(bytes, 4);
  CHECK(g.width() == 2);
  CHECK(g.frame_index() == 4);
  CHECK(g.at(1, 0) == Rgb{4, 5, 6});
}

TEST_CASE("ppm load errors") {
  const auto as_bytes = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
  CHECK_NAVP_ERROR(load_ppm(as_bytes("P5\n1 1\n255\n\x01")), ErrorCode::kUnsupportedFormat);
  CHECK_NAVP_ERROR(load_ppm(as_bytes("Q6\n1 1\n255\n\x01\x01\x01")), ErrorCode::kMalformedHeader);
  CHECK_NAVP_ERROR(load_ppm(as_bytes("P6\nx 1\n255\n")), ErrorCode::kMalformedHeader);
  CHECK_NAVP_ERROR(load_ppm(as_bytes("P6\n1 1\n65535\n\x01\x01\x01")), ErrorCode::kUnsupportedMaxval);
  CHECK_NAVP_ERROR(load_ppm(as_bytes("P6\n2 2\n255\n\x01\x01\x01")), ErrorCode::kTruncatedPayload);
}

TEST_CASE("synthetic source derives a scene per frame index") {
  SyntheticSource src(5, 32, 32, four_colors(), 2);
  const Frame a = src.capture(3);
  CHECK(a.frame_index() == 3);
  CHECK(a == generate_scene(src.scene_seed(3), 32, 32, four_colors(), 2).with_index(3));
  CHECK_FALSE(a.pixels().size() == 0);
  CHECK(src.scene_seed(3) != src.scene_seed(4));
}

TEST_CASE("ppm directory source cycles through sorted files") {
  navp::test::TempDir dir("ppmdir");
  write_ppm_file(dir.path() / "b.ppm", navp::test::solid(2, 2, {9, 9, 9}));
  write_ppm_file(dir.path() / "a.ppm", navp::test::solid(2, 2, {1, 1, 1}));
  PpmDirectorySource src(dir.path());
  CHECK(src.size() == 2);
  CHECK(src.capture(0).at(0, 0) == Rgb{1, 1, 1});
  CHECK(src.capture(1).at(0, 0) == Rgb{9, 9, 9});
  CHECK(src.capture(2).at(0, 0) == Rgb{1, 1, 1});
  CHECK(src.capture(2).frame_index() == 2);
  CHECK_NAVP_ERROR(PpmDirectorySource(dir.path() / "missing"), ErrorCode::kIo);
}
