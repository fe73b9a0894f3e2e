#pragma once

#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "navp/error.hpp"
#include "navp/frame.hpp"

// Checks that `expr` throws navp::Error with the given code.
#define CHECK_NAVP_ERROR(expr, expected_code)                      \
  do {                                                             \
    bool navp_threw_ = false;                                      \
    try {                                                          \
      (void)(expr);                                                \
    } catch (const navp::Error& navp_e_) {                         \
      navp_threw_ = true;                                          \
      CHECK_MESSAGE(navp_e_.code() == (expected_code),             \
                    "got " << navp::to_string(navp_e_.code()));    \
    }                                                              \
    CHECK_MESSAGE(navp_threw_, "expected navp::Error from " #expr); \
  } while (0)

namespace navp::test {

inline ScenePalette four_colors() {
  return ScenePalette({{0, 0, 0}, {255, 255, 255}, {255, 0, 0}, {0, 0, 255}});
}

inline Frame solid(std::uint32_t w, std::uint32_t h, Rgb c) {
  std::vector<std::uint8_t> px;
  px.reserve(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    px.push_back(c.r);
    px.push_back(c.g);
    px.push_back(c.b);
  }
  return Frame(w, h, std::move(px));
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("navp-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace navp::test
