#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace navp {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Row-major RGB raster, 8 bits per channel. Immutable once built.
class Frame {
 public:
  Frame(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> pixels,
        std::uint64_t frame_index = 0);

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::uint64_t frame_index() const { return frame_index_; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  Rgb at(std::uint32_t x, std::uint32_t y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }

  Frame with_index(std::uint64_t frame_index) const;

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<std::uint8_t> pixels_;
  std::uint64_t frame_index_;
};

// Row-major per-pixel class indices; every label < num_classes.
class LabelMap {
 public:
  LabelMap(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> labels,
           std::uint32_t num_classes);

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::uint32_t num_classes() const { return num_classes_; }
  std::span<const std::uint8_t> labels() const { return labels_; }

  std::uint8_t at(std::uint32_t x, std::uint32_t y) const {
    return labels_[static_cast<std::size_t>(y) * width_ + x];
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<std::uint8_t> labels_;
  std::uint32_t num_classes_;
};

// Ordered, pairwise-distinct class colors. Index 0 is the scene background.
class ScenePalette {
 public:
  explicit ScenePalette(std::vector<Rgb> colors);

  // Six classes: three grey levels and two saturated hues plus their mix.
  // The mid tones sit on the segments between other entries, so blended
  // boundary pixels after downscaling land on a third class.
  static ScenePalette standard();

  std::size_t size() const { return colors_.size(); }
  const Rgb& operator[](std::size_t i) const { return colors_[i]; }
  std::span<const Rgb> colors() const { return colors_; }

 private:
  std::vector<Rgb> colors_;
};

struct Scene {
  Frame frame;
  LabelMap truth;
};

// Background of palette[0] with num_shapes rectangles and discs painted in
// other palette colors; a pure function of its arguments.
Frame generate_scene(std::uint64_t seed, std::uint32_t width, std::uint32_t height,
                     const ScenePalette& palette, std::uint32_t num_shapes);

Scene generate_scene_with_truth(std::uint64_t seed, std::uint32_t width,
                                std::uint32_t height, const ScenePalette& palette,
                                std::uint32_t num_shapes);

// Binary PPM (P6, maxval 255).
std::vector<std::uint8_t> save_ppm(const Frame& frame);
Frame load_ppm(std::span<const std::uint8_t> bytes, std::uint64_t frame_index = 0);

Frame read_ppm_file(const std::filesystem::path& path, std::uint64_t frame_index = 0);
void write_ppm_file(const std::filesystem::path& path, const Frame& frame);

// Capture stand-in for the camera.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual Frame capture(std::uint64_t frame_index) = 0;
};

class SyntheticSource final : public FrameSource {
 public:
  SyntheticSource(std::uint64_t seed, std::uint32_t width, std::uint32_t height,
                  ScenePalette palette, std::uint32_t num_shapes);

  Frame capture(std::uint64_t frame_index) override;

  std::uint64_t scene_seed(std::uint64_t frame_index) const;

 private:
  std::uint64_t seed_;
  std::uint32_t width_;
  std::uint32_t height_;
  ScenePalette palette_;
  std::uint32_t num_shapes_;
};

// Cycles through the *.ppm files of a directory in lexicographic order.
class PpmDirectorySource final : public FrameSource {
 public:
  explicit PpmDirectorySource(const std::filesystem::path& dir);

  Frame capture(std::uint64_t frame_index) override;
  std::size_t size() const { return files_.size(); }

 private:
  std::vector<std::filesystem::path> files_;
};

}  // namespace navp
