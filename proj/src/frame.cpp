#include "navp/frame.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include "navp/error.hpp"
#include "navp/rng.hpp"

namespace navp {

Frame::Frame(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> pixels,
             std::uint64_t frame_index)
    : width_(width), height_(height), pixels_(std::move(pixels)), frame_index_(frame_index) {
  if (width_ == 0 || height_ == 0)
    throw Error(ErrorCode::kInvalidArgument, "frame dimensions must be >= 1");
  if (pixels_.size() != static_cast<std::size_t>(width_) * height_ * 3)
    throw Error(ErrorCode::kInvalidArgument, "pixel buffer does not match width*height*3");
}

Frame Frame::with_index(std::uint64_t frame_index) const {
  Frame copy = *this;
  copy.frame_index_ = frame_index;
  return copy;
}

LabelMap::LabelMap(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> labels,
                   std::uint32_t num_classes)
    : width_(width), height_(height), labels_(std::move(labels)), num_classes_(num_classes) {
  if (width_ == 0 || height_ == 0)
    throw Error(ErrorCode::kInvalidArgument, "label map dimensions must be >= 1");
  if (num_classes_ == 0 || num_classes_ > 255)
    throw Error(ErrorCode::kInvalidArgument, "num_classes must be in 1..255");
  if (labels_.size() != static_cast<std::size_t>(width_) * height_)
    throw Error(ErrorCode::kInvalidArgument, "label buffer does not match width*height");
  const auto max_label = std::max_element(labels_.begin(), labels_.end());
  if (*max_label >= num_classes_)
    throw Error(ErrorCode::kInvalidArgument, "label index out of range");
}

ScenePalette::ScenePalette(std::vector<Rgb> colors) : colors_(std::move(colors)) {
  if (colors_.size() < 2 || colors_.size() > 255)
    throw Error(ErrorCode::kInvalidArgument, "palette needs 2..255 colors");
  for (std::size_t i = 0; i < colors_.size(); ++i)
    for (std::size_t j = i + 1; j < colors_.size(); ++j)
      if (colors_[i] == colors_[j])
        throw Error(ErrorCode::kInvalidArgument, "palette colors must be distinct");
}

ScenePalette ScenePalette::standard() {
  return ScenePalette({
      {32, 32, 32},
      {224, 224, 224},
      {128, 128, 128},
      {200, 48, 48},
      {48, 48, 200},
      {124, 48, 124},
  });
}

Scene generate_scene_with_truth(std::uint64_t seed, std::uint32_t width,
                                std::uint32_t height, const ScenePalette& palette,
                                std::uint32_t num_shapes) {
  if (width < 16 || height < 16)
    throw Error(ErrorCode::kDimensionTooSmall, "scene must be at least 16x16");
  if (num_shapes == 0)
    throw Error(ErrorCode::kInvalidArgument, "scene needs at least one shape");

  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<std::uint8_t> labels(n, 0);
  const auto span = [&](std::int64_t y, std::int64_t x0, std::int64_t x1, std::uint8_t cls) {
    std::memset(labels.data() + static_cast<std::size_t>(y) * width + x0, cls,
                static_cast<std::size_t>(x1 - x0 + 1));
  };

  Rng rng(seed);
  const std::int64_t w = width;
  const std::int64_t h = height;
  const std::int64_t short_side = std::min(w, h);
  for (std::uint32_t s = 0; s < num_shapes; ++s) {
    const bool disc = rng.below(2) == 1;
    const auto cls = static_cast<std::uint8_t>(1 + rng.below(palette.size() - 1));
    if (!disc) {
      const std::int64_t rw = rng.range(w / 10, w / 3);
      const std::int64_t rh = rng.range(h / 10, h / 3);
      const std::int64_t x0 = rng.range(0, w - rw);
      const std::int64_t y0 = rng.range(0, h - rh);
      if (rw > 0)
        for (std::int64_t y = y0; y < y0 + rh; ++y) span(y, x0, x0 + rw - 1, cls);
    } else {
      const std::int64_t r = rng.range(std::max<std::int64_t>(2, short_side / 20),
                                       std::max<std::int64_t>(2, short_side / 6));
      const std::int64_t cx = rng.range(0, w - 1);
      const std::int64_t cy = rng.range(0, h - 1);
      for (std::int64_t y = std::max<std::int64_t>(0, cy - r);
           y <= std::min(h - 1, cy + r); ++y) {
        // Largest dx with dx^2 + dy^2 <= r^2.
        const std::int64_t rem = r * r - (y - cy) * (y - cy);
        auto dx = static_cast<std::int64_t>(std::sqrt(static_cast<double>(rem)));
        while (dx * dx > rem) --dx;
        while ((dx + 1) * (dx + 1) <= rem) ++dx;
        const std::int64_t xa = std::max<std::int64_t>(0, cx - dx);
        const std::int64_t xb = std::min(w - 1, cx + dx);
        if (xa <= xb) span(y, xa, xb, cls);
      }
    }
  }

  std::vector<std::uint8_t> pixels(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const Rgb& c = palette[labels[i]];
    pixels[i * 3] = c.r;
    pixels[i * 3 + 1] = c.g;
    pixels[i * 3 + 2] = c.b;
  }
  return Scene{Frame(width, height, std::move(pixels)),
               LabelMap(width, height, std::move(labels),
                        static_cast<std::uint32_t>(palette.size()))};
}

Frame generate_scene(std::uint64_t seed, std::uint32_t width, std::uint32_t height,
                     const ScenePalette& palette, std::uint32_t num_shapes) {
  return generate_scene_with_truth(seed, width, height, palette, num_shapes).frame;
}

std::vector<std::uint8_t> save_ppm(const Frame& frame) {
  const std::string header =
      "P6\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), frame.pixels().begin(), frame.pixels().end());
  return out;
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::uint64_t number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
      throw Error(ErrorCode::kMalformedHeader, "expected a decimal field in PPM header");
    std::uint64_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 0xFFFFFFFFULL)
        throw Error(ErrorCode::kMalformedHeader, "PPM header field too large");
      ++pos_;
    }
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Frame load_ppm(std::span<const std::uint8_t> bytes, std::uint64_t frame_index) {
  if (bytes.size() < 2 || bytes[0] != 'P')
    throw Error(ErrorCode::kMalformedHeader, "missing PPM magic");
  if (bytes[1] != '6')
    throw Error(ErrorCode::kUnsupportedFormat,
                std::string("unsupported netpbm variant P") + static_cast<char>(bytes[1]));
  HeaderReader reader(bytes);
  reader.advance(2);
  const auto width = reader.number();
  const auto height = reader.number();
  const auto maxval = reader.number();
  if (width == 0 || height == 0)
    throw Error(ErrorCode::kMalformedHeader, "PPM dimensions must be non-zero");
  if (maxval != 255)
    throw Error(ErrorCode::kUnsupportedMaxval, "only maxval 255 is supported");
  // Exactly one whitespace byte separates the header from the raster.
  if (reader.pos() >= bytes.size() || !std::isspace(bytes[reader.pos()]))
    throw Error(ErrorCode::kMalformedHeader, "missing separator after maxval");
  reader.advance(1);

  const std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() - reader.pos() < need)
    throw Error(ErrorCode::kTruncatedPayload, "PPM raster shorter than width*height*3");
  std::vector<std::uint8_t> pixels(bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos()),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos() + need));
  return Frame(static_cast<std::uint32_t>(width), static_cast<std::uint32_t>(height),
               std::move(pixels), frame_index);
}

Frame read_ppm_file(const std::filesystem::path& path, std::uint64_t frame_index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_ppm(bytes, frame_index);
}

void write_ppm_file(const std::filesystem::path& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const auto bytes = save_ppm(frame);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

SyntheticSource::SyntheticSource(std::uint64_t seed, std::uint32_t width,
                                 std::uint32_t height, ScenePalette palette,
                                 std::uint32_t num_shapes)
    : seed_(seed),
      width_(width),
      height_(height),
      palette_(std::move(palette)),
      num_shapes_(num_shapes) {}

std::uint64_t SyntheticSource::scene_seed(std::uint64_t frame_index) const {
  return mix_seed(seed_, frame_index);
}

Frame SyntheticSource::capture(std::uint64_t frame_index) {
  return generate_scene(scene_seed(frame_index), width_, height_, palette_, num_shapes_)
      .with_index(frame_index);
}

PpmDirectorySource::PpmDirectorySource(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorCode::kIo, dir.string() + " is not a directory");
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ppm")
      files_.push_back(entry.path());
  std::sort(files_.begin(), files_.end());
  if (files_.empty()) throw Error(ErrorCode::kIo, "no .ppm files in " + dir.string());
}

Frame PpmDirectorySource::capture(std::uint64_t frame_index) {
  return read_ppm_file(files_[frame_index % files_.size()], frame_index);
}

}  // namespace navp
