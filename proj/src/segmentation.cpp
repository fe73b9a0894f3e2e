#include "navp/segmentation.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "navp/error.hpp"

namespace navp {

void CostModel::validate() const {
  if (!(fixed_us >= 0.0) || !(per_pixel_us >= 0.0))
    throw Error(ErrorCode::kInvalidArgument, "cost model coefficients must be >= 0");
}

Micros virtual_inference_time(const CostModel& model, std::uint32_t width,
                              std::uint32_t height) {
  if (width == 0 || height == 0)
    throw Error(ErrorCode::kInvalidArgument, "dimensions must be >= 1");
  const double pixels = static_cast<double>(width) * height;
  return static_cast<Micros>(std::llround(model.fixed_us + model.per_pixel_us * pixels));
}

namespace {

std::uint8_t nearest(const ScenePalette& palette, std::uint8_t r, std::uint8_t g,
                     std::uint8_t b) {
  std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
  std::uint8_t best_index = 0;
  for (std::size_t i = 0; i < palette.size(); ++i) {
    const int dr = int(r) - palette[i].r;
    const int dg = int(g) - palette[i].g;
    const int db = int(b) - palette[i].b;
    const auto d = static_cast<std::uint32_t>(dr * dr + dg * dg + db * db);
    if (d < best) {
      best = d;
      best_index = static_cast<std::uint8_t>(i);
    }
  }
  return best_index;
}

}  // namespace

LabelMap palette_segment(const Frame& frame, const ScenePalette& palette) {
  // Direct-mapped memo of recent colors; scenes are mostly flat regions.
  constexpr std::size_t kSlots = 1 << 12;
  struct Slot {
    std::uint32_t key = 0xFFFFFFFF;
    std::uint8_t label = 0;
  };
  std::vector<Slot> memo(kSlots);

  const auto px = frame.pixels();
  const std::size_t n = frame.pixel_count();
  std::vector<std::uint8_t> labels(n);
  std::uint32_t prev_key = 0xFFFFFFFF;
  std::uint8_t prev_label = 0;
  // The previous color repeated over four pixels, for skipping flat runs.
  std::uint8_t pattern[12] = {};
  std::uint64_t pat_lo = 0;
  std::uint32_t pat_hi = 0;
  std::size_t i = 0;
  while (i < n) {
    if (i + 4 <= n) {
      std::uint64_t lo;
      std::uint32_t hi;
      std::memcpy(&lo, &px[i * 3], 8);
      std::memcpy(&hi, &px[i * 3 + 8], 4);
      if (lo == pat_lo && hi == pat_hi) {
        std::memset(&labels[i], prev_label, 4);
        i += 4;
        continue;
      }
    }
    const std::uint32_t key = (std::uint32_t(px[i * 3]) << 16) |
                              (std::uint32_t(px[i * 3 + 1]) << 8) | px[i * 3 + 2];
    if (key != prev_key) {
      Slot& slot = memo[(key * 2654435761U) >> 20];
      if (slot.key != key) {
        slot.key = key;
        slot.label = nearest(palette, px[i * 3], px[i * 3 + 1], px[i * 3 + 2]);
      }
      prev_key = key;
      prev_label = slot.label;
      for (int k = 0; k < 4; ++k) std::memcpy(&pattern[k * 3], &px[i * 3], 3);
      std::memcpy(&pat_lo, pattern, 8);
      std::memcpy(&pat_hi, pattern + 8, 4);
    }
    labels[i++] = prev_label;
  }
  return LabelMap(frame.width(), frame.height(), std::move(labels),
                  static_cast<std::uint32_t>(palette.size()));
}

PaletteBackend::PaletteBackend(ScenePalette palette, std::optional<CostModel> cost)
    : palette_(std::move(palette)), cost_(cost) {
  if (cost_) cost_->validate();
}

SegmentResult PaletteBackend::segment(const Frame& frame) {
  if (cost_) {
    auto labels = palette_segment(frame, palette_);
    return {std::move(labels), virtual_inference_time(*cost_, frame.width(), frame.height())};
  }
  const auto start = std::chrono::steady_clock::now();
  auto labels = palette_segment(frame, palette_);
  const auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  return {std::move(labels), std::max<Micros>(1, elapsed)};
}

}  // namespace navp
