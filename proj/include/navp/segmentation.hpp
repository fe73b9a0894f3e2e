#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "navp/channel.hpp"
#include "navp/frame.hpp"

namespace navp {

// Affine compute-time model: fixed cost plus a per-pixel cost.
struct CostModel {
  double fixed_us = 5000.0;
  double per_pixel_us = 113000.0 / (1920.0 * 1080.0);

  // Defaults: 5 ms fixed, and 118 ms total at 1920x1080 (~0.0545 us/px).
  static CostModel calibrated() { return {}; }

  void validate() const;
};

// round(fixed + per_pixel * width * height), in microseconds.
Micros virtual_inference_time(const CostModel& model, std::uint32_t width, std::uint32_t height);

// Nearest palette color by squared RGB distance; ties go to the lower index.
LabelMap palette_segment(const Frame& frame, const ScenePalette& palette);

struct SegmentResult {
  LabelMap labels;
  Micros inference_time = 0;
};

class SegmentationBackend {
 public:
  virtual ~SegmentationBackend() = default;

  // Output dimensions always equal the input frame's.
  virtual SegmentResult segment(const Frame& frame) = 0;
  virtual std::uint32_t num_classes() const = 0;
  virtual std::string backend_id() const = 0;
};

// Palette segmenter. With a cost model the reported inference time is the
// model's (virtual time); without one it is measured wall time.
class PaletteBackend final : public SegmentationBackend {
 public:
  PaletteBackend(ScenePalette palette, std::optional<CostModel> cost);

  SegmentResult segment(const Frame& frame) override;
  std::uint32_t num_classes() const override {
    return static_cast<std::uint32_t>(palette_.size());
  }
  std::string backend_id() const override { return "palette"; }

 private:
  ScenePalette palette_;
  std::optional<CostModel> cost_;
};

}  // namespace navp
