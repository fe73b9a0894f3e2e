#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "navp/frame.hpp"

namespace navp {

// Values are part of the NAVP wire format.
enum class CodecId : std::uint8_t { kRaw = 0, kJpeg = 1, kQuant = 2 };

std::string_view to_string(CodecId id);
CodecId parse_codec(std::string_view name);
CodecId codec_from_wire(std::uint8_t value);

struct EncodedFrame {
  std::uint64_t frame_index = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  CodecId codec = CodecId::kRaw;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const EncodedFrame&, const EncodedFrame&) = default;
};

// Aspect-preserving box-filter downscale so that max(width, height) <= max_dim.
// Frames already within the bound are returned unchanged.
Frame resize_max(const Frame& frame, std::uint32_t max_dim);

// Output size of resize_max without touching pixels.
std::pair<std::uint32_t, std::uint32_t> fitted_size(std::uint32_t width, std::uint32_t height,
                                                    std::uint32_t max_dim);

// QUANT step for a quality in 1..100: 1 + floor((100 - q) / 10).
std::uint32_t quant_step(int quality);

// round(v / step) * step, clamped to 255; halves round up.
std::uint8_t quantize(std::uint8_t value, std::uint32_t step);

EncodedFrame encode(const Frame& frame, int quality, CodecId codec);
Frame decode(const EncodedFrame& encoded);

bool jpeg_available();

}  // namespace navp
