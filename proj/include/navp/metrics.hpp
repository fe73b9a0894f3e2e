#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "navp/channel.hpp"
#include "navp/frame.hpp"

namespace navp {

struct GrayImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> values;
};

// Class i becomes grey level round(255 * i / (num_classes - 1)).
GrayImage render_labels(const LabelMap& map, std::uint32_t num_classes);

// Mean SSIM over all 8x8 windows at stride 1 (smaller images use one
// window of the image size), uniform weights, C1 = (0.01*255)^2,
// C2 = (0.03*255)^2, population variances.
double ssim(const GrayImage& reference, const GrayImage& test);

// SSIM of two label maps rendered with the reference's class count.
double ssim_labels(const LabelMap& reference, const LabelMap& test);

// round(0.0075 * diagonal), at least 1.
std::uint32_t default_bf_tolerance(std::uint32_t width, std::uint32_t height);

// Boundary F1 averaged over the classes present in either map. A pixel is on
// the boundary of its class when a 4-neighbour carries another label; a
// boundary pixel matches when a same-class boundary pixel of the other map
// lies within `tolerance` (Euclidean). A class whose boundary is empty in
// both maps scores 1, in only one map 0.
double bf_score(const LabelMap& reference, const LabelMap& test, std::uint32_t tolerance);
double bf_score(const LabelMap& reference, const LabelMap& test);

// Nearest-neighbour enlargement: target (x, y) reads source
// (floor(x * w / target_w), floor(y * h / target_h)).
LabelMap upscale_labels(const LabelMap& map, std::uint32_t target_width,
                        std::uint32_t target_height);

struct FrameRecord {
  std::uint64_t frame_id = 0;
  int tier = 0;
  Micros sent_us = 0;
  Micros rtt_us = 0;
  Micros infer_us = 0;
  std::uint64_t bytes = 0;  // uplink payload size
  double ssim = 0.0;
  double bf = 0.0;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct RunSummary {
  std::string scenario;
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t frames = 0;
  double rtt_mean_ms = 0.0;
  double rtt_median_ms = 0.0;
  double rtt_p95_ms = 0.0;
  double inference_mean_ms = 0.0;
  double ssim_mean = 0.0;
  double bf_mean = 0.0;
  double bytes_mean = 0.0;
  std::vector<std::size_t> tier_histogram;
  std::size_t errors = 0;
  std::size_t skipped_ticks = 0;
  Micros duration_us = 0;
};

// Aggregates over completed frames: lower median, nearest-rank p95.
// Throws kEmptyRun on an empty record list.
RunSummary summarize(const std::vector<FrameRecord>& records);

Micros lower_median(std::vector<Micros> values);
Micros nearest_rank(std::vector<Micros> values, double fraction);

inline constexpr const char* kCsvHeader = "frame_id,tier,sent_us,rtt_us,infer_us,bytes,ssim,bf";

void write_csv(std::ostream& out, const std::vector<FrameRecord>& records);
std::vector<FrameRecord> read_csv(std::istream& in);

std::string summary_to_json(const RunSummary& summary);
RunSummary summary_from_json(const std::string& text);

}  // namespace navp
