#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <mutex>
#include <string_view>
#include <vector>

namespace navp {

// Bounded FIFO of the most recent RTT samples (milliseconds).
class RttWindow {
 public:
  explicit RttWindow(std::size_t capacity = 5);

  // Rejects negative and non-finite samples; evicts the oldest when full.
  void push(double rtt_ms);

  // Arithmetic mean of the retained samples. Throws on an empty window.
  double mean() const;

  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return samples_.empty(); }
  std::vector<double> samples() const { return {samples_.begin(), samples_.end()}; }

 private:
  std::size_t capacity_;
  std::deque<double> samples_;
};

struct EncodingParams {
  int quality = 90;
  std::uint32_t max_resolution = 1920;
  std::uint32_t send_interval_ms = 80;
  int tier_index = 0;

  friend bool operator==(const EncodingParams&, const EncodingParams&) = default;
};

struct Tier {
  double rtt_threshold_ms = std::numeric_limits<double>::infinity();
  int quality = 90;
  std::uint32_t max_resolution = 1920;
  std::uint32_t send_interval_ms = 80;
};

// Ordered rows; a mean RTT selects the first row whose threshold it does not
// exceed. The last row must have an infinite threshold.
class TierTable {
 public:
  explicit TierTable(std::vector<Tier> tiers);

  //   <= 30 ms:  Q90, 1920 px,  80 ms
  //   <= 50 ms:  Q80, 1280 px, 100 ms
  //   <= 100 ms: Q65,  960 px, 150 ms
  //   <= 150 ms: Q50,  720 px, 250 ms
  //   >  150 ms: Q40,  480 px, 500 ms
  static TierTable standard();

  std::size_t size() const { return tiers_.size(); }
  const Tier& operator[](std::size_t i) const { return tiers_[i]; }
  EncodingParams params(std::size_t tier_index) const;

  // Inclusive comparison: mean == threshold stays in that row.
  std::size_t tier_for(double mean_rtt_ms) const;
  EncodingParams select(double mean_rtt_ms) const { return params(tier_for(mean_rtt_ms)); }

 private:
  std::vector<Tier> tiers_;
};

enum class Mode { kStatic, kAdaptive };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view name);

struct ControllerOptions {
  Mode mode = Mode::kAdaptive;
  std::size_t window = 5;
  // Moving to a better tier needs the mean to clear that tier's threshold by
  // this margin. Zero gives plain threshold selection.
  double hysteresis_ms = 0.0;
};

struct ControllerStep {
  EncodingParams params;
  bool tier_changed = false;
};

// Cold start is tier 0; static mode pins tier 0 while still validating and
// recording samples.
class Controller {
 public:
  Controller(TierTable table, ControllerOptions options);

  ControllerStep step(double rtt_ms);

  const EncodingParams& current() const { return current_; }
  const RttWindow& window() const { return window_; }
  const TierTable& table() const { return table_; }
  Mode mode() const { return options_.mode; }
  std::size_t tier_changes() const { return tier_changes_; }

 private:
  std::size_t choose_tier(double mean_rtt_ms) const;

  TierTable table_;
  ControllerOptions options_;
  RttWindow window_;
  EncodingParams current_;
  std::size_t tier_changes_ = 0;
};

// Mutex-guarded controller for the threaded client: one writer (the probe
// activity), any number of readers taking consistent snapshots.
class SharedController {
 public:
  SharedController(TierTable table, ControllerOptions options)
      : controller_(std::move(table), options) {}

  ControllerStep step(double rtt_ms) {
    std::lock_guard lock(mu_);
    return controller_.step(rtt_ms);
  }

  EncodingParams current() const {
    std::lock_guard lock(mu_);
    return controller_.current();
  }

  std::vector<double> window_samples() const {
    std::lock_guard lock(mu_);
    return controller_.window().samples();
  }

 private:
  mutable std::mutex mu_;
  Controller controller_;
};

}  // namespace navp
