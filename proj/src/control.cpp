#include "navp/control.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "navp/error.hpp"

namespace navp {

RttWindow::RttWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(ErrorCode::kInvalidArgument, "window capacity must be >= 1");
}

void RttWindow::push(double rtt_ms) {
  if (!std::isfinite(rtt_ms) || rtt_ms < 0.0)
    throw Error(ErrorCode::kInvalidArgument, "RTT sample must be finite and non-negative");
  samples_.push_back(rtt_ms);
  if (samples_.size() > capacity_) samples_.pop_front();
}

double RttWindow::mean() const {
  if (samples_.empty()) throw Error(ErrorCode::kEmptyWindow, "mean of an empty RTT window");
  return std::accumulate(samples_.begin(), samples_.end(), 0.0) /
         static_cast<double>(samples_.size());
}

TierTable::TierTable(std::vector<Tier> tiers) : tiers_(std::move(tiers)) {
  if (tiers_.empty()) throw Error(ErrorCode::kInvalidArgument, "tier table is empty");
  if (!std::isinf(tiers_.back().rtt_threshold_ms))
    throw Error(ErrorCode::kInvalidArgument, "last tier must catch all RTTs");
  for (std::size_t i = 0; i < tiers_.size(); ++i) {
    const Tier& t = tiers_[i];
    if (t.quality < 1 || t.quality > 100)
      throw Error(ErrorCode::kInvalidArgument, "tier quality outside 1..100");
    if (t.max_resolution < 16)
      throw Error(ErrorCode::kInvalidArgument, "tier resolution below 16 px");
    if (t.send_interval_ms == 0)
      throw Error(ErrorCode::kInvalidArgument, "tier send interval must be positive");
    if (i == 0) continue;
    const Tier& prev = tiers_[i - 1];
    if (!(t.rtt_threshold_ms > prev.rtt_threshold_ms))
      throw Error(ErrorCode::kInvalidArgument, "tier thresholds must strictly increase");
    if (t.quality > prev.quality || t.max_resolution > prev.max_resolution ||
        t.send_interval_ms < prev.send_interval_ms)
      throw Error(ErrorCode::kInvalidArgument,
                  "tiers must degrade monotonically down the table (row " +
                      std::to_string(i) + ")");
  }
}

TierTable TierTable::standard() {
  const double inf = std::numeric_limits<double>::infinity();
  return TierTable({
      {30.0, 90, 1920, 80},
      {50.0, 80, 1280, 100},
      {100.0, 65, 960, 150},
      {150.0, 50, 720, 250},
      {inf, 40, 480, 500},
  });
}

EncodingParams TierTable::params(std::size_t tier_index) const {
  if (tier_index >= tiers_.size())
    throw Error(ErrorCode::kInvalidArgument, "tier index out of range");
  const Tier& t = tiers_[tier_index];
  return {t.quality, t.max_resolution, t.send_interval_ms, static_cast<int>(tier_index)};
}

std::size_t TierTable::tier_for(double mean_rtt_ms) const {
  for (std::size_t i = 0; i < tiers_.size(); ++i)
    if (mean_rtt_ms <= tiers_[i].rtt_threshold_ms) return i;
  return tiers_.size() - 1;
}

std::string_view to_string(Mode mode) {
  return mode == Mode::kStatic ? "static" : "adaptive";
}

Mode parse_mode(std::string_view name) {
  if (name == "static") return Mode::kStatic;
  if (name == "adaptive") return Mode::kAdaptive;
  throw Error(ErrorCode::kInvalidArgument, "mode must be 'static' or 'adaptive'");
}

Controller::Controller(TierTable table, ControllerOptions options)
    : table_(std::move(table)),
      options_(options),
      window_(options.window),
      current_(table_.params(0)) {
  if (!(options_.hysteresis_ms >= 0.0))
    throw Error(ErrorCode::kInvalidArgument, "hysteresis must be >= 0");
}

std::size_t Controller::choose_tier(double mean_rtt_ms) const {
  const std::size_t candidate = table_.tier_for(mean_rtt_ms);
  const auto held = static_cast<std::size_t>(current_.tier_index);
  if (candidate >= held || options_.hysteresis_ms == 0.0) return candidate;
  for (std::size_t t = candidate; t < held; ++t)
    if (mean_rtt_ms <= table_[t].rtt_threshold_ms - options_.hysteresis_ms) return t;
  return held;
}

ControllerStep Controller::step(double rtt_ms) {
  window_.push(rtt_ms);
  const std::size_t tier =
      options_.mode == Mode::kStatic ? 0 : choose_tier(window_.mean());
  const bool changed = static_cast<int>(tier) != current_.tier_index;
  current_ = table_.params(tier);
  if (changed) ++tier_changes_;
  return {current_, changed};
}

}  // namespace navp
