#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "navp/channel.hpp"
#include "navp/codec.hpp"
#include "navp/control.hpp"
#include "navp/frame.hpp"
#include "navp/metrics.hpp"
#include "navp/segmentation.hpp"
#include "navp/wire.hpp"

namespace navp {

// Which RTT measurements feed the controller window.
enum class RttFeed { kProbe, kFrame, kBoth };

std::string_view to_string(RttFeed feed);
RttFeed parse_rtt_feed(std::string_view name);

struct SessionConfig {
  Mode mode = Mode::kAdaptive;
  std::uint64_t frames = 200;
  std::uint64_t seed = 1;
  std::uint32_t width = 1920;
  std::uint32_t height = 1080;
  std::uint32_t num_shapes = 6;
  CodecId codec = CodecId::kQuant;
  Micros probe_interval_us = 250'000;
  std::size_t pipeline_cap = 4;
  TierTable tiers = TierTable::standard();
  std::size_t window = 5;
  double hysteresis_ms = 0.0;
  RttFeed rtt_feed = RttFeed::kProbe;
  bool measure_fidelity = true;
  ScenePalette palette = ScenePalette::standard();

  void validate() const;
};

struct TierChange {
  Micros at = 0;
  int from = 0;
  int to = 0;
};

struct SessionResult {
  std::vector<FrameRecord> records;
  std::vector<double> probe_rtts_ms;
  std::vector<TierChange> tier_changes;
  std::size_t frames_sent = 0;
  std::size_t errors = 0;           // ERROR replies
  std::size_t protocol_errors = 0;  // unexpected or undecodable replies
  std::size_t skipped_ticks = 0;    // capture ticks dropped at the pipelining cap
  bool partial = false;             // channel closed before all frames completed
  Micros duration_us = 0;
};

struct ServerReply {
  WireMessage message;
  Micros send_at = 0;
};

struct ServerOptions {
  // When set, frames wait for the previous inference to finish; otherwise
  // each reply leaves at arrival + inference time.
  bool serialize_inference = false;
};

// Transport-independent request handler. Probes are answered at arrival
// time; frames are decoded, segmented, and answered after the backend's
// inference time. Undecodable frames get an ERROR with the request id.
class ServerSession {
 public:
  explicit ServerSession(SegmentationBackend& backend, ServerOptions options = {});

  std::optional<ServerReply> handle(std::span<const std::uint8_t> bytes, Micros arrival);
  std::optional<ServerReply> handle(const WireMessage& message, Micros arrival);

  std::size_t frames_served() const { return frames_served_; }
  std::size_t errors_sent() const { return errors_sent_; }

 private:
  SegmentationBackend& backend_;
  ServerOptions options_;
  Micros busy_until_ = 0;
  std::size_t frames_served_ = 0;
  std::size_t errors_sent_ = 0;
};

// A frame in flight, with what the client needs to score the response.
struct PendingFrame {
  std::uint64_t frame_id = 0;
  int tier = 0;
  Micros sent_at = 0;
  std::uint64_t bytes = 0;
  std::uint32_t full_width = 0;
  std::uint32_t full_height = 0;
  std::shared_ptr<const LabelMap> reference;  // null when fidelity is off
};

struct PreparedFrame {
  PendingFrame pending;
  std::vector<std::uint8_t> wire;
};

// Capture, reference segmentation, downscale, and encoding of one frame.
class FramePipeline {
 public:
  explicit FramePipeline(const SessionConfig& config);

  PreparedFrame prepare(std::uint64_t frame_index, const EncodingParams& params,
                        Micros now);

  // Upscales the returned labels to capture size and scores them against
  // the full-resolution reference.
  FrameRecord score(const PendingFrame& pending, const LabelMap& labels, Micros rtt,
                    Micros inference) const;

 private:
  const SessionConfig& config_;
  SyntheticSource source_;
};

struct VirtualRunOptions {
  LinkOptions link;
  ServerOptions server;
  CostModel cost = CostModel::calibrated();
  std::optional<Micros> close_channel_at;
  std::uint64_t channel_seed = 0;  // 0: derived from config.seed
};

struct VirtualRun {
  SessionResult result;
  std::vector<ChannelEvent> trace;
};

// Client, channel and server on one discrete-event loop.
VirtualRun run_virtual_session(const SessionConfig& config, const NetworkScenario& scenario,
                               const VirtualRunOptions& options = {});

}  // namespace navp
