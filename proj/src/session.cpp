#include "navp/session.hpp"

#include <algorithm>
#include <map>

#include "navp/error.hpp"

namespace navp {

std::string_view to_string(RttFeed feed) {
  switch (feed) {
    case RttFeed::kProbe: return "probe";
    case RttFeed::kFrame: return "frame";
    case RttFeed::kBoth: return "both";
  }
  return "probe";
}

RttFeed parse_rtt_feed(std::string_view name) {
  if (name == "probe") return RttFeed::kProbe;
  if (name == "frame") return RttFeed::kFrame;
  if (name == "both") return RttFeed::kBoth;
  throw Error(ErrorCode::kInvalidArgument, "rtt feed must be probe, frame or both");
}

void SessionConfig::validate() const {
  if (frames == 0) throw Error(ErrorCode::kInvalidArgument, "frames must be >= 1");
  if (width < 16 || height < 16)
    throw Error(ErrorCode::kDimensionTooSmall, "capture size must be at least 16x16");
  if (num_shapes == 0) throw Error(ErrorCode::kInvalidArgument, "num_shapes must be >= 1");
  if (probe_interval_us <= 0)
    throw Error(ErrorCode::kInvalidArgument, "probe interval must be positive");
  if (pipeline_cap == 0) throw Error(ErrorCode::kInvalidArgument, "pipeline cap must be >= 1");
  if (window == 0) throw Error(ErrorCode::kInvalidArgument, "window must be >= 1");
  if (codec == CodecId::kJpeg && !jpeg_available())
    throw Error(ErrorCode::kUnknownCodec, "built without JPEG support");
}

ServerSession::ServerSession(SegmentationBackend& backend, ServerOptions options)
    : backend_(backend), options_(options) {}

std::optional<ServerReply> ServerSession::handle(std::span<const std::uint8_t> bytes,
                                                 Micros arrival) {
  WireMessage message;
  try {
    message = decode_message(bytes);
  } catch (const Error& e) {
    ++errors_sent_;
    return ServerReply{make_error(0, 0, WireErrorCode::kProtocolViolation, e.what()), arrival};
  }
  return handle(message, arrival);
}

std::optional<ServerReply> ServerSession::handle(const WireMessage& message, Micros arrival) {
  if (message.type == MessageType::kProbeReq)
    return ServerReply{make_probe_response(message), arrival};
  if (message.type != MessageType::kFrameReq) {
    ++errors_sent_;
    return ServerReply{make_error(message.frame_id, message.timestamp_us,
                                  WireErrorCode::kProtocolViolation,
                                  std::string("server does not accept ") +
                                      to_string(message.type)),
                       arrival};
  }

  std::optional<Frame> frame;
  try {
    frame = decode(to_encoded_frame(message));
  } catch (const Error& e) {
    ++errors_sent_;
    return ServerReply{make_error(message.frame_id, message.timestamp_us,
                                  WireErrorCode::kUndecodablePayload, e.what()),
                       arrival};
  }

  SegmentResult seg = [&]() -> SegmentResult {
    try {
      return backend_.segment(*frame);
    } catch (const std::exception&) {
      return {LabelMap(1, 1, {0}, 1), -1};
    }
  }();
  if (seg.inference_time < 0) {
    ++errors_sent_;
    return ServerReply{make_error(message.frame_id, message.timestamp_us,
                                  WireErrorCode::kBackendFailure, "segmentation failed"),
                       arrival};
  }

  const Micros start =
      options_.serialize_inference ? std::max(arrival, busy_until_) : arrival;
  const Micros done = start + seg.inference_time;
  busy_until_ = done;
  ++frames_served_;
  return ServerReply{make_frame_response(message.frame_id, message.timestamp_us, seg.labels,
                                         static_cast<std::uint64_t>(seg.inference_time)),
                     done};
}

FramePipeline::FramePipeline(const SessionConfig& config)
    : config_(config),
      source_(config.seed, config.width, config.height, config.palette, config.num_shapes) {}

PreparedFrame FramePipeline::prepare(std::uint64_t frame_index, const EncodingParams& params,
                                     Micros now) {
  const Frame pristine = source_.capture(frame_index);
  PreparedFrame out;
  out.pending.frame_id = frame_index;
  out.pending.tier = params.tier_index;
  out.pending.sent_at = now;
  out.pending.full_width = pristine.width();
  out.pending.full_height = pristine.height();
  if (config_.measure_fidelity)
    out.pending.reference =
        std::make_shared<const LabelMap>(palette_segment(pristine, config_.palette));
  const EncodedFrame enc =
      encode(resize_max(pristine, params.max_resolution), params.quality, config_.codec);
  out.pending.bytes = enc.payload.size();
  out.wire = encode_message(
      make_frame_request(enc, params.quality, static_cast<std::uint64_t>(now)));
  return out;
}

FrameRecord FramePipeline::score(const PendingFrame& pending, const LabelMap& labels,
                                 Micros rtt, Micros inference) const {
  FrameRecord r;
  r.frame_id = pending.frame_id;
  r.tier = pending.tier;
  r.sent_us = pending.sent_at;
  r.rtt_us = rtt;
  r.infer_us = inference;
  r.bytes = pending.bytes;
  if (pending.reference) {
    const LabelMap full = upscale_labels(labels, pending.full_width, pending.full_height);
    r.ssim = ssim_labels(*pending.reference, full);
    r.bf = bf_score(*pending.reference, full);
  }
  return r;
}

namespace {

class VirtualClient {
 public:
  VirtualClient(const SessionConfig& config, VirtualClock& clock, SessionResult& result)
      : config_(config),
        clock_(clock),
        result_(result),
        pipeline_(config),
        controller_(config.tiers, {config.mode, config.window, config.hysteresis_ms}) {}

  void start() {
    if (config_.mode == Mode::kAdaptive) clock_.schedule(0, [this] { probe_tick(); });
    clock_.schedule(0, [this] { capture_tick(); });
  }

  void set_sender(std::function<void(std::vector<std::uint8_t>)> send) {
    send_ = std::move(send);
  }

  void on_message(std::span<const std::uint8_t> bytes) {
    WireMessage m;
    try {
      m = decode_message(bytes);
    } catch (const Error&) {
      ++result_.protocol_errors;
      return;
    }
    switch (m.type) {
      case MessageType::kProbeResp:
        on_probe(m);
        break;
      case MessageType::kFrameResp:
        on_frame(m);
        break;
      case MessageType::kError: {
        if (outstanding_.erase(m.frame_id) == 0) ++result_.protocol_errors;
        else ++result_.errors;
        maybe_finish();
        break;
      }
      default:
        ++result_.protocol_errors;
    }
  }

  bool done() const { return done_; }

  void abort() {
    if (done_) return;
    result_.partial = true;
    finish();
  }

 private:
  void probe_tick() {
    if (done_) return;
    send(encode_message(
        make_probe_request(next_probe_id_++, static_cast<std::uint64_t>(clock_.now()))));
    clock_.schedule_after(config_.probe_interval_us, [this] { probe_tick(); });
  }

  void capture_tick() {
    if (done_ || result_.frames_sent >= config_.frames) return;
    const EncodingParams params = controller_.current();
    const Micros interval = static_cast<Micros>(params.send_interval_ms) * 1000;
    if (outstanding_.size() >= config_.pipeline_cap) {
      ++result_.skipped_ticks;
    } else {
      PreparedFrame f = pipeline_.prepare(result_.frames_sent, params, clock_.now());
      outstanding_.emplace(f.pending.frame_id, std::move(f.pending));
      ++result_.frames_sent;
      send(std::move(f.wire));
      if (done_) return;
    }
    if (result_.frames_sent < config_.frames)
      clock_.schedule_after(interval, [this] { capture_tick(); });
  }

  void on_probe(const WireMessage& m) {
    const double rtt_ms =
        static_cast<double>(clock_.now() - static_cast<Micros>(m.timestamp_us)) / 1000.0;
    result_.probe_rtts_ms.push_back(rtt_ms);
    if (config_.rtt_feed != RttFeed::kFrame) feed(rtt_ms);
  }

  void on_frame(const WireMessage& m) {
    auto it = outstanding_.find(m.frame_id);
    if (it == outstanding_.end()) {
      ++result_.protocol_errors;
      return;
    }
    const PendingFrame pending = std::move(it->second);
    outstanding_.erase(it);
    try {
      const LabelMap labels = to_label_map(m);
      const auto& body = std::get<FrameResponseBody>(m.body);
      const Micros rtt = clock_.now() - pending.sent_at;
      result_.records.push_back(pipeline_.score(
          pending, labels, rtt, static_cast<Micros>(body.inference_time_us)));
      if (config_.rtt_feed != RttFeed::kProbe) feed(static_cast<double>(rtt) / 1000.0);
    } catch (const Error&) {
      ++result_.protocol_errors;
    }
    maybe_finish();
  }

  void feed(double rtt_ms) {
    const int before = controller_.current().tier_index;
    const ControllerStep step = controller_.step(rtt_ms);
    if (step.tier_changed)
      result_.tier_changes.push_back({clock_.now(), before, step.params.tier_index});
  }

  void send(std::vector<std::uint8_t> bytes) {
    try {
      send_(std::move(bytes));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kChannelClosed) throw;
      abort();
    }
  }

  void maybe_finish() {
    if (result_.frames_sent >= config_.frames && outstanding_.empty()) finish();
  }

  void finish() {
    if (done_) return;
    done_ = true;
    result_.duration_us = clock_.now();
    clock_.stop();
  }

  const SessionConfig& config_;
  VirtualClock& clock_;
  SessionResult& result_;
  FramePipeline pipeline_;
  Controller controller_;
  std::map<std::uint64_t, PendingFrame> outstanding_;
  std::function<void(std::vector<std::uint8_t>)> send_;
  std::uint64_t next_probe_id_ = 0;
  bool done_ = false;
};

}  // namespace

namespace {

// Glue between the client, the channel and the server on one clock.
class VirtualNetwork {
 public:
  VirtualNetwork(VirtualClock& clock, Channel& channel, ServerSession& server,
                 VirtualClient& client)
      : clock_(clock), channel_(channel), server_(server), client_(client) {}

  void send(Direction direction, std::vector<std::uint8_t> bytes) {
    const ChannelEvent ev = channel_.send(direction, std::move(bytes), clock_.now());
    clock_.schedule(ev.deliver_time, [this] { deliver_due(); });
  }

 private:
  void deliver_due() {
    for (Delivery& d : channel_.advance_until(clock_.now())) {
      if (d.event.direction == Direction::kDownlink) {
        client_.on_message(d.bytes);
        continue;
      }
      auto reply = server_.handle(d.bytes, clock_.now());
      if (!reply) continue;
      auto bytes = std::make_shared<std::vector<std::uint8_t>>(encode_message(reply->message));
      clock_.schedule(reply->send_at, [this, bytes] {
        if (client_.done()) return;
        try {
          send(Direction::kDownlink, std::move(*bytes));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kChannelClosed) throw;
          client_.abort();
        }
      });
    }
  }

  VirtualClock& clock_;
  Channel& channel_;
  ServerSession& server_;
  VirtualClient& client_;
};

}  // namespace

VirtualRun run_virtual_session(const SessionConfig& config, const NetworkScenario& scenario,
                               const VirtualRunOptions& options) {
  config.validate();
  VirtualRun run;
  VirtualClock clock;
  const std::uint64_t channel_seed =
      options.channel_seed != 0 ? options.channel_seed : mix_seed(config.seed, 0xC4A7);
  Channel channel(scenario, options.link, channel_seed);
  PaletteBackend backend(config.palette, options.cost);
  ServerSession server(backend, options.server);
  VirtualClient client(config, clock, run.result);
  VirtualNetwork network(clock, channel, server, client);
  client.set_sender([&](std::vector<std::uint8_t> bytes) {
    network.send(Direction::kUplink, std::move(bytes));
  });
  if (options.close_channel_at)
    clock.schedule(*options.close_channel_at, [&] { channel.close(); });

  client.start();
  clock.run();
  if (!client.done()) {
    // Queue drained without completing: only possible once the channel closed.
    client.abort();
  }
  run.trace = channel.trace();
  return run;
}

}  // namespace navp
