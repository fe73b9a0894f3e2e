#include "navp/wire.hpp"

#include <cstring>

#include "navp/error.hpp"

namespace navp {

const char* to_string(MessageType type) {
  switch (type) {
    case MessageType::kProbeReq: return "PROBE_REQ";
    case MessageType::kProbeResp: return "PROBE_RESP";
    case MessageType::kFrameReq: return "FRAME_REQ";
    case MessageType::kFrameResp: return "FRAME_RESP";
    case MessageType::kError: return "ERROR";
  }
  return "UNKNOWN";
}

namespace {

constexpr std::uint8_t kMagic[4] = {'N', 'A', 'V', 'P'};
constexpr std::size_t kFrameReqFixed = 14;
constexpr std::size_t kFrameRespFixed = 22;
constexpr std::size_t kErrorFixed = 6;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { be(v, 2); }
  void u32(std::uint32_t v) { be(v, 4); }
  void u64(std::uint64_t v) { be(v, 8); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void be(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(be(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(be(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(be(4)); }
  std::uint64_t u64() { return be(8); }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(ErrorCode::kTruncation, "message truncated");
  }
  std::uint64_t be(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
         (std::uint32_t(b[at + 2]) << 8) | b[at + 3];
}

void check_prefix(std::span<const std::uint8_t> b) {
  const std::size_t n = std::min<std::size_t>(b.size(), 4);
  if (std::memcmp(b.data(), kMagic, n) != 0) throw Error(ErrorCode::kBadMagic, "bad magic");
  if (b.size() > 4 && b[4] != kProtocolVersion)
    throw Error(ErrorCode::kBadVersion, "unsupported protocol version " + std::to_string(b[4]));
  if (b.size() > 5 && b[5] > static_cast<std::uint8_t>(MessageType::kError))
    throw Error(ErrorCode::kUnknownType, "unknown message type " + std::to_string(b[5]));
}

}  // namespace

std::vector<std::uint8_t> encode_message(const WireMessage& m) {
  Writer w;
  w.bytes(kMagic);
  w.u8(kProtocolVersion);
  w.u8(static_cast<std::uint8_t>(m.type));
  w.u64(m.frame_id);
  w.u64(m.timestamp_us);
  switch (m.type) {
    case MessageType::kProbeReq:
    case MessageType::kProbeResp:
      if (!std::holds_alternative<std::monostate>(m.body))
        throw Error(ErrorCode::kInvalidArgument, "probe messages carry no body");
      break;
    case MessageType::kFrameReq: {
      const auto* b = std::get_if<FrameRequestBody>(&m.body);
      if (!b) throw Error(ErrorCode::kInvalidArgument, "FRAME_REQ needs a frame body");
      w.u32(b->width);
      w.u32(b->height);
      w.u8(b->quality);
      w.u8(b->codec_id);
      w.u32(static_cast<std::uint32_t>(b->payload.size()));
      w.bytes(b->payload);
      break;
    }
    case MessageType::kFrameResp: {
      const auto* b = std::get_if<FrameResponseBody>(&m.body);
      if (!b) throw Error(ErrorCode::kInvalidArgument, "FRAME_RESP needs a label body");
      w.u32(b->width);
      w.u32(b->height);
      w.u8(b->num_classes);
      w.u8(b->encoding);
      w.u64(b->inference_time_us);
      w.u32(static_cast<std::uint32_t>(b->payload.size()));
      w.bytes(b->payload);
      break;
    }
    case MessageType::kError: {
      const auto* b = std::get_if<ErrorBody>(&m.body);
      if (!b) throw Error(ErrorCode::kInvalidArgument, "ERROR needs an error body");
      w.u16(b->code);
      w.u32(static_cast<std::uint32_t>(b->text.size()));
      w.bytes({reinterpret_cast<const std::uint8_t*>(b->text.data()), b->text.size()});
      break;
    }
    default:
      throw Error(ErrorCode::kUnknownType, "unknown message type");
  }
  return w.take();
}

std::optional<std::size_t> message_length(std::span<const std::uint8_t> b) {
  check_prefix(b);
  if (b.size() < kHeaderSize) return std::nullopt;
  switch (static_cast<MessageType>(b[5])) {
    case MessageType::kProbeReq:
    case MessageType::kProbeResp:
      return kHeaderSize;
    case MessageType::kFrameReq:
      if (b.size() < kHeaderSize + kFrameReqFixed) return std::nullopt;
      return kHeaderSize + kFrameReqFixed + read_be32(b, kHeaderSize + 10);
    case MessageType::kFrameResp:
      if (b.size() < kHeaderSize + kFrameRespFixed) return std::nullopt;
      return kHeaderSize + kFrameRespFixed + read_be32(b, kHeaderSize + 18);
    case MessageType::kError:
      if (b.size() < kHeaderSize + kErrorFixed) return std::nullopt;
      return kHeaderSize + kErrorFixed + read_be32(b, kHeaderSize + 2);
  }
  throw Error(ErrorCode::kUnknownType, "unknown message type");
}

WireMessage decode_message(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) {
    check_prefix(bytes);
    throw Error(ErrorCode::kTruncation, "message shorter than the header");
  }
  check_prefix(bytes);
  Reader r(bytes);
  r.bytes(4);
  r.u8();
  WireMessage m;
  m.type = static_cast<MessageType>(r.u8());
  m.frame_id = r.u64();
  m.timestamp_us = r.u64();
  switch (m.type) {
    case MessageType::kProbeReq:
    case MessageType::kProbeResp:
      break;
    case MessageType::kFrameReq: {
      FrameRequestBody b;
      b.width = r.u32();
      b.height = r.u32();
      b.quality = r.u8();
      b.codec_id = r.u8();
      const std::uint32_t len = r.u32();
      const auto payload = r.bytes(len);
      b.payload.assign(payload.begin(), payload.end());
      m.body = std::move(b);
      break;
    }
    case MessageType::kFrameResp: {
      FrameResponseBody b;
      b.width = r.u32();
      b.height = r.u32();
      b.num_classes = r.u8();
      b.encoding = r.u8();
      b.inference_time_us = r.u64();
      const std::uint32_t len = r.u32();
      const auto payload = r.bytes(len);
      b.payload.assign(payload.begin(), payload.end());
      m.body = std::move(b);
      break;
    }
    case MessageType::kError: {
      ErrorBody b;
      b.code = r.u16();
      const std::uint32_t len = r.u32();
      const auto text = r.bytes(len);
      b.text.assign(text.begin(), text.end());
      m.body = std::move(b);
      break;
    }
  }
  if (r.remaining() != 0)
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(r.remaining()) + " trailing bytes after message");
  return m;
}

WireMessage make_probe_request(std::uint64_t probe_id, std::uint64_t timestamp_us) {
  return {MessageType::kProbeReq, probe_id, timestamp_us, {}};
}

WireMessage make_probe_response(const WireMessage& request) {
  return {MessageType::kProbeResp, request.frame_id, request.timestamp_us, {}};
}

WireMessage make_frame_request(const EncodedFrame& frame, int quality,
                               std::uint64_t timestamp_us) {
  FrameRequestBody b{frame.width, frame.height, static_cast<std::uint8_t>(quality),
                     static_cast<std::uint8_t>(frame.codec), frame.payload};
  return {MessageType::kFrameReq, frame.frame_index, timestamp_us, std::move(b)};
}

WireMessage make_frame_response(std::uint64_t frame_id, std::uint64_t timestamp_us,
                                const LabelMap& labels, std::uint64_t inference_time_us) {
  FrameResponseBody b;
  b.width = labels.width();
  b.height = labels.height();
  b.num_classes = static_cast<std::uint8_t>(labels.num_classes());
  b.encoding = kLabelsRaw;
  b.inference_time_us = inference_time_us;
  b.payload.assign(labels.labels().begin(), labels.labels().end());
  return {MessageType::kFrameResp, frame_id, timestamp_us, std::move(b)};
}

WireMessage make_error(std::uint64_t frame_id, std::uint64_t timestamp_us, WireErrorCode code,
                       std::string text) {
  return {MessageType::kError, frame_id, timestamp_us,
          ErrorBody{static_cast<std::uint16_t>(code), std::move(text)}};
}

EncodedFrame to_encoded_frame(const WireMessage& request) {
  const auto* b = std::get_if<FrameRequestBody>(&request.body);
  if (request.type != MessageType::kFrameReq || !b)
    throw Error(ErrorCode::kProtocol, "not a FRAME_REQ");
  return {request.frame_id, b->width, b->height, codec_from_wire(b->codec_id), b->payload};
}

LabelMap to_label_map(const WireMessage& response) {
  const auto* b = std::get_if<FrameResponseBody>(&response.body);
  if (response.type != MessageType::kFrameResp || !b)
    throw Error(ErrorCode::kProtocol, "not a FRAME_RESP");
  if (b->encoding != kLabelsRaw)
    throw Error(ErrorCode::kProtocol, "unsupported label encoding " + std::to_string(b->encoding));
  if (b->width == 0 || b->height == 0 ||
      b->payload.size() != static_cast<std::size_t>(b->width) * b->height)
    throw Error(ErrorCode::kProtocol, "label payload does not match dimensions");
  if (b->num_classes == 0) throw Error(ErrorCode::kProtocol, "num_classes must be >= 1");
  for (std::uint8_t label : b->payload)
    if (label >= b->num_classes) throw Error(ErrorCode::kProtocol, "label exceeds num_classes");
  return LabelMap(b->width, b->height, b->payload, b->num_classes);
}

}  // namespace navp
