#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "navp/codec.hpp"
#include "navp/frame.hpp"

namespace navp {

// NAVP framing. Every message starts with a 22-byte header:
//   magic "NAVP" | version u8 (=1) | type u8 | frame_id u64 | timestamp_us u64
// followed by a type-specific body. All integers are big-endian.
inline constexpr std::size_t kHeaderSize = 22;
inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::uint16_t kDefaultPort = 47474;

enum class MessageType : std::uint8_t {
  kProbeReq = 0,
  kProbeResp = 1,
  kFrameReq = 2,
  kFrameResp = 3,
  kError = 4,
};

const char* to_string(MessageType type);

// width u32 | height u32 | quality u8 | codec_id u8 | payload_len u32 | payload
struct FrameRequestBody {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint8_t quality = 0;
  std::uint8_t codec_id = 0;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const FrameRequestBody&, const FrameRequestBody&) = default;
};

// Label encoding 0: one byte per pixel, row-major.
inline constexpr std::uint8_t kLabelsRaw = 0;

// width u32 | height u32 | num_classes u8 | encoding u8 | inference_time_us u64
// | payload_len u32 | payload
struct FrameResponseBody {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint8_t num_classes = 0;
  std::uint8_t encoding = kLabelsRaw;
  std::uint64_t inference_time_us = 0;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const FrameResponseBody&, const FrameResponseBody&) = default;
};

enum class WireErrorCode : std::uint16_t {
  kUndecodablePayload = 1,
  kBackendFailure = 2,
  kProtocolViolation = 3,
};

// code u16 | text_len u32 | UTF-8 text
struct ErrorBody {
  std::uint16_t code = 0;
  std::string text;

  friend bool operator==(const ErrorBody&, const ErrorBody&) = default;
};

struct WireMessage {
  MessageType type = MessageType::kProbeReq;
  std::uint64_t frame_id = 0;
  std::uint64_t timestamp_us = 0;
  std::variant<std::monostate, FrameRequestBody, FrameResponseBody, ErrorBody> body;

  friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

std::vector<std::uint8_t> encode_message(const WireMessage& message);

// The buffer must hold exactly one message.
WireMessage decode_message(std::span<const std::uint8_t> bytes);

// Total length of the message starting at prefix, or nullopt while the
// prefix is too short to tell. Validates magic, version and type as soon as
// those bytes are present.
std::optional<std::size_t> message_length(std::span<const std::uint8_t> prefix);

WireMessage make_probe_request(std::uint64_t probe_id, std::uint64_t timestamp_us);
WireMessage make_probe_response(const WireMessage& request);
WireMessage make_frame_request(const EncodedFrame& frame, int quality,
                               std::uint64_t timestamp_us);
WireMessage make_frame_response(std::uint64_t frame_id, std::uint64_t timestamp_us,
                                const LabelMap& labels, std::uint64_t inference_time_us);
WireMessage make_error(std::uint64_t frame_id, std::uint64_t timestamp_us, WireErrorCode code,
                       std::string text);

EncodedFrame to_encoded_frame(const WireMessage& request);
LabelMap to_label_map(const WireMessage& response);

}  // namespace navp
