#include <doctest.h>

#include <string>

#include "helpers.hpp"
#include "navp/rng.hpp"
#include "navp/wire.hpp"

using namespace navp;

namespace {

const std::filesystem::path kGolden = NAVP_GOLDEN_DIR;

std::vector<std::uint8_t> golden(const std::string& name) {
  const auto bytes = navp::test::read_bytes(kGolden / (name + ".bin"));
  REQUIRE_MESSAGE(!bytes.empty(), "missing golden file " << name);
  return bytes;
}

WireMessage random_message(Rng& rng) {
  WireMessage m;
  m.type = static_cast<MessageType>(rng.below(5));
  m.frame_id = rng.next();
  m.timestamp_us = rng.next();
  const auto blob = [&rng](std::size_t max) {
    std::vector<std::uint8_t> v(rng.below(max + 1));
    for (auto& b : v) b = static_cast<std::uint8_t>(rng.below(256));
    return v;
  };
  switch (m.type) {
    case MessageType::kFrameReq:
      m.body = FrameRequestBody{static_cast<std::uint32_t>(rng.next()),
                                static_cast<std::uint32_t>(rng.next()),
                                static_cast<std::uint8_t>(rng.below(256)),
                                static_cast<std::uint8_t>(rng.below(256)), blob(3000)};
      break;
    case MessageType::kFrameResp:
      m.body = FrameResponseBody{static_cast<std::uint32_t>(rng.next()),
                                 static_cast<std::uint32_t>(rng.next()),
                                 static_cast<std::uint8_t>(rng.below(256)),
                                 static_cast<std::uint8_t>(rng.below(256)), rng.next(),
                                 blob(3000)};
      break;
    case MessageType::kError: {
      const auto text = blob(200);
      m.body = ErrorBody{static_cast<std::uint16_t>(rng.below(65536)),
                         std::string(text.begin(), text.end())};
      break;
    }
    default:
      break;
  }
  return m;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
         (std::uint32_t(b[at + 2]) << 8) | b[at + 3];
}

}  // namespace

TEST_CASE("probe request layout is byte-exact") {
  const auto bytes = encode_message(make_probe_request(1, 0));
  const std::vector<std::uint8_t> expected = {0x4E, 0x41, 0x56, 0x50, 0x01, 0x00, 0, 0, 0, 0, 0,
                                              0,    0,    1,    0,    0,    0,    0, 0, 0, 0, 0};
  CHECK(bytes == expected);
  CHECK(message_length(bytes) == 22);
}

TEST_CASE("frame request layout") {
  EncodedFrame e{5, 640, 360, CodecId::kQuant, {9, 8, 7}};
  const auto b = encode_message(make_frame_request(e, 60, 0x0102030405060708ULL));
  REQUIRE(b.size() == 22 + 14 + 3);
  CHECK(b[5] == 2);
  CHECK(b[13] == 5);
  CHECK(b[14] == 1);
  CHECK(b[21] == 8);
  CHECK(be32(b, 22) == 640);
  CHECK(be32(b, 26) == 360);
  CHECK(b[30] == 60);
  CHECK(b[31] == 2);
  CHECK(be32(b, 32) == 3);
  CHECK(b[36] == 9);
}

TEST_CASE("round trip on random messages") {
  Rng rng(404);
  for (int i = 0; i < 500; ++i) {
    const WireMessage m = random_message(rng);
    const auto bytes = encode_message(m);
    REQUIRE(decode_message(bytes) == m);
    REQUIRE(message_length(bytes) == bytes.size());
    // Every strict prefix is either undecidable or announces the full length.
    const std::size_t cut = rng.below(bytes.size());
    const auto len = message_length(std::span(bytes).first(cut));
    CHECK((!len || *len == bytes.size()));
    CHECK_NAVP_ERROR(decode_message(std::span(bytes).first(cut)), ErrorCode::kTruncation);
  }
}

TEST_CASE("decode errors") {
  auto good = encode_message(make_probe_request(3, 4));
  auto bad_magic = good;
  std::copy_n("XXXX", 4, bad_magic.begin());
  CHECK_NAVP_ERROR(decode_message(bad_magic), ErrorCode::kBadMagic);
  auto bad_version = good;
  bad_version[4] = 2;
  CHECK_NAVP_ERROR(decode_message(bad_version), ErrorCode::kBadVersion);
  auto bad_type = good;
  bad_type[5] = 9;
  CHECK_NAVP_ERROR(decode_message(bad_type), ErrorCode::kUnknownType);
  auto trailing = good;
  trailing.push_back(0);
  CHECK_NAVP_ERROR(decode_message(trailing), ErrorCode::kLengthMismatch);
  CHECK_NAVP_ERROR(decode_message(std::span(good).first(10)), ErrorCode::kTruncation);

  auto req = encode_message(make_frame_request({1, 2, 2, CodecId::kRaw, {1, 2, 3}}, 90, 0));
  req[35] = 200;  // payload_len larger than the buffer
  CHECK_NAVP_ERROR(decode_message(req), ErrorCode::kTruncation);
}

TEST_CASE("probe response echoes id and timestamp") {
  const WireMessage r = make_probe_response(make_probe_request(77, 123456));
  CHECK(r.type == MessageType::kProbeResp);
  CHECK(r.frame_id == 77);
  CHECK(r.timestamp_us == 123456);
}

TEST_CASE("label map conversion validates the response") {
  const LabelMap m(3, 2, {0, 1, 2, 2, 1, 0}, 3);
  const WireMessage ok = make_frame_response(4, 0, m, 99);
  CHECK(to_label_map(ok) == m);
  WireMessage wrong = ok;
  std::get<FrameResponseBody>(wrong.body).payload.pop_back();
  CHECK_NAVP_ERROR(to_label_map(wrong), ErrorCode::kProtocol);
  WireMessage enc = ok;
  std::get<FrameResponseBody>(enc.body).encoding = 1;
  CHECK_NAVP_ERROR(to_label_map(enc), ErrorCode::kProtocol);
  WireMessage range = ok;
  std::get<FrameResponseBody>(range.body).payload[0] = 3;
  CHECK_NAVP_ERROR(to_label_map(range), ErrorCode::kProtocol);
  CHECK_NAVP_ERROR(to_label_map(make_probe_request(1, 1)), ErrorCode::kProtocol);
  CHECK_NAVP_ERROR(to_encoded_frame(ok), ErrorCode::kProtocol);
}

TEST_CASE("golden files decode and re-encode byte-identically") {
  for (const char* name : {"probe_req", "probe_resp", "frame_req_raw", "frame_req_quant",
                           "frame_resp", "error"}) {
    CAPTURE(name);
    const auto bytes = golden(name);
    const WireMessage m = decode_message(bytes);
    CHECK(encode_message(m) == bytes);
  }
}

TEST_CASE("golden file contents") {
  const WireMessage probe = decode_message(golden("probe_req"));
  CHECK(probe.type == MessageType::kProbeReq);
  CHECK(probe.frame_id == 7);
  CHECK(probe.timestamp_us == 1'000'000);
  CHECK(decode_message(golden("probe_resp")).type == MessageType::kProbeResp);

  const WireMessage raw = decode_message(golden("frame_req_raw"));
  const auto& rb = std::get<FrameRequestBody>(raw.body);
  CHECK(raw.frame_id == 3);
  CHECK(rb.width == 32);
  CHECK(rb.height == 18);
  CHECK(rb.codec_id == 0);
  CHECK(rb.payload.size() == 32 * 18 * 3);

  const WireMessage quant = decode_message(golden("frame_req_quant"));
  const auto& qb = std::get<FrameRequestBody>(quant.body);
  CHECK(qb.quality == 70);
  CHECK(qb.codec_id == 2);
  CHECK(qb.payload[0] == 4);  // quantizer step at q=70
  // The QUANT request decodes to the quantized raw request.
  const Frame from_quant = decode(to_encoded_frame(quant));
  const Frame from_raw = decode(to_encoded_frame(raw));
  for (std::size_t i = 0; i < from_raw.pixels().size(); ++i)
    REQUIRE(from_quant.pixels()[i] == quantize(from_raw.pixels()[i], 4));

  const WireMessage resp = decode_message(golden("frame_resp"));
  const auto& fb = std::get<FrameResponseBody>(resp.body);
  CHECK(fb.inference_time_us == 12'345);
  CHECK(fb.num_classes == 6);
  CHECK(to_label_map(resp).width() == 32);

  const WireMessage err = decode_message(golden("error"));
  const auto& eb = std::get<ErrorBody>(err.body);
  CHECK(err.frame_id == 9);
  CHECK(eb.code == 1);
  CHECK(eb.text == "payload does not decode");
}
