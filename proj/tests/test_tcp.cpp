#include <doctest.h>

#include <atomic>

#include "helpers.hpp"
#include "navp/tcp.hpp"

using namespace navp;

namespace {

TcpServer::BackendFactory palette_factory(std::optional<CostModel> cost = std::nullopt) {
  return [cost] { return std::make_unique<PaletteBackend>(ScenePalette::standard(), cost); };
}

WireMessage round_trip(Socket& s, const WireMessage& m) {
  s.write_all(encode_message(m));
  return decode_message(read_message(s));
}

}  // namespace

TEST_CASE("tcp server echoes probes") {
  TcpServer server(0, palette_factory());
  server.start();
  REQUIRE(server.port() != 0);
  Socket s = Socket::connect("127.0.0.1", server.port());
  for (std::uint64_t id = 0; id < 5; ++id) {
    const WireMessage req = make_probe_request(id, 1000 * id);
    CHECK(round_trip(s, req) == make_probe_response(req));
  }
  server.stop();
}

TEST_CASE("tcp server segments frames") {
  TcpServer server(0, palette_factory());
  server.start();
  Socket s = Socket::connect("127.0.0.1", server.port());
  const Frame f = generate_scene(8, 64, 64, ScenePalette::standard(), 4);
  const WireMessage reply =
      round_trip(s, make_frame_request(encode(f, 100, CodecId::kRaw), 100, 42));
  REQUIRE(reply.type == MessageType::kFrameResp);
  CHECK(reply.timestamp_us == 42);
  const LabelMap labels = to_label_map(reply);
  CHECK(labels.width() == 64);
  CHECK(labels.height() == 64);
  CHECK(labels == palette_segment(f, ScenePalette::standard()));
  CHECK(std::get<FrameResponseBody>(reply.body).inference_time_us > 0);
  CHECK(server.frames_served() == 1);

  // A corrupt frame is answered with an error; the connection stays usable.
  const WireMessage err =
      round_trip(s, make_frame_request({5, 8, 8, CodecId::kQuant, {0xEE}}, 50, 0));
  REQUIRE(err.type == MessageType::kError);
  CHECK(err.frame_id == 5);
  CHECK(round_trip(s, make_probe_request(1, 2)).type == MessageType::kProbeResp);
  server.stop();
}

TEST_CASE("tcp server rejects bad framing") {
  TcpServer server(0, palette_factory());
  server.start();
  Socket s = Socket::connect("127.0.0.1", server.port());
  std::vector<std::uint8_t> junk(22, 0x41);
  s.write_all(junk);
  const WireMessage err = decode_message(read_message(s));
  REQUIRE(err.type == MessageType::kError);
  CHECK(std::get<ErrorBody>(err.body).code == 3);
  CHECK_NAVP_ERROR(read_message(s), ErrorCode::kChannelClosed);
  server.stop();
}

TEST_CASE("tcp server paces replies by the modelled cost") {
  TcpServer server(0, palette_factory(CostModel{50'000.0, 0.0}));
  server.start();
  Socket s = Socket::connect("127.0.0.1", server.port());
  const Frame f = generate_scene(1, 32, 32, ScenePalette::standard(), 2);
  const auto start = std::chrono::steady_clock::now();
  const WireMessage reply =
      round_trip(s, make_frame_request(encode(f, 90, CodecId::kQuant), 90, 0));
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(std::get<FrameResponseBody>(reply.body).inference_time_us == 50'000);
  CHECK(elapsed >= std::chrono::milliseconds(49));
  server.stop();
}

TEST_CASE("remote backend forwards frames") {
  TcpServer server(0, palette_factory());
  server.start();
  RemoteBackend remote("127.0.0.1", server.port(), 6);
  CHECK(remote.backend_id() == "remote-python");
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Frame f = generate_scene(seed, 48, 40, ScenePalette::standard(), 3);
    const SegmentResult r = remote.segment(f);
    CHECK(r.labels == palette_segment(f, ScenePalette::standard()));
    CHECK(r.inference_time > 0);
  }
  server.stop();
}

TEST_CASE("connecting to a closed port fails") {
  std::uint16_t port = 0;
  {
    Listener l(0);
    port = l.port();
  }
  CHECK_THROWS_AS(Socket::connect("127.0.0.1", port), Error);
}

TEST_CASE("delay line runs callbacks in due order") {
  DelayLine line;
  std::mutex mu;
  std::vector<int> order;
  const auto now = DelayLine::Clock::now();
  for (int i : {3, 1, 4, 0, 2})
    line.post(now + std::chrono::milliseconds(10 * i), [&, i] {
      std::lock_guard lock(mu);
      order.push_back(i);
    });
  line.post(now + std::chrono::milliseconds(20), [&] {
    std::lock_guard lock(mu);
    order.push_back(22);  // same due time as 2, posted later
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(120));
  line.stop();
  CHECK(order == std::vector<int>{0, 1, 2, 22, 3, 4});
}

TEST_CASE("delay line stop drops pending work") {
  std::atomic<int> ran{0};
  {
    DelayLine line;
    line.post(DelayLine::Clock::now() + std::chrono::seconds(10), [&] { ++ran; });
    line.stop();
  }
  CHECK(ran == 0);
}

TEST_CASE("realtime session against a local server") {
  TcpServer server(0, palette_factory(CostModel::calibrated()));
  server.start();
  SessionConfig c;
  c.mode = Mode::kAdaptive;
  c.frames = 20;
  c.width = 320;
  c.height = 180;
  RealtimeOptions o;
  o.port = server.port();
  o.timeout = std::chrono::seconds(30);
  const SessionResult r = run_realtime_session(c, find_scenario("ultra-5g"), o);
  server.stop();

  CHECK_FALSE(r.partial);
  CHECK(r.protocol_errors == 0);
  CHECK(r.errors == 0);
  REQUIRE(r.records.size() == 20);
  CHECK_FALSE(r.probe_rtts_ms.empty());
  const Micros model = virtual_inference_time(CostModel::calibrated(), 320, 180);
  for (const auto& rec : r.records) {
    CHECK(rec.tier == 0);
    CHECK(rec.infer_us == model);
    // The reply cannot beat the modelled inference plus the emulated base RTT.
    CHECK(rec.rtt_us >= model + static_cast<Micros>(find_scenario("ultra-5g").base_rtt_ms * 1000));
    CHECK(rec.ssim > 0.99);
  }
}

TEST_CASE("realtime session reports a lost server") {
  SessionConfig c;
  c.frames = 5;
  c.width = 64;
  c.height = 64;
  std::uint16_t port = 0;
  {
    Listener l(0);
    port = l.port();
  }
  RealtimeOptions o;
  o.port = port;
  CHECK_THROWS_AS(run_realtime_session(c, find_scenario("good-5g"), o), Error);
}
