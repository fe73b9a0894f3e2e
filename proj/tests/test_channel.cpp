#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "navp/channel.hpp"
#include "navp/rng.hpp"
#include "oracles.hpp"

using namespace navp;

namespace {

NetworkScenario flat(double mbps, double rtt_ms, double loss = 0.0) {
  return {"test", mbps, mbps, rtt_ms, loss};
}

LinkOptions no_jitter() {
  LinkOptions o;
  o.jitter_enabled = false;
  return o;
}

// Mean RTT of widely spaced probes, each answered on arrival.
double idle_probe_mean_ms(const NetworkScenario& s, std::uint64_t seed, int probes) {
  Channel ch(s, {}, seed);
  double total = 0;
  for (int i = 0; i < probes; ++i) {
    const Micros t = static_cast<Micros>(i) * 60'000'000;  // a minute apart
    const ChannelEvent up = ch.reserve(Direction::kUplink, 22, t);
    const ChannelEvent down = ch.reserve(Direction::kDownlink, 22, up.deliver_time);
    total += static_cast<double>(down.deliver_time - t) / 1000.0;
  }
  return total / probes;
}

}  // namespace

TEST_CASE("presets match the scenario table field for field") {
  const auto& p = preset_scenarios();
  REQUIRE(p.size() == 5);
  CHECK(p[0] == NetworkScenario{"extreme-4g", 10, 5, 100, 0.05});
  CHECK(p[1] == NetworkScenario{"congested-4g", 25, 10, 100, 0.02});
  CHECK(p[2] == NetworkScenario{"hybrid-4g5g", 50, 25, 50, 0.005});
  CHECK(p[3] == NetworkScenario{"good-5g", 200, 50, 30, 0.001});
  CHECK(p[4] == NetworkScenario{"ultra-5g", 800, 200, 10, 0.0});
  CHECK(find_scenario("good-5g").base_rtt_ms == 30);
  CHECK_NAVP_ERROR(find_scenario("nosuch"), ErrorCode::kUnknownScenario);
}

TEST_CASE("scenario validation") {
  CHECK_NAVP_ERROR(flat(0, 10).validate(), ErrorCode::kInvalidArgument);
  CHECK_NAVP_ERROR(flat(10, -1).validate(), ErrorCode::kInvalidArgument);
  CHECK_NAVP_ERROR(flat(10, 10, 1.5).validate(), ErrorCode::kInvalidArgument);
  CHECK_NOTHROW(flat(10, 0, 1.0).validate());
}

TEST_CASE("serialization delay") {
  CHECK(serialization_delay(125'000, 10) == 100'000);
  CHECK(serialization_delay(50'000, 200) == 2'000);
  CHECK(serialization_delay(22, 800) == 0);  // 0.22 us rounds to 0
  CHECK(serialization_delay(22, 5) == 35);
}

TEST_CASE("one-way delay examples") {
  Rng rng(1);
  const auto d = one_way_delay(flat(10, 0), Direction::kUplink, 125'000, rng, no_jitter());
  CHECK(d.serialization == 100'000);
  CHECK(d.total() == 100'000);

  const NetworkScenario ultra = find_scenario("ultra-5g");
  const auto u = one_way_delay(ultra, Direction::kUplink, 50'000, rng, no_jitter());
  CHECK(u.total() == 7'000);
  CHECK(u.propagation == 5'000);
  CHECK(u.serialization == 2'000);

  CHECK_NAVP_ERROR(one_way_delay(ultra, Direction::kUplink, 0, rng), ErrorCode::kInvalidArgument);
}

TEST_CASE("lossless links never retransmit and jitter stays in range") {
  Rng rng(3);
  const NetworkScenario s = flat(100, 40, 0.0);
  for (int i = 0; i < 5000; ++i) {
    const auto d = one_way_delay(s, Direction::kDownlink, 1000, rng);
    REQUIRE(d.retransmits == 0);
    CHECK(d.jitter >= 0);
    CHECK(d.jitter <= 4'000);
  }
}

TEST_CASE("retransmission count is geometric") {
  Rng rng(9);
  const NetworkScenario s = flat(100, 0, 0.2);
  double sum = 0;
  const int n = 200'000;
  for (int i = 0; i < n; ++i) {
    const auto d = one_way_delay(s, Direction::kUplink, 10, rng);
    CHECK(d.retransmission == d.retransmits * 200'000);
    sum += d.retransmits;
  }
  CHECK(sum / n == doctest::Approx(0.2 / 0.8).epsilon(0.02));
}

TEST_CASE("back-to-back messages queue behind each other") {
  const NetworkScenario s = flat(10, 20);
  Channel ch(s, no_jitter(), 1);
  const auto a = ch.send(Direction::kUplink, std::vector<std::uint8_t>(125'000), 0);
  const auto b = ch.send(Direction::kUplink, std::vector<std::uint8_t>(125'000), 0);
  CHECK(a.deliver_time == 100'000 + 10'000);
  CHECK(b.start_time == 100'000);
  CHECK(b.deliver_time == 200'000 + 10'000);
  // The opposite direction is independent.
  const auto c = ch.send(Direction::kDownlink, std::vector<std::uint8_t>(125'000), 0);
  CHECK(c.deliver_time == 110'000);
}

TEST_CASE("single message on an empty link arrives after one one-way delay") {
  const NetworkScenario s = find_scenario("congested-4g");
  Channel ch(s, {}, 77);
  const auto ev = ch.send(Direction::kDownlink, std::vector<std::uint8_t>(3000), 1'000);
  // Replay the link's generator to get the delay the channel drew.
  Rng rng(mix_seed(77, 0x64));
  const auto d = one_way_delay(s, Direction::kDownlink, 3000, rng);
  CHECK(ev.deliver_time == 1'000 + d.total());
  CHECK(ev.retransmit_count == d.retransmits);
}

TEST_CASE("advance_until delivers in time order and FIFO per direction") {
  const NetworkScenario s = find_scenario("extreme-4g");
  Channel ch(s, {}, 5);
  Rng sizes(4);
  Micros t = 0;
  std::vector<std::uint64_t> sent_up, sent_down;
  for (int i = 0; i < 400; ++i) {
    t += static_cast<Micros>(sizes.below(50'000));
    const Direction d = sizes.below(2) ? Direction::kUplink : Direction::kDownlink;
    std::vector<std::uint8_t> msg(1 + sizes.below(40'000), static_cast<std::uint8_t>(i));
    const auto ev = ch.send(d, std::move(msg), t);
    CHECK(ev.deliver_time >= ev.enqueue_time);
    (d == Direction::kUplink ? sent_up : sent_down).push_back(ev.message_id);
  }
  std::vector<std::uint64_t> got_up, got_down;
  Micros last = 0;
  while (auto next = ch.next_delivery_time()) {
    for (const auto& del : ch.advance_until(*next)) {
      CHECK(del.event.deliver_time >= last);
      last = del.event.deliver_time;
      CHECK(del.bytes.size() == del.event.bytes);
      (del.event.direction == Direction::kUplink ? got_up : got_down).push_back(del.event.message_id);
    }
  }
  CHECK(got_up == sent_up);
  CHECK(got_down == sent_down);
  CHECK(ch.in_flight() == 0);
}

TEST_CASE("serialization slots never overlap on a link") {
  const NetworkScenario s = find_scenario("hybrid-4g5g");
  Channel ch(s, {}, 12);
  Rng rng(12);
  Micros t = 0;
  for (int i = 0; i < 300; ++i) {
    t += static_cast<Micros>(rng.below(20'000));
    ch.reserve(Direction::kUplink, 1 + rng.below(300'000), t);
  }
  Micros free_at = 0;
  for (const auto& ev : ch.trace()) {
    CHECK(ev.start_time >= ev.enqueue_time);
    CHECK(ev.start_time >= free_at);
    free_at = ev.start_time + serialization_delay(ev.bytes, s.uplink_mbps);
  }
}

TEST_CASE("channel traces are reproducible per seed") {
  const auto run = [](std::uint64_t seed) {
    Channel ch(find_scenario("extreme-4g"), {}, seed);
    for (int i = 0; i < 200; ++i) {
      ch.reserve(Direction::kUplink, 5000 + i, i * 10'000);
      ch.reserve(Direction::kDownlink, 20000 - i, i * 10'000 + 5);
    }
    return ch.trace();
  };
  CHECK(run(8) == run(8));
  CHECK_FALSE(run(8) == run(9));
}

TEST_CASE("closed channel and time order are enforced") {
  Channel ch(flat(10, 10), {}, 1);
  ch.send(Direction::kUplink, {1}, 100);
  CHECK_NAVP_ERROR(ch.send(Direction::kUplink, {1}, 50), ErrorCode::kInvalidArgument);
  ch.close();
  CHECK(ch.closed());
  CHECK_NAVP_ERROR(ch.send(Direction::kUplink, {1}, 200), ErrorCode::kChannelClosed);
}

TEST_CASE("idle probe RTT matches the closed form on every preset") {
  for (const auto& s : preset_scenarios()) {
    CAPTURE(s.name);
    const double expected = oracle::idle_probe_rtt_ms(s, {}, 22);
    const double measured = idle_probe_mean_ms(s, 1234, 1000);
    CHECK(std::abs(measured - expected) <= 0.05 * expected);
  }
}

TEST_CASE("virtual clock orders events by time then insertion") {
  VirtualClock clock;
  std::vector<int> order;
  clock.schedule(20, [&] { order.push_back(3); });
  clock.schedule(10, [&] { order.push_back(1); });
  clock.schedule(10, [&] {
    order.push_back(2);
    clock.schedule_after(0, [&] { order.push_back(4); });
  });
  clock.run_until(15);
  CHECK(clock.now() == 15);
  CHECK(order == std::vector<int>{1, 2, 4});
  CHECK_NAVP_ERROR(clock.schedule(5, [] {}), ErrorCode::kInvalidArgument);
  clock.run();
  CHECK(order == std::vector<int>{1, 2, 4, 3});
  CHECK(clock.now() == 20);
  CHECK(clock.pending() == 0);
}

TEST_CASE("virtual clock stop halts the run loop") {
  VirtualClock clock;
  int fired = 0;
  clock.schedule(1, [&] {
    ++fired;
    clock.stop();
  });
  clock.schedule(2, [&] { ++fired; });
  clock.run();
  CHECK(fired == 1);
  CHECK(clock.next_time() == 2);
}
