#include "navp/channel.hpp"

#include <algorithm>
#include <cmath>

#include "navp/error.hpp"

namespace navp {

void NetworkScenario::validate() const {
  if (!(downlink_mbps > 0.0) || !(uplink_mbps > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "scenario '" + name + "': rates must be > 0");
  if (!(base_rtt_ms >= 0.0) || !std::isfinite(base_rtt_ms))
    throw Error(ErrorCode::kInvalidArgument, "scenario '" + name + "': base_rtt must be >= 0");
  if (!(loss_prob >= 0.0 && loss_prob <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "scenario '" + name + "': loss must be in [0,1]");
}

const std::vector<NetworkScenario>& preset_scenarios() {
  static const std::vector<NetworkScenario> presets = {
      {"extreme-4g", 10.0, 5.0, 100.0, 0.05},
      {"congested-4g", 25.0, 10.0, 100.0, 0.02},
      {"hybrid-4g5g", 50.0, 25.0, 50.0, 0.005},
      {"good-5g", 200.0, 50.0, 30.0, 0.001},
      {"ultra-5g", 800.0, 200.0, 10.0, 0.0},
  };
  return presets;
}

const NetworkScenario& find_scenario(std::string_view name) {
  for (const auto& s : preset_scenarios())
    if (s.name == name) return s;
  throw Error(ErrorCode::kUnknownScenario, "unknown scenario '" + std::string(name) + "'");
}

std::string_view to_string(Direction d) {
  return d == Direction::kUplink ? "up" : "down";
}

Micros serialization_delay(std::size_t payload_bytes, double rate_mbps) {
  // bits / (Mbit/s) is microseconds.
  return static_cast<Micros>(std::llround(static_cast<double>(payload_bytes) * 8.0 / rate_mbps));
}

DelayBreakdown one_way_delay(const NetworkScenario& scenario, Direction direction,
                             std::size_t payload_bytes, Rng& rng, const LinkOptions& options) {
  if (payload_bytes == 0) throw Error(ErrorCode::kInvalidArgument, "payload must be >= 1 byte");
  constexpr std::uint32_t kMaxRetransmits = 1000;
  DelayBreakdown d;
  const double rate =
      direction == Direction::kUplink ? scenario.uplink_mbps : scenario.downlink_mbps;
  d.propagation = static_cast<Micros>(std::llround(scenario.base_rtt_ms * 500.0));
  const double u = rng.uniform();
  if (options.jitter_enabled)
    d.jitter =
        static_cast<Micros>(std::llround(u * options.jitter_fraction * scenario.base_rtt_ms * 1000.0));
  d.serialization = serialization_delay(payload_bytes, rate);
  while (d.retransmits < kMaxRetransmits && scenario.loss_prob > 0.0 &&
         rng.bernoulli(scenario.loss_prob))
    ++d.retransmits;
  d.retransmission = static_cast<Micros>(std::llround(d.retransmits * options.rto_ms * 1000.0));
  return d;
}

Channel::Channel(NetworkScenario scenario, LinkOptions options, std::uint64_t seed)
    : scenario_(std::move(scenario)),
      options_(options),
      links_{{Rng(mix_seed(seed, 0x75))}, {Rng(mix_seed(seed, 0x64))}} {
  scenario_.validate();
}

ChannelEvent Channel::schedule_locked(Direction direction, std::size_t bytes, Micros now) {
  if (closed_) throw Error(ErrorCode::kChannelClosed, "send on a closed channel");
  LinkState& link = links_[static_cast<int>(direction)];
  if (now < link.last_enqueue)
    throw Error(ErrorCode::kInvalidArgument, "send times must not decrease on a link");
  link.last_enqueue = now;

  const DelayBreakdown d = one_way_delay(scenario_, direction, bytes, link.rng, options_);
  ChannelEvent ev;
  ev.message_id = next_id_++;
  ev.direction = direction;
  ev.enqueue_time = now;
  ev.start_time = std::max(now, link.free_at);
  ev.bytes = bytes;
  ev.retransmit_count = d.retransmits;
  link.free_at = ev.start_time + d.serialization;
  ev.deliver_time = std::max(ev.start_time + d.total(), link.last_deliver);
  link.last_deliver = ev.deliver_time;
  trace_.push_back(ev);
  return ev;
}

ChannelEvent Channel::send(Direction direction, std::vector<std::uint8_t> message, Micros now) {
  std::lock_guard lock(mu_);
  const ChannelEvent ev = schedule_locked(direction, message.size(), now);
  pending_[static_cast<int>(direction)].push_back({ev, std::move(message)});
  return ev;
}

ChannelEvent Channel::reserve(Direction direction, std::size_t bytes, Micros now) {
  std::lock_guard lock(mu_);
  return schedule_locked(direction, bytes, now);
}

std::vector<Delivery> Channel::advance_until(Micros t) {
  std::lock_guard lock(mu_);
  std::vector<Delivery> out;
  auto& up = pending_[0];
  auto& down = pending_[1];
  for (;;) {
    const bool up_due = !up.empty() && up.front().event.deliver_time <= t;
    const bool down_due = !down.empty() && down.front().event.deliver_time <= t;
    if (!up_due && !down_due) break;
    bool take_up = up_due;
    if (up_due && down_due) {
      const auto& a = up.front().event;
      const auto& b = down.front().event;
      take_up = a.deliver_time != b.deliver_time ? a.deliver_time < b.deliver_time
                                                 : a.message_id < b.message_id;
    }
    auto& q = take_up ? up : down;
    out.push_back(std::move(q.front()));
    q.pop_front();
  }
  return out;
}

std::optional<Micros> Channel::next_delivery_time() const {
  std::lock_guard lock(mu_);
  std::optional<Micros> best;
  for (const auto& q : pending_)
    if (!q.empty() && (!best || q.front().event.deliver_time < *best))
      best = q.front().event.deliver_time;
  return best;
}

std::size_t Channel::in_flight() const {
  std::lock_guard lock(mu_);
  return pending_[0].size() + pending_[1].size();
}

void Channel::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
}

bool Channel::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::vector<ChannelEvent> Channel::trace() const {
  std::lock_guard lock(mu_);
  return trace_;
}

void VirtualClock::schedule(Micros at, Callback fn) {
  if (at < now_) throw Error(ErrorCode::kInvalidArgument, "cannot schedule in the past");
  queue_.push({at, seq_++, std::move(fn)});
}

bool VirtualClock::run_next() {
  if (queue_.empty()) return false;
  Entry e = queue_.top();
  queue_.pop();
  now_ = e.at;
  e.fn();
  return true;
}

void VirtualClock::run_until(Micros t) {
  while (!stopped_ && !queue_.empty() && queue_.top().at <= t) run_next();
  if (t > now_) now_ = t;
}

void VirtualClock::run() {
  stopped_ = false;
  while (!stopped_ && run_next()) {
  }
}

std::optional<Micros> VirtualClock::next_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.top().at;
}

}  // namespace navp
