#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "navp/rng.hpp"

namespace navp {

using Micros = std::int64_t;

struct NetworkScenario {
  std::string name;
  double downlink_mbps = 0.0;
  double uplink_mbps = 0.0;
  double base_rtt_ms = 0.0;
  double loss_prob = 0.0;

  void validate() const;

  friend bool operator==(const NetworkScenario&, const NetworkScenario&) = default;
};

// extreme-4g, congested-4g, hybrid-4g5g, good-5g, ultra-5g.
const std::vector<NetworkScenario>& preset_scenarios();
const NetworkScenario& find_scenario(std::string_view name);

enum class Direction : std::uint8_t { kUplink = 0, kDownlink = 1 };  // client->server, server->client

std::string_view to_string(Direction d);

struct LinkOptions {
  // One-way jitter is uniform on [0, jitter_fraction * base_rtt].
  double jitter_fraction = 0.10;
  bool jitter_enabled = true;
  // Penalty per retransmission; loss shows up as delay, never as a drop.
  double rto_ms = 200.0;
};

struct DelayBreakdown {
  Micros propagation = 0;
  Micros jitter = 0;
  Micros serialization = 0;
  Micros retransmission = 0;
  std::uint32_t retransmits = 0;

  Micros total() const { return propagation + jitter + serialization + retransmission; }
};

Micros serialization_delay(std::size_t payload_bytes, double rate_mbps);

// Delay of one message on an idle link: base_rtt/2 + jitter + serialization
// + one RTO per retransmission, the retransmission count being geometric
// with success probability 1 - loss_prob. Draw order: one jitter draw, then
// one Bernoulli draw per attempt.
DelayBreakdown one_way_delay(const NetworkScenario& scenario, Direction direction,
                             std::size_t payload_bytes, Rng& rng,
                             const LinkOptions& options = {});

struct ChannelEvent {
  std::uint64_t message_id = 0;
  Direction direction = Direction::kUplink;
  Micros enqueue_time = 0;
  Micros start_time = 0;  // serialization begins
  Micros deliver_time = 0;
  std::uint32_t retransmit_count = 0;
  std::size_t bytes = 0;

  friend bool operator==(const ChannelEvent&, const ChannelEvent&) = default;
};

struct Delivery {
  ChannelEvent event;
  std::vector<std::uint8_t> bytes;
};

// Two independent single-server FIFO links. A link serializes one message
// at a time; deliveries within a direction never reorder. Thread-safe, so
// the real-time client may share one instance between senders.
class Channel {
 public:
  Channel(NetworkScenario scenario, LinkOptions options, std::uint64_t seed);

  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  // Queues the message for delivery and returns its schedule.
  ChannelEvent send(Direction direction, std::vector<std::uint8_t> message, Micros now);

  // Computes a schedule without retaining the message (real-time delay lines).
  ChannelEvent reserve(Direction direction, std::size_t bytes, Micros now);

  // Removes and returns every queued message due at or before t, ordered by
  // delivery time and then by send order.
  std::vector<Delivery> advance_until(Micros t);

  std::optional<Micros> next_delivery_time() const;
  std::size_t in_flight() const;

  void close();
  bool closed() const;

  std::vector<ChannelEvent> trace() const;
  const NetworkScenario& scenario() const { return scenario_; }

 private:
  struct LinkState {
    Rng rng;
    Micros free_at = 0;
    Micros last_deliver = 0;
    Micros last_enqueue = 0;
  };

  ChannelEvent schedule_locked(Direction direction, std::size_t bytes, Micros now);

  NetworkScenario scenario_;
  LinkOptions options_;
  mutable std::mutex mu_;
  LinkState links_[2];
  std::deque<Delivery> pending_[2];
  std::vector<ChannelEvent> trace_;
  std::uint64_t next_id_ = 1;
  bool closed_ = false;
};

// Discrete-event clock. Events fire in time order; equal times fire in
// scheduling order. Time never moves backwards.
class VirtualClock {
 public:
  using Callback = std::function<void()>;

  Micros now() const { return now_; }

  void schedule(Micros at, Callback fn);
  void schedule_after(Micros delay, Callback fn) { schedule(now_ + delay, std::move(fn)); }

  bool run_next();
  void run_until(Micros t);
  // Runs until the queue drains or stop() is called.
  void run();
  void stop() { stopped_ = true; }

  std::optional<Micros> next_time() const;
  std::size_t pending() const { return queue_.size(); }

 private:
  struct Entry {
    Micros at;
    std::uint64_t seq;
    Callback fn;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  Micros now_ = 0;
  std::uint64_t seq_ = 0;
  bool stopped_ = false;
  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
};

}  // namespace navp
