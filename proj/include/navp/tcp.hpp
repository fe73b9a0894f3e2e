#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <queue>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "navp/channel.hpp"
#include "navp/segmentation.hpp"
#include "navp/session.hpp"
#include "navp/wire.hpp"

namespace navp {

// Owning wrapper around a connected stream socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  static Socket connect(const std::string& host, std::uint16_t port);

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }
  int release() {
    const int fd = fd_;
    fd_ = -1;
    return fd;
  }

  void write_all(std::span<const std::uint8_t> bytes);
  // False on orderly EOF before the first byte; throws on a mid-read EOF.
  bool read_exact(std::span<std::uint8_t> out);
  void shutdown();

 private:
  int fd_ = -1;
};

class Listener {
 public:
  // Port 0 picks an ephemeral port.
  explicit Listener(std::uint16_t port, const std::string& bind_host = "127.0.0.1");
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const { return port_; }
  Socket accept();
  void close();

 private:
  std::atomic<int> fd_{-1};
  std::uint16_t port_ = 0;
};

// Reads one NAVP message. Throws kChannelClosed on EOF.
std::vector<std::uint8_t> read_message(Socket& socket);

// Runs callbacks at their due time, in due-time order, on one worker thread.
class DelayLine {
 public:
  using Clock = std::chrono::steady_clock;

  DelayLine();
  ~DelayLine();
  DelayLine(const DelayLine&) = delete;
  DelayLine& operator=(const DelayLine&) = delete;

  void post(Clock::time_point due, std::function<void()> fn);
  // Drops anything not yet due and joins the worker.
  void stop();

 private:
  struct Item {
    Clock::time_point due;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      return a.due != b.due ? a.due > b.due : a.seq > b.seq;
    }
  };
  void loop();

  std::mutex mu_;
  std::condition_variable cv_;
  std::priority_queue<Item, std::vector<Item>, Later> items_;
  std::uint64_t seq_ = 0;
  bool stopping_ = false;
  std::thread worker_;
};

// NAVP server over TCP: one thread and one backend instance per connection.
// Inference time is the backend's own report (wall time for the palette
// backend without a cost model).
class TcpServer {
 public:
  using BackendFactory = std::function<std::unique_ptr<SegmentationBackend>()>;

  TcpServer(std::uint16_t port, BackendFactory factory, ServerOptions options = {});
  ~TcpServer();

  void start();
  void stop();
  std::uint16_t port() const { return listener_.port(); }
  std::size_t frames_served() const { return frames_served_.load(); }

 private:
  void accept_loop();
  void serve(Socket socket);

  Listener listener_;
  BackendFactory factory_;
  ServerOptions options_;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> frames_served_{0};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> open_fds_;
};

// Forwards frames to a remote NAVP server and waits for each reply. The
// reported inference time is the server's.
class RemoteBackend final : public SegmentationBackend {
 public:
  RemoteBackend(const std::string& host, std::uint16_t port, std::uint32_t num_classes);

  SegmentResult segment(const Frame& frame) override;
  std::uint32_t num_classes() const override { return num_classes_; }
  std::string backend_id() const override { return "remote-python"; }

 private:
  Socket socket_;
  std::uint32_t num_classes_;
};

struct RealtimeOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultPort;
  // Apply the scenario's delays with real sleeps on both directions.
  bool emulate_network = true;
  LinkOptions link;
  std::chrono::milliseconds timeout{120'000};
};

// Client session against a live server. Probing, capture/send and response
// handling run on separate threads; impairments are applied on the client
// side by per-direction delay lines driven by the same link model as the
// virtual channel.
SessionResult run_realtime_session(const SessionConfig& config,
                                   const NetworkScenario& scenario,
                                   const RealtimeOptions& options);

}  // namespace navp
