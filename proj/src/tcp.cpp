#include "navp/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>

#include "navp/error.hpp"

namespace navp {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw Error(ErrorCode::kIo, what + ": " + std::strerror(errno));
}

}  // namespace

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.release();
  }
  return *this;
}

Socket Socket::connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw Error(ErrorCode::kIo, "resolve " + host + ": " + ::gai_strerror(rc));
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) continue;
    if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      const int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return s;
    }
  }
  throw_errno("connect " + host + ":" + service);
}

void Socket::write_all(std::span<const std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kChannelClosed, std::string("send: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

bool Socket::read_exact(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    const ssize_t n = ::recv(fd_, out.data() + done, out.size() - done, 0);
    if (n == 0) {
      if (done == 0) return false;
      throw Error(ErrorCode::kChannelClosed, "connection closed mid-message");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kChannelClosed, std::string("recv: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Listener::Listener(std::uint16_t port, const std::string& bind_host) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw_errno("socket");
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw Error(ErrorCode::kInvalidArgument, "bad bind address " + bind_host);
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd, 16) != 0) {
    const int saved = errno;
    ::close(fd);
    errno = saved;
    throw_errno("listen on port " + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  fd_ = fd;
}

Listener::~Listener() { close(); }

Socket Listener::accept() {
  for (;;) {
    const int fd = ::accept(fd_.load(), nullptr, nullptr);
    if (fd >= 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return Socket(fd);
    }
    if (errno == EINTR) continue;
    return Socket();
  }
}

void Listener::close() {
  const int fd = fd_.exchange(-1);
  if (fd >= 0) {
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
  }
}

std::vector<std::uint8_t> read_message(Socket& socket) {
  std::vector<std::uint8_t> buf(kHeaderSize);
  if (!socket.read_exact(buf)) throw Error(ErrorCode::kChannelClosed, "peer closed");
  // Fixed body bytes per message type.
  static constexpr std::size_t kFixedByType[] = {0, 0, 14, 22, 6};
  const std::uint8_t type = buf[5];
  message_length(buf);  // validates magic and version
  if (type > 4) throw Error(ErrorCode::kUnknownType, "unknown message type");
  if (kFixedByType[type] > 0) {
    buf.resize(kHeaderSize + kFixedByType[type]);
    if (!socket.read_exact(std::span(buf).subspan(kHeaderSize)))
      throw Error(ErrorCode::kChannelClosed, "connection closed mid-message");
  }
  const std::size_t total = *message_length(buf);
  const std::size_t have = buf.size();
  if (total > have) {
    buf.resize(total);
    if (!socket.read_exact(std::span(buf).subspan(have)))
      throw Error(ErrorCode::kChannelClosed, "connection closed mid-message");
  }
  return buf;
}

DelayLine::DelayLine() : worker_([this] { loop(); }) {}

DelayLine::~DelayLine() { stop(); }

void DelayLine::post(Clock::time_point due, std::function<void()> fn) {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    items_.push({due, seq_++, std::move(fn)});
  }
  cv_.notify_one();
}

void DelayLine::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_one();
  if (worker_.joinable() && worker_.get_id() != std::this_thread::get_id()) worker_.join();
}

void DelayLine::loop() {
  std::unique_lock lock(mu_);
  while (!stopping_) {
    if (items_.empty()) {
      cv_.wait(lock);
      continue;
    }
    const auto due = items_.top().due;
    if (Clock::now() < due) {
      cv_.wait_until(lock, due);
      continue;
    }
    Item item = items_.top();
    items_.pop();
    lock.unlock();
    item.fn();
    lock.lock();
  }
}

TcpServer::TcpServer(std::uint16_t port, BackendFactory factory, ServerOptions options)
    : listener_(port, "0.0.0.0"), factory_(std::move(factory)), options_(options) {}

TcpServer::~TcpServer() { stop(); }

void TcpServer::start() {
  if (running_.exchange(true)) return;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void TcpServer::stop() {
  if (!running_.exchange(false)) return;
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void TcpServer::accept_loop() {
  while (running_) {
    Socket s = listener_.accept();
    if (!s.valid()) break;
    std::lock_guard lock(mu_);
    if (!running_) break;
    open_fds_.push_back(s.fd());
    workers_.emplace_back([this, sock = std::move(s)]() mutable { serve(std::move(sock)); });
  }
}

void TcpServer::serve(Socket socket) {
  const int fd = socket.fd();
  try {
    auto backend = factory_();
    ServerSession session(*backend, options_);
    const auto epoch = std::chrono::steady_clock::now();
    for (;;) {
      std::vector<std::uint8_t> bytes;
      try {
        bytes = read_message(socket);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kChannelClosed) break;
        // Framing is lost after a bad header; report and drop the connection.
        socket.write_all(encode_message(
            make_error(0, 0, WireErrorCode::kProtocolViolation, e.what())));
        break;
      }
      const auto arrival = std::chrono::steady_clock::now();
      const Micros arrival_us =
          std::chrono::duration_cast<std::chrono::microseconds>(arrival - epoch).count();
      auto reply = session.handle(bytes, arrival_us);
      if (!reply) continue;
      // Hold the reply until its scheduled time so a modelled inference cost
      // shows up in wall-clock RTT; measured costs have already elapsed.
      std::this_thread::sleep_until(epoch + std::chrono::microseconds(reply->send_at));
      if (reply->message.type == MessageType::kFrameResp) ++frames_served_;
      socket.write_all(encode_message(reply->message));
    }
  } catch (const std::exception&) {
    // Connection-level failure; the peer sees the socket close.
  }
  std::lock_guard lock(mu_);
  std::erase(open_fds_, fd);
}

RemoteBackend::RemoteBackend(const std::string& host, std::uint16_t port,
                             std::uint32_t num_classes)
    : socket_(Socket::connect(host, port)), num_classes_(num_classes) {}

SegmentResult RemoteBackend::segment(const Frame& frame) {
  const EncodedFrame enc = encode(frame, 100, CodecId::kRaw);
  socket_.write_all(encode_message(make_frame_request(enc, 100, 0)));
  const WireMessage reply = decode_message(read_message(socket_));
  if (reply.type == MessageType::kError) {
    const auto& body = std::get<ErrorBody>(reply.body);
    throw Error(ErrorCode::kProtocol, "remote backend error: " + body.text);
  }
  if (reply.frame_id != frame.frame_index())
    throw Error(ErrorCode::kProtocol, "remote backend answered the wrong frame");
  LabelMap labels = to_label_map(reply);
  if (labels.width() != frame.width() || labels.height() != frame.height())
    throw Error(ErrorCode::kDimensionMismatch, "remote labels do not match the frame size");
  const auto& body = std::get<FrameResponseBody>(reply.body);
  return {std::move(labels), static_cast<Micros>(body.inference_time_us)};
}

namespace {

class RealtimeClient {
 public:
  using Clock = std::chrono::steady_clock;

  RealtimeClient(const SessionConfig& config, const NetworkScenario& scenario,
                 const RealtimeOptions& options)
      : config_(config),
        options_(options),
        socket_(Socket::connect(options.host, options.port)),
        channel_(scenario, options.link, mix_seed(config.seed, 0xC4A7)),
        controller_(config.tiers, {config.mode, config.window, config.hysteresis_ms}),
        pipeline_(config),
        start_(Clock::now()) {}

  SessionResult run() {
    std::thread reader([this] { read_loop(); });
    std::thread prober;
    if (config_.mode == Mode::kAdaptive) prober = std::thread([this] { probe_loop(); });
    std::thread capturer([this] { capture_loop(); });

    {
      std::unique_lock lock(mu_);
      const bool complete = done_cv_.wait_for(lock, options_.timeout, [this] {
        return closed_ || (result_.frames_sent >= config_.frames && outstanding_.empty());
      });
      result_.partial = !complete || closed_;
      finished_ = true;
      result_.duration_us = now_us();
    }
    done_cv_.notify_all();
    capturer.join();
    if (prober.joinable()) prober.join();
    uplink_.stop();
    downlink_.stop();
    socket_.shutdown();
    reader.join();
    std::lock_guard lock(mu_);
    return result_;
  }

 private:
  Micros now_us() const {
    return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start_).count();
  }
  Clock::time_point at(Micros t) const { return start_ + std::chrono::microseconds(t); }

  bool finished() {
    std::lock_guard lock(mu_);
    return finished_;
  }

  // Sleeps until t or until the session finishes; false when finished.
  bool sleep_until(Micros t) {
    std::unique_lock lock(mu_);
    return !done_cv_.wait_until(lock, at(t), [this] { return finished_; });
  }

  void transmit(std::vector<std::uint8_t> bytes) {
    if (!options_.emulate_network) {
      write(bytes);
      return;
    }
    const ChannelEvent ev = channel_.reserve(Direction::kUplink, bytes.size(), now_us());
    auto shared = std::make_shared<std::vector<std::uint8_t>>(std::move(bytes));
    uplink_.post(at(ev.deliver_time), [this, shared] { write(*shared); });
  }

  void write(const std::vector<std::uint8_t>& bytes) {
    try {
      std::lock_guard lock(write_mu_);
      socket_.write_all(bytes);
    } catch (const Error&) {
      mark_closed();
    }
  }

  void mark_closed() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    done_cv_.notify_all();
  }

  void probe_loop() {
    std::uint64_t id = 0;
    Micros next = 0;
    while (!finished()) {
      transmit(encode_message(make_probe_request(id++, static_cast<std::uint64_t>(now_us()))));
      next += config_.probe_interval_us;
      if (!sleep_until(next)) break;
    }
  }

  void capture_loop() {
    Micros next = 0;
    while (!finished()) {
      const EncodingParams params = controller_.current();
      bool send = false;
      {
        std::lock_guard lock(mu_);
        if (result_.frames_sent >= config_.frames) break;
        if (outstanding_.size() >= config_.pipeline_cap) ++result_.skipped_ticks;
        else send = true;
      }
      if (send) {
        PreparedFrame f = pipeline_.prepare(frame_index_++, params, now_us());
        {
          std::lock_guard lock(mu_);
          outstanding_.emplace(f.pending.frame_id, std::move(f.pending));
          ++result_.frames_sent;
        }
        transmit(std::move(f.wire));
      }
      next += static_cast<Micros>(params.send_interval_ms) * 1000;
      if (!sleep_until(next)) break;
    }
  }

  void read_loop() {
    for (;;) {
      std::vector<std::uint8_t> bytes;
      try {
        bytes = read_message(socket_);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kChannelClosed) {
          std::lock_guard lock(mu_);
          ++result_.protocol_errors;
        }
        mark_closed();
        return;
      }
      if (!options_.emulate_network) {
        handle(bytes);
        continue;
      }
      const ChannelEvent ev = channel_.reserve(Direction::kDownlink, bytes.size(), now_us());
      auto shared = std::make_shared<std::vector<std::uint8_t>>(std::move(bytes));
      downlink_.post(at(ev.deliver_time), [this, shared] { handle(*shared); });
    }
  }

  void handle(const std::vector<std::uint8_t>& bytes) {
    const Micros now = now_us();
    WireMessage m;
    try {
      m = decode_message(bytes);
    } catch (const Error&) {
      std::lock_guard lock(mu_);
      ++result_.protocol_errors;
      return;
    }
    if (m.type == MessageType::kProbeResp) {
      const double rtt_ms = static_cast<double>(now - static_cast<Micros>(m.timestamp_us)) / 1000.0;
      {
        std::lock_guard lock(mu_);
        result_.probe_rtts_ms.push_back(rtt_ms);
      }
      if (config_.rtt_feed != RttFeed::kFrame) feed(rtt_ms, now);
      return;
    }

    std::optional<PendingFrame> pending;
    {
      std::lock_guard lock(mu_);
      auto it = outstanding_.find(m.frame_id);
      if (it == outstanding_.end() ||
          (m.type != MessageType::kFrameResp && m.type != MessageType::kError)) {
        ++result_.protocol_errors;
        return;
      }
      pending = std::move(it->second);
      outstanding_.erase(it);
      if (m.type == MessageType::kError) ++result_.errors;
    }
    if (m.type == MessageType::kFrameResp) {
      try {
        const LabelMap labels = to_label_map(m);
        const auto& body = std::get<FrameResponseBody>(m.body);
        const Micros rtt = now - pending->sent_at;
        FrameRecord record = pipeline_.score(*pending, labels, rtt,
                                             static_cast<Micros>(body.inference_time_us));
        if (config_.rtt_feed != RttFeed::kProbe) feed(static_cast<double>(rtt) / 1000.0, now);
        std::lock_guard lock(mu_);
        result_.records.push_back(record);
      } catch (const Error&) {
        std::lock_guard lock(mu_);
        ++result_.protocol_errors;
      }
    }
    done_cv_.notify_all();
  }

  void feed(double rtt_ms, Micros now) {
    const int before = controller_.current().tier_index;
    const ControllerStep step = controller_.step(rtt_ms);
    if (step.tier_changed) {
      std::lock_guard lock(mu_);
      result_.tier_changes.push_back({now, before, step.params.tier_index});
    }
  }

  const SessionConfig& config_;
  const RealtimeOptions& options_;
  Socket socket_;
  Channel channel_;
  SharedController controller_;
  FramePipeline pipeline_;
  const Clock::time_point start_;
  DelayLine uplink_;
  DelayLine downlink_;
  std::mutex write_mu_;
  std::mutex mu_;
  std::condition_variable done_cv_;
  std::map<std::uint64_t, PendingFrame> outstanding_;
  SessionResult result_;
  std::uint64_t frame_index_ = 0;
  bool finished_ = false;
  bool closed_ = false;
};

}  // namespace

SessionResult run_realtime_session(const SessionConfig& config,
                                   const NetworkScenario& scenario,
                                   const RealtimeOptions& options) {
  config.validate();
  RealtimeClient client(config, scenario, options);
  return client.run();
}

}  // namespace navp
