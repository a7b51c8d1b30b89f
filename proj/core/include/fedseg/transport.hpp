#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include "fedseg/protocol.hpp"

namespace fedseg {

using Millis = std::chrono::milliseconds;

// Reliable, in-order duplex message channel to one peer. Failures surface as
// TransportError, expired waits as TimeoutError, malformed frames as
// ProtocolError.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const FedMessage& msg) = 0;
  virtual FedMessage receive(Millis timeout) = 0;
  virtual void close() = 0;
};

class Listener {
 public:
  virtual ~Listener() = default;
  virtual std::unique_ptr<Channel> accept(Millis timeout) = 0;
};

// One connection attempt; throws TransportError on failure.
using Connector = std::function<std::unique_ptr<Channel>()>;

// ---- in-process transport ----
//
// Frames pass through the same encode/decode path as TCP, so both transports
// deliver byte-identical messages.
class InProcNetwork {
 public:
  InProcNetwork();
  ~InProcNetwork();
  InProcNetwork(const InProcNetwork&) = delete;
  InProcNetwork& operator=(const InProcNetwork&) = delete;

  std::unique_ptr<Listener> listen();
  // Queues a connection for the listener; usable before accept() runs.
  std::unique_ptr<Channel> connect();

  struct State;

 private:
  std::shared_ptr<State> state_;
};

// ---- TCP transport ----

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

// Parses "host:port". ConfigError when malformed.
Endpoint parse_endpoint(const std::string& text);

class TcpListener final : public Listener {
 public:
  // Port 0 picks an ephemeral port; see port().
  TcpListener(const Endpoint& endpoint, std::size_t frame_cap = kDefaultFrameCap);
  ~TcpListener() override;
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  std::unique_ptr<Channel> accept(Millis timeout) override;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
  std::size_t frame_cap_;
};

std::unique_ptr<Channel> tcp_connect(const Endpoint& endpoint, Millis timeout,
                                     std::size_t frame_cap = kDefaultFrameCap);

// Calls `connect` up to `attempts` times, sleeping backoff, 2*backoff, ...
// between failures. Rethrows the last TransportError.
std::unique_ptr<Channel> connect_with_retry(const Connector& connect, int attempts, Millis backoff);

}  // namespace fedseg
