#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "fedseg/transport.hpp"

namespace fedseg {

namespace {

using Clock = std::chrono::steady_clock;

std::string errno_text() { return std::strerror(errno); }

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
  return left <= 0 ? 0 : static_cast<int>(std::min<long long>(left, INT32_MAX));
}

// Waits for `events` on fd until the deadline. TimeoutError when it expires.
void wait_fd(int fd, short events, Clock::time_point deadline, const char* what) {
  for (;;) {
    pollfd p{fd, events, 0};
    const int rc = ::poll(&p, 1, remaining_ms(deadline));
    if (rc > 0) return;
    if (rc == 0) throw TimeoutError(std::string("timed out waiting to ") + what);
    if (errno != EINTR) throw TransportError(std::string("poll failed: ") + errno_text());
  }
}

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw TransportError("cannot resolve host '" + ep.host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

class TcpChannel final : public Channel {
 public:
  TcpChannel(int fd, std::size_t frame_cap) : fd_(fd), frame_cap_(frame_cap) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpChannel() override { close(); }

  void send(const FedMessage& msg) override {
    if (fd_ < 0) throw TransportError("send on closed TCP channel");
    const Bytes frame = encode(msg);
    std::size_t sent = 0;
    while (sent < frame.size()) {
      const ssize_t n = ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError("TCP send failed: " + errno_text());
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  FedMessage receive(Millis timeout) override {
    if (fd_ < 0) throw TransportError("receive on closed TCP channel");
    const auto deadline = Clock::now() + timeout;
    Bytes frame(4);
    read_exact(frame.data(), 4, deadline);
    const std::size_t len = frame_length(std::span<const std::uint8_t, 4>(frame.data(), 4), frame_cap_);
    frame.resize(len);
    read_exact(frame.data() + 4, len - 4, deadline);
    return decode(frame, frame_cap_);
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  void read_exact(std::uint8_t* dst, std::size_t n, Clock::time_point deadline) {
    std::size_t got = 0;
    while (got < n) {
      wait_fd(fd_, POLLIN, deadline, "receive a frame");
      const ssize_t r = ::recv(fd_, dst + got, n - got, 0);
      if (r == 0) throw TransportError("TCP peer closed the connection");
      if (r < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw TransportError("TCP receive failed: " + errno_text());
      }
      got += static_cast<std::size_t>(r);
    }
  }

  int fd_;
  std::size_t frame_cap_;
};

}  // namespace

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw ConfigError("address must be host:port, got '" + text + "'");
  }
  Endpoint ep;
  ep.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  unsigned long value = 0;
  try {
    std::size_t used = 0;
    value = std::stoul(port, &used);
    if (used != port.size()) throw std::invalid_argument("junk");
  } catch (const std::exception&) {
    throw ConfigError("invalid port in '" + text + "'");
  }
  if (value > 65535) throw ConfigError("port out of range in '" + text + "'");
  ep.port = static_cast<std::uint16_t>(value);
  return ep;
}

TcpListener::TcpListener(const Endpoint& endpoint, std::size_t frame_cap) : frame_cap_(frame_cap) {
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw TransportError("socket() failed: " + errno_text());
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = resolve(endpoint);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || ::listen(fd_, 64) < 0) {
    const std::string err = errno_text();
    ::close(fd_);
    throw TransportError("cannot listen on " + endpoint.host + ":" + std::to_string(endpoint.port) + ": " + err);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Channel> TcpListener::accept(Millis timeout) {
  wait_fd(fd_, POLLIN, Clock::now() + timeout, "accept a client connection");
  const int client = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
  if (client < 0) throw TransportError("accept failed: " + errno_text());
  return std::make_unique<TcpChannel>(client, frame_cap_);
}

std::unique_ptr<Channel> tcp_connect(const Endpoint& endpoint, Millis timeout, std::size_t frame_cap) {
  sockaddr_in addr = resolve(endpoint);
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0);
  if (fd < 0) throw TransportError("socket() failed: " + errno_text());
  const std::string where = endpoint.host + ":" + std::to_string(endpoint.port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    if (errno != EINPROGRESS) {
      const std::string err = errno_text();
      ::close(fd);
      throw TransportError("cannot connect to " + where + ": " + err);
    }
    try {
      wait_fd(fd, POLLOUT, Clock::now() + timeout, "connect");
    } catch (const TimeoutError&) {
      ::close(fd);
      throw TransportError("connect to " + where + " timed out");
    }
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      ::close(fd);
      throw TransportError("cannot connect to " + where + ": " + std::strerror(err));
    }
  }
  // Back to blocking mode; receive() bounds waits with poll().
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags & ~O_NONBLOCK);
  return std::make_unique<TcpChannel>(fd, frame_cap);
}

}  // namespace fedseg
