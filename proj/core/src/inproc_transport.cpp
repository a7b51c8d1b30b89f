#include "fedseg/transport.hpp"

#include <thread>

#include "fedseg/log.hpp"

namespace fedseg {

namespace {

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Bytes> to_server;
  std::deque<Bytes> to_client;
  bool closed = false;
};

class InProcChannel final : public Channel {
 public:
  InProcChannel(std::shared_ptr<Pipe> pipe, bool server_side) : pipe_(std::move(pipe)), server_side_(server_side) {}
  ~InProcChannel() override { close(); }

  void send(const FedMessage& msg) override {
    Bytes frame = encode(msg);
    std::lock_guard lock(pipe_->mu);
    if (pipe_->closed) throw TransportError("in-process channel closed");
    (server_side_ ? pipe_->to_client : pipe_->to_server).push_back(std::move(frame));
    pipe_->cv.notify_all();
  }

  FedMessage receive(Millis timeout) override {
    std::unique_lock lock(pipe_->mu);
    auto& inbox = server_side_ ? pipe_->to_server : pipe_->to_client;
    if (!pipe_->cv.wait_for(lock, timeout, [&] { return !inbox.empty() || pipe_->closed; })) {
      throw TimeoutError("no message within " + std::to_string(timeout.count()) + " ms");
    }
    if (inbox.empty()) throw TransportError("in-process channel closed by peer");
    Bytes frame = std::move(inbox.front());
    inbox.pop_front();
    lock.unlock();
    return decode(frame);
  }

  void close() override {
    std::lock_guard lock(pipe_->mu);
    pipe_->closed = true;
    pipe_->cv.notify_all();
  }

 private:
  std::shared_ptr<Pipe> pipe_;
  bool server_side_;
};

}  // namespace

struct InProcNetwork::State {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::shared_ptr<Pipe>> pending;
  bool listening = false;
};

namespace {

class InProcListener final : public Listener {
 public:
  explicit InProcListener(std::shared_ptr<InProcNetwork::State> state) : state_(std::move(state)) {}

  std::unique_ptr<Channel> accept(Millis timeout) override {
    std::unique_lock lock(state_->mu);
    if (!state_->cv.wait_for(lock, timeout, [&] { return !state_->pending.empty(); })) {
      throw TimeoutError("no in-process connection within " + std::to_string(timeout.count()) + " ms");
    }
    auto pipe = std::move(state_->pending.front());
    state_->pending.pop_front();
    return std::make_unique<InProcChannel>(std::move(pipe), true);
  }

 private:
  std::shared_ptr<InProcNetwork::State> state_;
};

}  // namespace

InProcNetwork::InProcNetwork() : state_(std::make_shared<State>()) {}
InProcNetwork::~InProcNetwork() = default;

std::unique_ptr<Listener> InProcNetwork::listen() {
  std::lock_guard lock(state_->mu);
  if (state_->listening) throw TransportError("in-process network already has a listener");
  state_->listening = true;
  return std::make_unique<InProcListener>(state_);
}

std::unique_ptr<Channel> InProcNetwork::connect() {
  auto pipe = std::make_shared<Pipe>();
  std::lock_guard lock(state_->mu);
  state_->pending.push_back(pipe);
  state_->cv.notify_all();
  return std::make_unique<InProcChannel>(std::move(pipe), false);
}

std::unique_ptr<Channel> connect_with_retry(const Connector& connect, int attempts, Millis backoff) {
  if (attempts < 1) attempts = 1;
  for (int i = 1;; ++i) {
    try {
      return connect();
    } catch (const TransportError& e) {
      if (i >= attempts) throw;
      logger().warn("connection attempt {}/{} failed: {}; retrying in {} ms", i, attempts, e.what(), backoff.count());
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

}  // namespace fedseg
