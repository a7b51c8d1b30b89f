#include "fedseg/server.hpp"

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include "fedseg/checkpoint.hpp"
#include "fedseg/errors.hpp"
#include "fedseg/log.hpp"
#include "json.hpp"

namespace fedseg {

namespace {

using Clock = std::chrono::steady_clock;

Millis remaining(Clock::time_point deadline) {
  auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now());
  return left.count() > 0 ? left : Millis{0};
}

std::string node_label(std::uint32_t id) { return "node " + std::to_string(id); }

}  // namespace

ParameterSet<float> attach_local_loss(ParameterSet<float> params, double loss) {
  Tensor<float> t({1});
  t[0] = static_cast<float>(loss);
  params.add(kLocalLossEntry, std::move(t));
  return params;
}

std::pair<ParameterSet<float>, std::optional<double>> detach_local_loss(const ParameterSet<float>& payload) {
  ParameterSet<float> model;
  std::optional<double> loss;
  for (std::size_t i = 0; i < payload.size(); ++i) {
    if (payload.name(i) == kLocalLossEntry) {
      const auto& t = payload.tensor(i);
      if (t.size() != 1) throw ProtocolError(std::string(kLocalLossEntry) + " must hold one value");
      loss = t[0];
    } else {
      model.add(payload.name(i), payload.tensor(i));
    }
  }
  return {std::move(model), loss};
}

std::string to_json_line(const RoundRecord& record) {
  nlohmann::json j;
  j["round"] = record.round;
  auto losses = nlohmann::json::array();
  for (double l : record.node_losses) {
    if (std::isfinite(l))
      losses.push_back(l);
    else
      losses.push_back(nullptr);
  }
  j["node_losses"] = std::move(losses);
  j["sample_counts"] = record.sample_counts;
  j["global_diff_norm"] = record.global_diff_norm;
  j["wall_ms"] = record.wall_ms;
  return j.dump();
}

std::string to_string(ServerPhase phase) {
  switch (phase) {
    case ServerPhase::Init: return "init";
    case ServerPhase::Broadcast: return "broadcast";
    case ServerPhase::Collect: return "collect";
    case ServerPhase::Aggregate: return "aggregate";
    case ServerPhase::Done: return "done";
  }
  return "unknown";
}

// ---- ServerMachine ----

ServerMachine::ServerMachine(FedConfig config, ParameterSet<float> initial)
    : config_(std::move(config)), global_(std::move(initial)) {
  config_.validate();
  if (global_.size() == 0) throw UsageError("server needs a non-empty initial model");
}

void ServerMachine::register_node(const FedMessage& hello) {
  if (phase_ != ServerPhase::Init)
    throw ProtocolError("HELLO from " + node_label(hello.node_id) + " during " + to_string(phase_));
  if (hello.kind != MessageKind::Hello)
    throw ProtocolError("expected HELLO, got " + to_string(hello.kind));
  if (hello.node_id >= config_.node_count)
    throw ProtocolError(node_label(hello.node_id) + " outside 0.." + std::to_string(config_.node_count - 1));
  if (hello_counts_.count(hello.node_id))
    throw ProtocolError("duplicate HELLO from " + node_label(hello.node_id));
  hello_counts_[hello.node_id] = hello.sample_count;
  if (hello_counts_.size() == config_.node_count) phase_ = ServerPhase::Broadcast;
}

std::vector<FedMessage> ServerMachine::start_round() {
  if (phase_ != ServerPhase::Broadcast) throw UsageError("start_round during " + to_string(phase_));
  ++round_;
  received_.clear();
  round_start_ = Clock::now();
  phase_ = ServerPhase::Collect;
  std::vector<FedMessage> out;
  out.reserve(config_.node_count);
  for (std::uint32_t id = 0; id < config_.node_count; ++id) out.push_back(FedMessage::global_model(round_, id, global_));
  return out;
}

void ServerMachine::accept_update(const FedMessage& update) {
  if (update.kind == MessageKind::Error)
    throw ProtocolError(node_label(update.node_id) + " reported an error: " + update.error_text);
  if (phase_ != ServerPhase::Collect)
    throw ProtocolError(to_string(update.kind) + " from " + node_label(update.node_id) + " during " +
                        to_string(phase_));
  if (update.kind != MessageKind::LocalUpdate)
    throw ProtocolError("expected LOCAL_UPDATE, got " + to_string(update.kind));
  if (update.node_id >= config_.node_count) throw ProtocolError("update from unknown " + node_label(update.node_id));
  if (update.round != round_)
    throw ProtocolError(node_label(update.node_id) + " echoed round " + std::to_string(update.round) +
                        " during round " + std::to_string(round_));
  if (received_.count(update.node_id)) throw ProtocolError("second update from " + node_label(update.node_id));
  if (!update.params) throw ProtocolError("update from " + node_label(update.node_id) + " has no parameters");

  auto [model, loss] = detach_local_loss(*update.params);
  try {
    model.require_aligned(global_);
  } catch (const AlignmentError& e) {
    throw ProtocolError("update from " + node_label(update.node_id) + " not aligned with the global model: " +
                        e.what());
  }
  for (const auto& [name, t] : model)
    if (!all_finite(t)) throw ProtocolError("update from " + node_label(update.node_id) + ": non-finite values in '" + name + "'");

  received_.emplace(update.node_id,
                    Received{std::move(model), update.sample_count, loss.value_or(std::numeric_limits<double>::quiet_NaN())});
  if (received_.size() == config_.node_count) phase_ = ServerPhase::Aggregate;
}

RoundRecord ServerMachine::aggregate() {
  if (phase_ != ServerPhase::Aggregate) throw UsageError("aggregate during " + to_string(phase_));
  std::vector<WeightedUpdate<float>> updates;
  RoundRecord record;
  record.round = round_;
  for (const auto& [id, r] : received_) {  // std::map: node-id order
    updates.push_back({&r.params, r.sample_count});
    record.node_losses.push_back(r.loss);
    record.sample_counts.push_back(r.sample_count);
  }
  ParameterSet<float> next;
  try {
    next = fedavg<float>(updates, config_.weighting);
  } catch (const UsageError& e) {
    throw ProtocolError(std::string("cannot aggregate round ") + std::to_string(round_) + ": " + e.what());
  }
  record.global_diff_norm = diff_norm(next, global_);
  global_ = std::move(next);
  received_.clear();
  record.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - round_start_).count();
  phase_ = round_ >= config_.rounds ? ServerPhase::Done : ServerPhase::Broadcast;
  return record;
}

std::vector<FedMessage> ServerMachine::done_messages() const {
  if (phase_ != ServerPhase::Done) throw UsageError("done_messages during " + to_string(phase_));
  std::vector<FedMessage> out;
  for (std::uint32_t id = 0; id < config_.node_count; ++id) out.push_back(FedMessage::done(round_, id));
  return out;
}

// ---- ServerSession ----

ServerSession::ServerSession(const FedConfig& config, ParameterSet<float> initial, ServerOptions options)
    : machine_(config, std::move(initial)), options_(std::move(options)) {
  if (options_.output_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*options_.output_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + *options_.output_dir + "': " + ec.message());
    std::ofstream truncate(std::filesystem::path(*options_.output_dir) / "rounds.jsonl", std::ios::trunc);
    if (!truncate) throw IoError("cannot write rounds.jsonl in '" + *options_.output_dir + "'");
  }
}

ServerSession::~ServerSession() = default;

void ServerSession::accept_all(Listener& listener) {
  const auto& cfg = machine_.config();
  const auto deadline = Clock::now() + cfg.round_timeout;
  while (channels_.size() < cfg.node_count) {
    std::unique_ptr<Channel> ch;
    FedMessage hello;
    try {
      ch = listener.accept(remaining(deadline));
      hello = ch->receive(remaining(deadline));
    } catch (const TimeoutError&) {
      throw TimeoutError("only " + std::to_string(channels_.size()) + " of " + std::to_string(cfg.node_count) +
                         " nodes registered within " + std::to_string(cfg.round_timeout.count()) + " ms");
    }
    try {
      machine_.register_node(hello);
    } catch (const ProtocolError& e) {
      try {
        ch->send(FedMessage::error(0, hello.node_id, e.what()));
      } catch (...) {
      }
      throw;
    }
    logger().info("registered node {} ({} samples)", hello.node_id, hello.sample_count);
    channels_[hello.node_id] = std::move(ch);
  }
}

void ServerSession::broadcast() {
  auto msgs = machine_.start_round();
  for (auto& msg : msgs) channels_.at(msg.node_id)->send(msg);
  logger().debug("round {}: global model sent to {} nodes", machine_.round(), msgs.size());
}

void ServerSession::collect() {
  const auto deadline = Clock::now() + machine_.config().round_timeout;
  for (auto& [id, ch] : channels_) {
    FedMessage msg;
    try {
      msg = ch->receive(remaining(deadline));
    } catch (const TimeoutError&) {
      throw TimeoutError("round " + std::to_string(machine_.round()) + ": no update from " + node_label(id) +
                         " within " + std::to_string(machine_.config().round_timeout.count()) + " ms");
    }
    if (msg.kind != MessageKind::Error && msg.node_id != id)
      throw ProtocolError("connection of " + node_label(id) + " sent a frame for " + node_label(msg.node_id));
    machine_.accept_update(msg);
  }
}

void ServerSession::exchange_concurrently() {
  auto msgs = machine_.start_round();
  const auto deadline = Clock::now() + machine_.config().round_timeout;
  const std::size_t n = msgs.size();
  std::vector<std::optional<FedMessage>> replies(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> workers;
  workers.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    workers.emplace_back([&, i] {
      try {
        Channel& ch = *channels_.at(static_cast<std::uint32_t>(i));
        ch.send(msgs[i]);
        replies[i] = ch.receive(remaining(deadline));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();

  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const TimeoutError&) {
      throw TimeoutError("round " + std::to_string(machine_.round()) + ": no update from " +
                         node_label(static_cast<std::uint32_t>(i)) + " within " +
                         std::to_string(machine_.config().round_timeout.count()) + " ms");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& msg = *replies[i];
    if (msg.kind != MessageKind::Error && msg.node_id != i)
      throw ProtocolError("connection of " + node_label(static_cast<std::uint32_t>(i)) + " sent a frame for " +
                          node_label(msg.node_id));
    machine_.accept_update(msg);
  }
}

RoundRecord ServerSession::aggregate() {
  RoundRecord record = machine_.aggregate();
  logger().info("round {}/{}: diff_norm={:.6g} wall_ms={:.1f}", record.round, machine_.config().rounds,
                 record.global_diff_norm, record.wall_ms);
  if (options_.output_dir) {
    const std::filesystem::path dir(*options_.output_dir);
    save_checkpoint((dir / ("round_" + std::to_string(record.round) + ".fdlc")).string(), machine_.global());
    std::ofstream out(dir / "rounds.jsonl", std::ios::app);
    out << to_json_line(record) << '\n';
    if (!out) throw IoError("cannot append to rounds.jsonl in '" + dir.string() + "'");
  }
  if (options_.on_round) options_.on_round(record, machine_.global());
  log_.push_back(record);
  return record;
}

void ServerSession::finish() {
  for (auto& msg : machine_.done_messages()) channels_.at(msg.node_id)->send(msg);
  for (auto& [id, ch] : channels_) ch->close();
}

void ServerSession::abort(const std::string& reason) noexcept {
  for (auto& [id, ch] : channels_) {
    try {
      ch->send(FedMessage::error(machine_.round(), id, reason));
      ch->close();
    } catch (...) {
    }
  }
}

ServerResult ServerSession::result() const { return {machine_.global(), log_}; }

ServerResult run_server(const FedConfig& config, Listener& listener, ParameterSet<float> initial,
                        const ServerOptions& options) {
  ServerSession session(config, std::move(initial), options);
  try {
    session.accept_all(listener);
    while (!session.done()) {
      session.exchange_concurrently();
      session.aggregate();
    }
    session.finish();
  } catch (const Error& e) {
    logger().error("server aborting: {}", e.what());
    session.abort(e.what());
    throw;
  }
  return session.result();
}

}  // namespace fedseg
