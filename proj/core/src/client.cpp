#include "fedseg/client.hpp"

#include "fedseg/errors.hpp"
#include "fedseg/log.hpp"
#include "fedseg/server.hpp"

namespace fedseg {

TrainingWork::TrainingWork(const UNetConfig& model, data::Dataset dataset, LocalTrainingOptions options,
                           std::uint64_t seed)
    : model_(model), dataset_(std::move(dataset)), options_(options), seed_(seed) {
  model_.validate();
  if (dataset_.empty()) throw ConfigError("node dataset '" + dataset_.domain + "' is empty");
}

LocalResult TrainingWork::train(std::uint32_t, const ParameterSet<float>& global) {
  if (!trainer_)
    trainer_.emplace(model_, global, dataset_, options_, seed_);
  else
    trainer_->load(global);
  EpochStats stats = trainer_->run();
  return {trainer_->parameters(), stats.mean_loss};
}

std::string to_string(ClientPhase phase) {
  switch (phase) {
    case ClientPhase::Hello: return "hello";
    case ClientPhase::AwaitModel: return "await_model";
    case ClientPhase::Train: return "train";
    case ClientPhase::Report: return "report";
    case ClientPhase::Done: return "done";
  }
  return "unknown";
}

ClientMachine::ClientMachine(std::uint32_t node_id, std::unique_ptr<LocalWork> work)
    : node_id_(node_id), work_(std::move(work)) {
  if (!work_) throw UsageError("client needs a LocalWork");
}

FedMessage ClientMachine::hello() {
  if (phase_ != ClientPhase::Hello) throw UsageError("hello() during " + to_string(phase_));
  phase_ = ClientPhase::AwaitModel;
  return FedMessage::hello(node_id_, work_->sample_count());
}

std::optional<FedMessage> ClientMachine::handle(const FedMessage& msg) {
  if (msg.kind == MessageKind::Error) {
    phase_ = ClientPhase::Done;
    throw ProtocolError("server aborted: " + msg.error_text);
  }
  if (phase_ != ClientPhase::AwaitModel)
    throw ProtocolError(to_string(msg.kind) + " received during " + to_string(phase_));
  if (msg.node_id != node_id_)
    throw ProtocolError("frame addressed to node " + std::to_string(msg.node_id) + ", this is node " +
                        std::to_string(node_id_));

  if (msg.kind == MessageKind::Done) {
    phase_ = ClientPhase::Done;
    return std::nullopt;
  }
  if (msg.kind != MessageKind::GlobalModel)
    throw ProtocolError("unexpected " + to_string(msg.kind) + " from server");
  if (msg.round <= last_round_)
    throw ProtocolError("round " + std::to_string(msg.round) + " after round " + std::to_string(last_round_));
  if (!msg.params) throw ProtocolError("GLOBAL_MODEL without parameters");

  phase_ = ClientPhase::Train;
  LocalResult local = work_->train(msg.round, *msg.params);
  phase_ = ClientPhase::Report;
  last_round_ = msg.round;
  logger().debug("node {} round {}: local loss {:.6f}", node_id_, msg.round, local.mean_loss);
  FedMessage reply = FedMessage::local_update(msg.round, node_id_, work_->sample_count(),
                                              attach_local_loss(std::move(local.params), local.mean_loss));
  phase_ = ClientPhase::AwaitModel;
  return reply;
}

void run_client(ClientMachine& client, const Connector& connect, const FedConfig& config) {
  auto channel = connect_with_retry(connect, config.connect_attempts, config.connect_backoff);
  channel->send(client.hello());
  while (client.phase() != ClientPhase::Done) {
    // Local training happens between frames, so the wait for the next one
    // covers only the server's side of a round.
    FedMessage msg = channel->receive(config.round_timeout);
    std::optional<FedMessage> reply;
    try {
      reply = client.handle(msg);
    } catch (const ProtocolError&) {
      if (msg.kind != MessageKind::Error) {
        try {
          channel->send(FedMessage::error(msg.round, client.node_id(), "client rejected frame"));
        } catch (...) {
        }
      }
      throw;
    }
    if (reply) channel->send(*reply);
  }
  channel->close();
  logger().info("node {} finished after round {}", client.node_id(), client.last_round());
}

}  // namespace fedseg
