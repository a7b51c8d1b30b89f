#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "fedseg/data.hpp"
#include "fedseg/fed_config.hpp"
#include "fedseg/trainer.hpp"
#include "fedseg/transport.hpp"

namespace fedseg {

struct LocalResult {
  ParameterSet<float> params;
  double mean_loss = 0.0;
};

// What a node does with the global model each round.
class LocalWork {
 public:
  virtual ~LocalWork() = default;
  virtual LocalResult train(std::uint32_t round, const ParameterSet<float>& global) = 0;
  virtual std::uint64_t sample_count() const = 0;
};

// Standard node: loads the global parameters into its local model and runs
// local_epochs epochs. Adam state and the shuffle stream persist across rounds.
class TrainingWork final : public LocalWork {
 public:
  TrainingWork(const UNetConfig& model, data::Dataset dataset, LocalTrainingOptions options, std::uint64_t seed);

  LocalResult train(std::uint32_t round, const ParameterSet<float>& global) override;
  std::uint64_t sample_count() const override { return dataset_.size(); }

 private:
  UNetConfig model_;
  data::Dataset dataset_;
  LocalTrainingOptions options_;
  std::uint64_t seed_;
  std::optional<LocalTrainer> trainer_;
};

enum class ClientPhase { Hello, AwaitModel, Train, Report, Done };

std::string to_string(ClientPhase phase);

class ClientMachine {
 public:
  ClientMachine(std::uint32_t node_id, std::unique_ptr<LocalWork> work);

  ClientPhase phase() const noexcept { return phase_; }
  std::uint32_t node_id() const noexcept { return node_id_; }
  std::uint32_t last_round() const noexcept { return last_round_; }

  // Hello -> AwaitModel.
  FedMessage hello();

  // GLOBAL_MODEL: Train, Report, reply with LOCAL_UPDATE, back to AwaitModel.
  // DONE: Done, no reply. ERROR or anything unexpected: ProtocolError.
  std::optional<FedMessage> handle(const FedMessage& msg);

 private:
  std::uint32_t node_id_;
  std::unique_ptr<LocalWork> work_;
  ClientPhase phase_ = ClientPhase::Hello;
  std::uint32_t last_round_ = 0;
};

// Connects (with retry), says HELLO, then serves rounds until DONE.
void run_client(ClientMachine& client, const Connector& connect, const FedConfig& config);

}  // namespace fedseg
