#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedseg/fed_config.hpp"
#include "fedseg/parameter_set.hpp"
#include "fedseg/transport.hpp"

namespace fedseg {

// LOCAL_UPDATE payloads carry the node's mean training loss as an extra
// one-element entry after the model entries. The server strips it before
// aggregation.
inline constexpr const char* kLocalLossEntry = "meta.local_loss";

ParameterSet<float> attach_local_loss(ParameterSet<float> params, double loss);
// Returns the model entries and the loss, if present.
std::pair<ParameterSet<float>, std::optional<double>> detach_local_loss(const ParameterSet<float>& payload);

struct RoundRecord {
  std::uint32_t round = 0;
  std::vector<double> node_losses;          // by node id; NaN when not reported
  std::vector<std::uint64_t> sample_counts;  // by node id
  double global_diff_norm = 0.0;             // ||new global - previous global||
  double wall_ms = 0.0;
};

// One JSON object, no trailing newline.
std::string to_json_line(const RoundRecord& record);

struct ServerResult {
  ParameterSet<float> model;
  std::vector<RoundRecord> log;
};

enum class ServerPhase { Init, Broadcast, Collect, Aggregate, Done };

std::string to_string(ServerPhase phase);

// Server side of the round protocol without any I/O:
// Init -> (Broadcast -> Collect -> Aggregate) x rounds -> Done.
class ServerMachine {
 public:
  ServerMachine(FedConfig config, ParameterSet<float> initial);

  ServerPhase phase() const noexcept { return phase_; }
  std::uint32_t round() const noexcept { return round_; }
  const ParameterSet<float>& global() const noexcept { return global_; }
  const FedConfig& config() const noexcept { return config_; }
  std::uint64_t registered_count(std::uint32_t node_id) const { return hello_counts_.at(node_id); }

  // HELLO handling during Init; ProtocolError for unknown/duplicate ids.
  void register_node(const FedMessage& hello);

  // Broadcast -> Collect; returns the GLOBAL_MODEL frame for every node.
  std::vector<FedMessage> start_round();

  // Collect: validates kind, round echo, node id and alignment.
  // ProtocolError on any violation.
  void accept_update(const FedMessage& update);

  bool collect_complete() const noexcept { return phase_ == ServerPhase::Aggregate; }

  // Aggregate -> Broadcast (or Done after the last round).
  RoundRecord aggregate();

  std::vector<FedMessage> done_messages() const;

 private:
  struct Received {
    ParameterSet<float> params;
    std::uint64_t sample_count;
    double loss;
  };

  FedConfig config_;
  ParameterSet<float> global_;
  ServerPhase phase_ = ServerPhase::Init;
  std::uint32_t round_ = 0;
  std::map<std::uint32_t, std::uint64_t> hello_counts_;
  std::map<std::uint32_t, Received> received_;
  std::chrono::steady_clock::time_point round_start_;
};

struct ServerOptions {
  // When set, round_<k>.fdlc and rounds.jsonl are written here.
  std::optional<std::string> output_dir;
  std::function<void(const RoundRecord&, const ParameterSet<float>&)> on_round;
};

// Drives a ServerMachine over channels. Used by run_server (concurrent
// per-connection exchange) and by the sequential simulator.
class ServerSession {
 public:
  ServerSession(const FedConfig& config, ParameterSet<float> initial, ServerOptions options);
  ~ServerSession();

  // Accepts node_count connections and reads their HELLOs.
  void accept_all(Listener& listener);
  bool done() const noexcept { return machine_.phase() == ServerPhase::Done; }

  void broadcast();                // sends GLOBAL_MODEL to every node
  void collect();                  // receives one update per node, node-id order
  void exchange_concurrently();    // broadcast + collect, one thread per node
  RoundRecord aggregate();
  void finish();                   // DONE to every node
  // Best-effort ERROR frame to every node.
  void abort(const std::string& reason) noexcept;

  ServerResult result() const;
  const ServerMachine& machine() const noexcept { return machine_; }

 private:
  ServerMachine machine_;
  ServerOptions options_;
  std::map<std::uint32_t, std::unique_ptr<Channel>> channels_;
  std::vector<RoundRecord> log_;
};

// Full server role: accept, N rounds, DONE. On a protocol violation or
// timeout every client gets an ERROR frame and the error is rethrown.
ServerResult run_server(const FedConfig& config, Listener& listener, ParameterSet<float> initial,
                        const ServerOptions& options = {});

}  // namespace fedseg
