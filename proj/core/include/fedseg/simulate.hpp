#pragma once

#include <cstdint>
#include <vector>

#include "fedseg/client.hpp"
#include "fedseg/server.hpp"
#include "fedseg/unet.hpp"

namespace fedseg {

enum class TransportMode { InProc, Tcp };

struct SimulationNode {
  data::Dataset dataset;
  std::uint64_t seed = 0;  // shuffle stream seed
};

struct SimulationOptions {
  TransportMode transport = TransportMode::InProc;
  // In-process only: run every role on the calling thread, clients stepped
  // in node-id order. Otherwise server and clients get their own threads.
  bool sequential = true;
  ServerOptions server;
};

// Step 1 of the protocol: the global model the server starts from.
ParameterSet<float> initial_global_model(const UNetConfig& config, std::uint64_t seed);

// Server plus one training client per node inside this process.
ServerResult simulate(const FedConfig& config, const UNetConfig& model, std::vector<SimulationNode> nodes,
                      const SimulationOptions& options = {});

// Same, with caller-provided client machines (node ids 0..n-1 in order).
ServerResult simulate_clients(const FedConfig& config, ParameterSet<float> initial,
                              std::vector<ClientMachine>& clients, const SimulationOptions& options = {});

struct CentralizedResult {
  ParameterSet<float> model;
  std::vector<double> epoch_losses;
};

// Baseline without federation: one trainer over `pooled` for
// rounds * local_epochs epochs, starting from initial_global_model.
CentralizedResult train_centralized(const FedConfig& config, const UNetConfig& model, data::Dataset pooled,
                                    std::uint64_t trainer_seed);

}  // namespace fedseg
