#include "fedseg/simulate.hpp"

#include <exception>
#include <thread>

#include "fedseg/errors.hpp"
#include "fedseg/log.hpp"

namespace fedseg {

ParameterSet<float> initial_global_model(const UNetConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  return UNet<float>::build(config, rng).parameters();
}

ServerResult simulate(const FedConfig& config, const UNetConfig& model, std::vector<SimulationNode> nodes,
                      const SimulationOptions& options) {
  config.validate();
  if (nodes.size() != config.node_count)
    throw ConfigError("node_count is " + std::to_string(config.node_count) + " but " +
                      std::to_string(nodes.size()) + " node datasets were given");
  LocalTrainingOptions local;
  local.batch_size = config.batch_size;
  local.epochs_per_call = config.local_epochs;
  local.adam = config.adam();

  std::vector<ClientMachine> clients;
  clients.reserve(nodes.size());
  for (std::uint32_t id = 0; id < nodes.size(); ++id) {
    auto& node = nodes[id];
    clients.emplace_back(id, std::make_unique<TrainingWork>(model, std::move(node.dataset), local, node.seed));
  }
  return simulate_clients(config, initial_global_model(model, config.seed), clients, options);
}

namespace {

ServerResult run_sequential(const FedConfig& config, ParameterSet<float> initial, std::vector<ClientMachine>& clients,
                            const ServerOptions& server_options) {
  InProcNetwork net;
  auto listener = net.listen();
  std::vector<std::unique_ptr<Channel>> links;
  for (auto& c : clients) {
    links.push_back(net.connect());
    links.back()->send(c.hello());
  }
  ServerSession session(config, std::move(initial), server_options);
  const Millis now{0};
  try {
    session.accept_all(*listener);
    while (!session.done()) {
      session.broadcast();
      for (std::size_t i = 0; i < clients.size(); ++i) {
        auto reply = clients[i].handle(links[i]->receive(now));
        if (reply) links[i]->send(*reply);
      }
      session.collect();
      session.aggregate();
    }
    session.finish();
  } catch (const Error& e) {
    session.abort(e.what());
    throw;
  }
  for (std::size_t i = 0; i < clients.size(); ++i) clients[i].handle(links[i]->receive(now));
  return session.result();
}

ServerResult run_threaded(const FedConfig& config, ParameterSet<float> initial, std::vector<ClientMachine>& clients,
                          const SimulationOptions& options) {
  InProcNetwork net;
  std::unique_ptr<Listener> listener;
  Connector connect;
  if (options.transport == TransportMode::Tcp) {
    auto tcp = std::make_unique<TcpListener>(Endpoint{"127.0.0.1", 0}, config.frame_cap);
    const Endpoint ep{"127.0.0.1", tcp->port()};
    connect = [ep, &config] { return tcp_connect(ep, config.round_timeout, config.frame_cap); };
    listener = std::move(tcp);
  } else {
    listener = net.listen();
    connect = [&net] { return net.connect(); };
  }

  std::vector<std::exception_ptr> client_errors(clients.size());
  std::vector<std::thread> threads;
  threads.reserve(clients.size());
  for (std::size_t i = 0; i < clients.size(); ++i) {
    threads.emplace_back([&, i] {
      try {
        run_client(clients[i], connect, config);
      } catch (...) {
        client_errors[i] = std::current_exception();
      }
    });
  }

  std::exception_ptr server_error;
  ServerResult result;
  try {
    result = run_server(config, *listener, std::move(initial), options.server);
  } catch (...) {
    server_error = std::current_exception();
  }
  for (auto& t : threads) t.join();
  if (server_error) std::rethrow_exception(server_error);
  for (auto& e : client_errors)
    if (e) std::rethrow_exception(e);
  return result;
}

}  // namespace

ServerResult simulate_clients(const FedConfig& config, ParameterSet<float> initial, std::vector<ClientMachine>& clients,
                              const SimulationOptions& options) {
  config.validate();
  if (clients.size() != config.node_count)
    throw ConfigError("node_count is " + std::to_string(config.node_count) + " but " +
                      std::to_string(clients.size()) + " clients were given");
  for (std::uint32_t id = 0; id < clients.size(); ++id)
    if (clients[id].node_id() != id) throw UsageError("clients must be ordered by node id");

  if (options.sequential && options.transport == TransportMode::InProc)
    return run_sequential(config, std::move(initial), clients, options.server);
  return run_threaded(config, std::move(initial), clients, options);
}

CentralizedResult train_centralized(const FedConfig& config, const UNetConfig& model, data::Dataset pooled,
                                    std::uint64_t trainer_seed) {
  config.validate();
  LocalTrainingOptions local;
  local.batch_size = config.batch_size;
  local.epochs_per_call = 1;
  local.adam = config.adam();
  LocalTrainer trainer(model, initial_global_model(model, config.seed), std::move(pooled), local, trainer_seed);
  CentralizedResult out;
  const std::size_t epochs = static_cast<std::size_t>(config.rounds) * config.local_epochs;
  for (std::size_t e = 0; e < epochs; ++e) {
    out.epoch_losses.push_back(trainer.run().mean_loss);
    logger().debug("centralized epoch {}/{}: loss {:.6f}", e + 1, epochs, out.epoch_losses.back());
  }
  out.model = trainer.parameters();
  return out;
}

}  // namespace fedseg
