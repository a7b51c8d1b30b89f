#include <benchmark/benchmark.h>

#include "fedseg/protocol.hpp"
#include "fedseg/simulate.hpp"

using namespace fedseg;

namespace {

FedMessage model_message() {
  return FedMessage::global_model(1, 0, initial_global_model(UNetConfig{1, 3, 16}, 7));
}

void BM_Encode(benchmark::State& state) {
  const auto msg = model_message();
  std::size_t bytes = 0;
  for (auto _ : state) {
    auto frame = encode(msg);
    bytes = frame.size();
    benchmark::DoNotOptimize(frame);
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes));
}
BENCHMARK(BM_Encode)->Unit(benchmark::kMicrosecond);

void BM_Decode(benchmark::State& state) {
  const auto frame = encode(model_message());
  for (auto _ : state) benchmark::DoNotOptimize(decode(frame));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * frame.size()));
}
BENCHMARK(BM_Decode)->Unit(benchmark::kMicrosecond);

// Round trip through the in-process transport, which encodes and decodes.
void BM_InProcExchange(benchmark::State& state) {
  InProcNetwork net;
  auto listener = net.listen();
  auto client = net.connect();
  auto server = listener->accept(Millis{1000});
  const auto msg = model_message();
  for (auto _ : state) {
    server->send(msg);
    benchmark::DoNotOptimize(client->receive(Millis{1000}));
  }
}
BENCHMARK(BM_InProcExchange)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
