// Microbenchmarks for the hot paths: routing-table updates, ACK-value
// computation, policy-network inference, and whole simulated episodes.

#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "deepcq/policy.hpp"
#include "deepcq/rng.hpp"
#include "deepcq/routing_table.hpp"
#include "deepcq/sim.hpp"

using namespace deepcq;

namespace {

RoutingTable seeded_table(int rows) {
  RoutingTable table(0, ProtocolParams{});
  RngStream rng = make_stream(1, "bench", 0, 0);
  for (int i = 0; i < rows; ++i) {
    AckValues ack{rng.uniform(1.0, 16.0), rng.uniform(0.0, 1.0)};
    table.update_on_ack(1 + i % 11, 50 + i % 7, ack);
  }
  return table;
}

}  // namespace

static void BM_TableUpdateAck(benchmark::State& state) {
  RoutingTable table = seeded_table(64);
  RngStream rng = make_stream(2, "bench", 0, 0);
  std::vector<AckValues> acks(512);
  for (auto& ack : acks) {
    ack.h_ack = rng.uniform(1.0, 20.0);
    ack.c_ack = rng.uniform(0.0, 1.0);
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const NodeId neighbor = 1 + static_cast<NodeId>(i % 11);
    const NodeId dest = 50 + static_cast<NodeId>(i % 7);
    benchmark::DoNotOptimize(
        table.update_on_ack(neighbor, dest, acks[i % acks.size()]));
    ++i;
  }
}
BENCHMARK(BM_TableUpdateAck);

static void BM_ComputeAckValues(benchmark::State& state) {
  const RoutingTable table = seeded_table(64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(table.compute_ack_values(52));
  }
}
BENCHMARK(BM_ComputeAckValues);

static void BM_PolicyForward(benchmark::State& state) {
  PolicyNetwork net(observation_length(4));
  RngStream rng = make_stream(3, "train_init", 0, 0);
  net.randomize(rng);
  std::vector<double> obs(static_cast<std::size_t>(net.input_dim()));
  for (double& x : obs) x = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(obs));
  }
}
BENCHMARK(BM_PolicyForward);

static void BM_Episode(benchmark::State& state) {
  long long slots = 0;
  std::uint64_t seed = 1;
  for (auto _ : state) {
    ScenarioConfig cfg;
    cfg.nodes = static_cast<int>(state.range(0));
    cfg.flows = {{0, cfg.nodes - 1, 2}};
    cfg.t_max = 100;
    cfg.episode_cap = 1000;
    CqPlusPolicy policy;
    Simulator sim(cfg, policy, seed++);
    const EpisodeResult result = sim.run();
    slots += result.metrics.slots;
    benchmark::DoNotOptimize(result.metrics.data_transmissions);
  }
  state.SetItemsProcessed(slots);  // items/s = simulated slots per second
}
BENCHMARK(BM_Episode)->Arg(12)->Arg(30)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
