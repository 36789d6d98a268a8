#include "deepcq/eval.hpp"

#include <atomic>
#include <bit>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

#include "deepcq/sim.hpp"
#include "deepcq/util.hpp"

namespace deepcq {

ScenarioConfig make_eval_scenario(const ScenarioConfig& base, int n, int flows,
                                  double scale) {
  ScenarioConfig s = base;
  s.nodes = n;
  s.mobility.dynamic_scale = scale;
  const int inter_arrival = base.flows.empty() ? 2 : base.flows[0].inter_arrival;
  s.flows.clear();
  for (int f = 0; f < flows; ++f) {
    s.flows.push_back({static_cast<NodeId>(f), static_cast<NodeId>(n - 1 - f),
                       inter_arrival});
  }
  return s;
}

std::uint64_t cell_seed(std::uint64_t base_seed, int n, int flows,
                        double scale, int seed_index) {
  const std::uint64_t a =
      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(n)) << 32) |
      static_cast<std::uint32_t>(flows);
  const std::uint64_t grid = substream_seed(base_seed, "scenario", a,
                                            std::bit_cast<std::uint64_t>(scale));
  return substream_seed(grid, "cell", static_cast<std::uint64_t>(seed_index),
                        0);
}

namespace {

struct Cell {
  int n = 0;
  int flows = 0;
  double scale = 1.0;
  int seed_index = 0;
  std::size_t first_row = 0;  // rows for this cell are contiguous
};

void validate_spec(const EvalSpec& spec) {
  std::vector<std::string> errors;
  if (spec.n_values.empty()) errors.push_back("evaluate: empty N list");
  for (int n : spec.n_values) {
    if (n < 2 || n > 10'000) {
      errors.push_back("evaluate: N " + std::to_string(n) +
                       " outside [2, 10000]");
    }
  }
  if (spec.flow_counts.empty()) errors.push_back("evaluate: empty flows list");
  for (int f : spec.flow_counts) {
    if (f < 1) errors.push_back("evaluate: flow count must be >= 1");
    for (int n : spec.n_values) {
      if (2 * f > n) {
        errors.push_back("evaluate: " + std::to_string(f) +
                         " flows need at least " + std::to_string(2 * f) +
                         " nodes (got N=" + std::to_string(n) + ")");
      }
    }
  }
  if (spec.scales.empty()) errors.push_back("evaluate: empty scales list");
  for (double s : spec.scales) {
    if (!(s > 0.0)) errors.push_back("evaluate: scales must be > 0");
  }
  if (spec.seeds < 1) errors.push_back("evaluate: seeds must be >= 1");
  if (spec.jobs < 1) errors.push_back("evaluate: jobs must be >= 1");
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

}  // namespace

std::vector<ResultRow> evaluate_matrix(const Config& base,
                                       const PolicyNetwork* net,
                                       const EvalSpec& spec) {
  validate_spec(spec);

  std::vector<std::string> policies;
  if (spec.include_cq) policies.push_back("cq");
  policies.push_back("cq+");
  if (net != nullptr) policies.push_back("deepcq+");

  const std::string cfg_hash = to_hex(config_hash(base));
  const std::string w_hash = net ? to_hex(weights_hash(*net)) : "";

  std::vector<Cell> cells;
  std::size_t row_count = 0;
  for (int n : spec.n_values) {
    for (int flows : spec.flow_counts) {
      for (double scale : spec.scales) {
        for (int s = 0; s < spec.seeds; ++s) {
          cells.push_back({n, flows, scale, s, row_count});
          row_count += policies.size();
        }
      }
    }
  }

  std::vector<ResultRow> rows(row_count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      try {
        const ScenarioConfig scenario =
            make_eval_scenario(base.scenario, cell.n, cell.flows, cell.scale);
        const std::uint64_t seed = cell_seed(
            base.scenario.seed, cell.n, cell.flows, cell.scale,
            cell.seed_index);
        for (std::size_t p = 0; p < policies.size(); ++p) {
          std::unique_ptr<DecisionPolicy> policy;
          if (policies[p] == "cq") {
            policy = std::make_unique<CqPolicy>();
          } else if (policies[p] == "cq+") {
            policy = std::make_unique<CqPlusPolicy>();
          } else {
            policy = std::make_unique<DeepCqPolicy>(*net, scenario.k_best);
          }

          Simulator sim(scenario, *policy, seed);
          const EpisodeResult res = sim.run();
          ResultRow row =
              make_result_row(res.metrics, cell.n, scenario.ack_size_ratio);
          row.policy = policies[p];
          row.flows = cell.flows;
          row.scale = cell.scale;
          row.seed = seed;
          row.config_hash = cfg_hash;
          row.weights_hash = policies[p] == "deepcq+" ? w_hash : "";
          rows[cell.first_row + p] = std::move(row);
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  if (spec.jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < spec.jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace deepcq
