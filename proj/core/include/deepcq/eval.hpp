#pragma once

#include <cstdint>
#include <vector>

#include "deepcq/config.hpp"
#include "deepcq/metrics.hpp"
#include "deepcq/policy.hpp"

namespace deepcq {

/// Evaluation grid. Every (N, flows, scale, seed-index) cell is simulated
/// once per policy with the identical derived scenario seed, so comparisons
/// are paired like-for-like.
struct EvalSpec {
  std::vector<int> n_values{12};
  std::vector<int> flow_counts{1};
  std::vector<double> scales{1.0};
  int seeds = 1;
  int jobs = 1;
  bool include_cq = false;  // also run the always-unicast baseline
};

/// Derives one grid cell's scenario from the base: N nodes, `flows` flows
/// f -> (f, N-1-f), and the requested dynamic scale.
ScenarioConfig make_eval_scenario(const ScenarioConfig& base, int n, int flows,
                                  double scale);

/// Deterministic per-cell seed, independent of evaluation order and
/// parallelism.
std::uint64_t cell_seed(std::uint64_t base_seed, int n, int flows,
                        double scale, int seed_index);

/// Runs the grid. Row order is fixed (N, flows, scale, seed, then policy:
/// cq, cq+, deepcq+), identical for any `jobs`; `net` may be null to skip
/// the learned policy. Throws ConfigError on an invalid spec.
std::vector<ResultRow> evaluate_matrix(const Config& base,
                                       const PolicyNetwork* net,
                                       const EvalSpec& spec);

}  // namespace deepcq
