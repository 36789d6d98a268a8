#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepcq/config.hpp"
#include "deepcq/metrics.hpp"
#include "deepcq/policy.hpp"
#include "deepcq/rng.hpp"
#include "deepcq/sim.hpp"

namespace deepcq {

// ---------------------------------------------------------------------------
// Rewards
// ---------------------------------------------------------------------------

/// Imitation-shaped reward: broadcasting pays 1 - c_best * (1 - eps),
/// unicasting pays c_best * (1 - eps), so the per-step optimum mirrors the
/// confidence-driven broadcast rule.
double reward_srr_mimic(int action, double c_best, double epsilon);

/// Overhead-minimization reward: w1 for contributing to a delivery, -w2 for
/// a transmission nobody acknowledged, -w3 * n_acks / N for the ACK burden.
double reward_overhead_min(bool delivery_credit, bool zero_ack, int n_acks,
                           int n_nodes, const RewardConfig& rc);

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

struct Transition {
  std::vector<double> obs;
  int action = 0;
  double log_prob = 0.0;  // at behavior time
  double reward = 0.0;
  double value = 0.0;  // behavior-policy value estimate
  bool done = false;   // last step of this agent's episode trajectory
  NodeId agent = -1;
  int slot = 0;
};

/// Converts one episode's decision records into pooled training transitions:
/// rewards attached per the reward config, grouped into per-agent
/// trajectories (agents in id order, slots ascending), done set on each
/// trajectory's last step. Forced broadcasts carry no choice and are skipped.
std::vector<Transition> build_transitions(
    std::span<const DecisionRecord> decisions, const RewardConfig& rc,
    int n_nodes, double epsilon);

struct RolloutBatch {
  std::vector<Transition> transitions;  // per-agent trajectories, in order
  EpisodeMetrics metrics;               // aggregated over the episodes
  int episodes = 0;
};

/// Runs whole episodes under the shared policy until at least `min_steps`
/// transitions are pooled (an episode in progress is always finished).
/// Deterministic in (seed, iteration). Gives up and returns the empty batch
/// if episodes keep producing no decisions.
RolloutBatch collect_rollouts(const ScenarioConfig& scenario,
                              const PolicyNetwork& net,
                              const RewardConfig& reward, int min_steps,
                              std::uint64_t seed, long long iteration);

// ---------------------------------------------------------------------------
// PPO
// ---------------------------------------------------------------------------

/// Standard GAE over trajectories separated by done flags:
/// delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t,
/// A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1};
/// value targets are A_t + V_t. Advantages come back un-normalized.
void gae_advantages(std::span<const Transition> batch, double gamma,
                    double lambda, std::span<double> advantages,
                    std::span<double> targets);

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t param_count, double learning_rate,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// Gradient-descent step on the loss.
  void step(std::span<double> params, std::span<const double> grad);

  long long iterations() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
};

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PpoLossStats {
  double total = 0.0;
  double policy = 0.0;   // clipped-surrogate part
  double value = 0.0;    // 0.5 * (V - target)^2, before the coefficient
  double entropy = 0.0;  // mean action entropy
};

/// Loss and parameter gradient of the PPO objective
///   mean[ -min(r A, clip(r) A) + c_v * 0.5 (V - target)^2 - c_e * H ]
/// over the selected transitions, with advantages and targets fixed.
/// `grad` (parameter layout) must be zeroed by the caller; the mean's 1/M is
/// folded in. Pure: the network is not modified.
PpoLossStats ppo_loss_and_grad(const PolicyNetwork& net,
                               std::span<const Transition> batch,
                               std::span<const std::size_t> indices,
                               std::span<const double> advantages,
                               std::span<const double> targets,
                               const PpoConfig& cfg, std::span<double> grad);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  int minibatches = 0;
};

/// One PPO update: GAE, whole-batch advantage normalization, then
/// `epochs` passes of shuffled minibatch Adam steps. Throws TrainError on a
/// non-finite loss.
UpdateStats ppo_update(PolicyNetwork& net, AdamOptimizer& adam,
                       const RolloutBatch& batch, const PpoConfig& cfg,
                       RngStream& shuffle_rng);

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct IterationRow {
  int iteration = 0;
  long long steps = 0;
  double mean_reward = 0.0;
  std::optional<double> goodput;
  std::optional<double> oh;
  std::optional<double> broadcast_rate;
};

std::string curve_csv_header();
std::string curve_csv_line(const IterationRow& row);

struct TrainResult {
  PolicyNetwork weights;
  std::vector<IterationRow> curve;
  long long steps = 0;
  int iterations = 0;
};

/// Alternates rollout collection and PPO updates until the step budget is
/// spent. With a non-empty `out_dir`, writes weights.json, curves.csv, and
/// periodic checkpoints there. `log` (nullable) receives one line per
/// iteration.
TrainResult train(const Config& cfg, const std::string& out_dir,
                  std::ostream* log);

}  // namespace deepcq
