#include "deepcq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "deepcq/util.hpp"

namespace deepcq {

double reward_srr_mimic(int action, double c_best, double epsilon) {
  const double eps_bar = 1.0 - epsilon;
  return action == 1 ? 1.0 - c_best * eps_bar : c_best * eps_bar;
}

double reward_overhead_min(bool delivery_credit, bool zero_ack, int n_acks,
                           int n_nodes, const RewardConfig& rc) {
  return rc.w1 * (delivery_credit ? 1.0 : 0.0) -
         rc.w2 * (zero_ack ? 1.0 : 0.0) -
         rc.w3 * static_cast<double>(n_acks) / n_nodes;
}

std::vector<Transition> build_transitions(
    std::span<const DecisionRecord> decisions, const RewardConfig& rc,
    int n_nodes, double epsilon) {
  // Group by agent, keeping slot order within each trajectory.
  std::vector<std::vector<const DecisionRecord*>> per_agent(
      static_cast<std::size_t>(n_nodes));
  for (const auto& d : decisions) {
    if (d.forced || !d.has_observation) continue;  // no choice was made
    per_agent[static_cast<std::size_t>(d.node)].push_back(&d);
  }

  std::vector<Transition> out;
  for (const auto& traj : per_agent) {
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const DecisionRecord& d = *traj[i];
      Transition t;
      t.obs = d.obs.features;
      t.action = d.action;
      t.log_prob = d.log_prob;
      t.value = d.value;
      t.agent = d.node;
      t.slot = d.slot;
      t.done = (i + 1 == traj.size());
      t.reward = rc.mode == RewardMode::SrrMimic
                     ? reward_srr_mimic(d.action, d.c_best, epsilon)
                     : reward_overhead_min(d.delivery_credit, d.zero_ack,
                                           d.n_acks, n_nodes, rc);
      out.push_back(std::move(t));
    }
  }
  return out;
}

RolloutBatch collect_rollouts(const ScenarioConfig& scenario,
                              const PolicyNetwork& net,
                              const RewardConfig& reward, int min_steps,
                              std::uint64_t seed, long long iteration) {
  RolloutBatch batch;
  DeepCqPolicy policy(net, scenario.k_best);
  for (long long ep = 0;
       batch.transitions.size() < static_cast<std::size_t>(min_steps); ++ep) {
    const std::uint64_t episode_seed =
        substream_seed(seed, "rollout", static_cast<std::uint64_t>(iteration),
                       static_cast<std::uint64_t>(ep));
    SimOptions opts;
    opts.record_decisions = true;
    Simulator sim(scenario, policy, episode_seed, opts);
    EpisodeResult res = sim.run();
    auto ts = build_transitions(res.decisions, reward, scenario.nodes,
                                scenario.protocol.epsilon);
    batch.transitions.insert(batch.transitions.end(),
                             std::make_move_iterator(ts.begin()),
                             std::make_move_iterator(ts.end()));
    batch.metrics += res.metrics;
    ++batch.episodes;
    // A scenario that generates no decisions will never fill the budget.
    if (batch.transitions.empty() && ep >= 7) break;
  }
  return batch;
}

void gae_advantages(std::span<const Transition> batch, double gamma,
                    double lambda, std::span<double> advantages,
                    std::span<double> targets) {
  const auto n = batch.size();
  double running = 0.0;
  for (std::size_t idx = n; idx-- > 0;) {
    const bool boundary = batch[idx].done || idx + 1 == n;
    const double next_value = boundary ? 0.0 : batch[idx + 1].value;
    const double not_done = boundary ? 0.0 : 1.0;
    const double delta =
        batch[idx].reward + gamma * next_value - batch[idx].value;
    running = delta + gamma * lambda * not_done * running;
    advantages[idx] = running;
    targets[idx] = running + batch[idx].value;
  }
}

AdamOptimizer::AdamOptimizer(std::size_t param_count, double learning_rate,
                             double beta1, double beta2, double eps)
    : m_(param_count, 0.0),
      v_(param_count, 0.0),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void AdamOptimizer::step(std::span<double> params,
                         std::span<const double> grad) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

PpoLossStats ppo_loss_and_grad(const PolicyNetwork& net,
                               std::span<const Transition> batch,
                               std::span<const std::size_t> indices,
                               std::span<const double> advantages,
                               std::span<const double> targets,
                               const PpoConfig& cfg, std::span<double> grad) {
  PpoLossStats stats;
  const double scale = 1.0 / static_cast<double>(indices.size());
  PolicyNetwork::ForwardTrace trace;
  for (const std::size_t i : indices) {
    const Transition& t = batch[i];
    const double adv = advantages[i];
    const auto out = net.forward(t.obs, trace);

    const double logp_new = action_log_prob(out, t.action);
    const double ratio = std::exp(logp_new - t.log_prob);
    const double unclipped = ratio * adv;
    const double clipped =
        std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio) * adv;
    stats.policy += -std::min(unclipped, clipped);
    // Gradient flows through the ratio only while the unclipped branch is
    // the active minimum.
    const double dl_dlogp = unclipped <= clipped ? -ratio * adv : 0.0;

    const double entropy = distribution_entropy(out.probs);
    stats.entropy += entropy;

    const double verr = out.value - targets[i];
    stats.value += 0.5 * verr * verr;

    std::array<double, 2> dlogits{};
    for (int k = 0; k < 2; ++k) {
      const double pk = out.probs[static_cast<std::size_t>(k)];
      const double indicator = t.action == k ? 1.0 : 0.0;
      double d = dl_dlogp * (indicator - pk);
      if (pk > 0.0) {
        // d(-c_e * H)/dz_k = c_e * p_k (log p_k + H)
        d += cfg.entropy_coef * pk * (std::log(pk) + entropy);
      }
      dlogits[static_cast<std::size_t>(k)] = scale * d;
    }
    const double dvalue = scale * cfg.value_coef * verr;
    net.backward(trace, t.obs, dlogits, dvalue, grad);
  }
  stats.policy *= scale;
  stats.value *= scale;
  stats.entropy *= scale;
  stats.total = stats.policy + cfg.value_coef * stats.value -
                cfg.entropy_coef * stats.entropy;
  return stats;
}

UpdateStats ppo_update(PolicyNetwork& net, AdamOptimizer& adam,
                       const RolloutBatch& batch, const PpoConfig& cfg,
                       RngStream& shuffle_rng) {
  UpdateStats stats;
  const auto& ts = batch.transitions;
  if (ts.empty()) return stats;

  std::vector<double> advantages(ts.size()), targets(ts.size());
  gae_advantages(ts, cfg.gamma, cfg.gae_lambda, advantages, targets);

  // Normalize advantages over the whole update batch.
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(advantages.size());
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(advantages.size());
  const double inv_sd = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& a : advantages) a = (a - mean) * inv_sd;

  std::vector<std::size_t> indices(ts.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;

  std::vector<double> grad(net.parameter_count());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with our own stream keeps the shuffle bit-portable.
    for (std::size_t i = indices.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(shuffle_rng.uniform_int(i));
      std::swap(indices[i - 1], indices[j]);
    }
    for (std::size_t start = 0; start < indices.size();
         start += static_cast<std::size_t>(cfg.minibatch_size)) {
      const std::size_t end =
          std::min(indices.size(),
                   start + static_cast<std::size_t>(cfg.minibatch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      const auto mb = std::span<const std::size_t>(indices).subspan(
          start, end - start);
      const auto loss =
          ppo_loss_and_grad(net, ts, mb, advantages, targets, cfg, grad);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite loss in PPO update (epoch " << epoch
            << ", minibatch at " << start << "): policy " << loss.policy
            << ", value " << loss.value << ", entropy " << loss.entropy;
        throw TrainError(msg.str());
      }
      adam.step(net.parameters(), grad);
      stats.policy_loss += loss.policy;
      stats.value_loss += loss.value;
      stats.entropy += loss.entropy;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    stats.policy_loss /= stats.minibatches;
    stats.value_loss /= stats.minibatches;
    stats.entropy /= stats.minibatches;
  }
  return stats;
}

std::string curve_csv_header() {
  return "iteration,steps,mean_reward,goodput,oh,broadcast_rate";
}

std::string curve_csv_line(const IterationRow& row) {
  std::ostringstream out;
  out << row.iteration << ',' << row.steps << ','
      << format_double(row.mean_reward) << ',';
  if (row.goodput) out << format_double(*row.goodput);
  out << ',';
  if (row.oh) out << format_double(*row.oh);
  out << ',';
  if (row.broadcast_rate) out << format_double(*row.broadcast_rate);
  return out.str();
}

TrainResult train(const Config& cfg, const std::string& out_dir,
                  std::ostream* log) {
  const PpoConfig& ppo = cfg.training.ppo;
  PolicyNetwork net(observation_length(cfg.scenario.k_best));
  RngStream init_rng = make_stream(cfg.scenario.seed, "train_init", 0, 0);
  net.randomize(init_rng);
  AdamOptimizer adam(net.parameter_count(), ppo.learning_rate);

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  TrainResult result{net, {}, 0, 0};
  while (result.steps < ppo.total_steps) {
    RolloutBatch batch =
        collect_rollouts(cfg.scenario, net, cfg.training.reward,
                         ppo.rollout_steps, cfg.scenario.seed,
                         result.iterations);
    if (batch.transitions.empty()) {
      if (log) *log << "no decisions collected; stopping training\n";
      break;
    }
    RngStream shuffle_rng = make_stream(
        cfg.scenario.seed, "shuffle",
        static_cast<std::uint64_t>(result.iterations), 0);
    ppo_update(net, adam, batch, ppo, shuffle_rng);

    result.steps += static_cast<long long>(batch.transitions.size());
    ++result.iterations;

    double mean_reward = 0.0;
    for (const auto& t : batch.transitions) mean_reward += t.reward;
    mean_reward /= static_cast<double>(batch.transitions.size());

    IterationRow row;
    row.iteration = result.iterations;
    row.steps = result.steps;
    row.mean_reward = mean_reward;
    row.goodput = goodput(batch.metrics);
    row.oh = normalized_overhead(batch.metrics, cfg.scenario.nodes);
    row.broadcast_rate = broadcast_rate(batch.metrics);
    result.curve.push_back(row);

    if (log) *log << curve_csv_line(row) << '\n';
    if (!out_dir.empty() && ppo.checkpoint_every > 0 &&
        result.iterations % ppo.checkpoint_every == 0) {
      save_weights(net, out_dir + "/weights_iter" +
                            std::to_string(result.iterations) + ".json");
    }
  }

  result.weights = net;
  if (!out_dir.empty()) {
    save_weights(net, out_dir + "/weights.json");
    std::ofstream curves(out_dir + "/curves.csv");
    curves << curve_csv_header() << '\n';
    for (const auto& row : result.curve) curves << curve_csv_line(row) << '\n';
  }
  return result;
}

}  // namespace deepcq
