#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepcq/mobility.hpp"
#include "deepcq/routing_table.hpp"

namespace deepcq {

/// One unidirectional traffic flow. The source emits a packet every
/// `inter_arrival` slots while the traffic window is open.
struct FlowSpec {
  NodeId source = 0;
  NodeId destination = 1;
  int inter_arrival = 2;
};

struct ScenarioConfig {
  int nodes = 12;
  std::vector<FlowSpec> flows;  // defaulted to {0, nodes-1, 2} when empty
  int t_max = 400;              // no new traffic enters at slot >= t_max
  int episode_cap = 4000;       // hard stop even with queued packets
  double link_reliability = 1.0;
  int k_best = 4;               // observation slots per destination
  double ack_size_ratio = 0.1;  // ACK size relative to a data packet
  ProtocolParams protocol;
  Arena arena;
  MobilityParams mobility;
  std::uint64_t seed = 1;
};

enum class RewardMode { SrrMimic, OverheadMin };

struct RewardConfig {
  RewardMode mode = RewardMode::OverheadMin;
  double w1 = 1.0;  // delivery contribution
  double w2 = 0.2;  // transmitted but got zero ACKs
  double w3 = 0.1;  // per-ACK cost, normalized by network size
};

struct PpoConfig {
  double learning_rate = 5e-5;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_ratio = 0.2;
  int epochs = 4;
  int minibatch_size = 256;
  int rollout_steps = 2048;       // minimum transitions per iteration
  long long total_steps = 1'000'000;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int checkpoint_every = 0;       // iterations between checkpoints; 0 = final only
};

struct TrainingConfig {
  RewardConfig reward;
  PpoConfig ppo;
};

struct Config {
  ScenarioConfig scenario;
  TrainingConfig training;
};

/// Carries every violated constraint, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> messages);
  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
};

/// Parses and validates a config document. Missing fields take explicit
/// defaults; unknown keys and constraint violations are all reported at once.
Config parse_config_text(const std::string& text);
Config load_config_file(const std::string& path);

/// Serializes with every field explicit (defaults filled in), so an emitted
/// effective config reparses to the identical Config.
nlohmann::json to_json(const Config& cfg);
std::string effective_config_text(const Config& cfg);

/// Stable identifier embedded in result rows: hash of the effective config.
std::uint64_t config_hash(const Config& cfg);

std::string to_string(RewardMode mode);
std::string to_string(MobilityModel model);

/// Validates a scenario in isolation (used when the CLI patches N/flows/scale
/// into a base config). Returns violation messages; empty means valid.
std::vector<std::string> validate_scenario(const ScenarioConfig& s);

}  // namespace deepcq
