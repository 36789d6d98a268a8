#include "deepcq/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "deepcq/util.hpp"

namespace deepcq {

namespace {

std::string join_messages(const std::vector<std::string>& messages) {
  std::ostringstream out;
  out << "invalid config (" << messages.size() << " problem"
      << (messages.size() == 1 ? "" : "s") << "):";
  for (const auto& m : messages) out << "\n  - " << m;
  return out.str();
}

/// Field-by-field reader that records type errors instead of throwing, so a
/// bad file reports every problem in one pass.
class Section {
 public:
  Section(const nlohmann::json& j, std::string name,
          std::vector<std::string>& errors)
      : j_(j), name_(std::move(name)), errors_(errors) {}

  template <typename T>
  T field(const char* key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      errors_.push_back(name_ + "." + key + ": wrong type (got " +
                        std::string(j_.at(key).type_name()) + ")");
      return fallback;
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  const nlohmann::json* object(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return nullptr;
    if (!j_.at(key).is_object()) {
      errors_.push_back(name_ + "." + key + ": must be an object");
      return nullptr;
    }
    return &j_.at(key);
  }

  /// Call after all field()/object() reads: flags leftover keys.
  void finish() {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        errors_.push_back(name_ + "." + item.key() + ": unknown key");
      }
    }
  }

 private:
  const nlohmann::json& j_;
  std::string name_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

MobilityModel parse_model(const std::string& s,
                          std::vector<std::string>& errors) {
  if (s == "static") return MobilityModel::Static;
  if (s == "gauss_markov") return MobilityModel::GaussMarkov;
  if (s == "random_waypoint") return MobilityModel::RandomWaypoint;
  errors.push_back("mobility.model: unknown model '" + s +
                   "' (expected static, gauss_markov, or random_waypoint)");
  return MobilityModel::GaussMarkov;
}

RewardMode parse_reward_mode(const std::string& s,
                             std::vector<std::string>& errors) {
  if (s == "srr_mimic") return RewardMode::SrrMimic;
  if (s == "overhead_min") return RewardMode::OverheadMin;
  errors.push_back("training.reward.mode: unknown mode '" + s +
                   "' (expected srr_mimic or overhead_min)");
  return RewardMode::OverheadMin;
}

void check_range(std::vector<std::string>& errors, bool ok,
                 const std::string& message) {
  if (!ok) errors.push_back(message);
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> messages)
    : std::runtime_error(join_messages(messages)),
      messages_(std::move(messages)) {}

std::string to_string(RewardMode mode) {
  return mode == RewardMode::SrrMimic ? "srr_mimic" : "overhead_min";
}

std::string to_string(MobilityModel model) {
  switch (model) {
    case MobilityModel::Static: return "static";
    case MobilityModel::GaussMarkov: return "gauss_markov";
    case MobilityModel::RandomWaypoint: return "random_waypoint";
  }
  return "gauss_markov";
}

std::vector<std::string> validate_scenario(const ScenarioConfig& s) {
  std::vector<std::string> errors;
  check_range(errors, s.nodes >= 2, "nodes: N >= 2 required");
  check_range(errors, s.nodes <= 10'000, "nodes: N <= 10000 required");
  check_range(errors, s.t_max >= 0, "t_max: must be >= 0");
  check_range(errors, s.episode_cap >= 1, "episode_cap: must be >= 1");
  check_range(errors,
              s.link_reliability >= 0.0 && s.link_reliability <= 1.0,
              "link_reliability: must be in [0, 1]");
  check_range(errors, s.k_best >= 1, "k_best: must be >= 1");
  check_range(errors, s.ack_size_ratio >= 0.0,
              "ack_size_ratio: must be >= 0");
  check_range(errors, s.protocol.lambda >= 0.0 && s.protocol.lambda <= 1.0,
              "protocol.lambda: must be in [0, 1]");
  check_range(errors, s.protocol.epsilon >= 0.0 && s.protocol.epsilon <= 1.0,
              "protocol.epsilon: must be in [0, 1]");
  check_range(errors, s.protocol.h_max >= 1.0,
              "protocol.h_max: must be >= 1");
  check_range(errors, s.arena.width > 0.0 && s.arena.height > 0.0,
              "arena: width and height must be > 0");
  check_range(errors, s.arena.region_scale > 0.0,
              "arena.region_scale: must be > 0");
  check_range(errors, s.arena.radio_range > 0.0,
              "arena.radio_range: must be > 0");
  check_range(errors, s.mobility.alpha >= 0.0 && s.mobility.alpha <= 1.0,
              "mobility.alpha: must be in [0, 1]");
  check_range(errors, s.mobility.mean_speed >= 0.0,
              "mobility.mean_speed: must be >= 0");
  check_range(errors, s.mobility.speed_variance >= 0.0,
              "mobility.speed_variance: must be >= 0");
  check_range(errors, s.mobility.heading_variance >= 0.0,
              "mobility.heading_variance: must be >= 0");
  check_range(errors,
              s.mobility.speed_min > 0.0 &&
                  s.mobility.speed_max >= s.mobility.speed_min,
              "mobility: 0 < speed_min <= speed_max required");
  check_range(errors, s.mobility.dynamic_scale > 0.0,
              "mobility.dynamic_scale: must be > 0");
  for (std::size_t i = 0; i < s.flows.size(); ++i) {
    const auto& f = s.flows[i];
    const std::string where = "traffic.flows[" + std::to_string(i) + "]";
    check_range(errors, f.source >= 0 && f.source < s.nodes,
                where + ".source: node id out of range");
    check_range(errors, f.destination >= 0 && f.destination < s.nodes,
                where + ".destination: node id out of range");
    check_range(errors, f.source != f.destination,
                where + ": source == destination");
    check_range(errors, f.inter_arrival >= 1,
                where + ".inter_arrival: must be >= 1");
  }
  return errors;
}

namespace {

void validate_training(const TrainingConfig& t,
                       std::vector<std::string>& errors) {
  const auto& r = t.reward;
  check_range(errors, r.w1 >= 0.0 && r.w2 >= 0.0 && r.w3 >= 0.0,
              "training.reward: weights must be >= 0");
  const auto& p = t.ppo;
  check_range(errors, p.learning_rate > 0.0,
              "training.ppo.learning_rate: must be > 0");
  check_range(errors, p.gamma >= 0.0 && p.gamma <= 1.0,
              "training.ppo.gamma: must be in [0, 1]");
  check_range(errors, p.gae_lambda >= 0.0 && p.gae_lambda <= 1.0,
              "training.ppo.gae_lambda: must be in [0, 1]");
  check_range(errors, p.clip_ratio > 0.0,
              "training.ppo.clip_ratio: must be > 0");
  check_range(errors, p.epochs >= 1, "training.ppo.epochs: must be >= 1");
  check_range(errors, p.minibatch_size >= 1,
              "training.ppo.minibatch_size: must be >= 1");
  check_range(errors, p.rollout_steps >= 1,
              "training.ppo.rollout_steps: must be >= 1");
  check_range(errors, p.total_steps >= 0,
              "training.ppo.total_steps: must be >= 0");
  check_range(errors, p.entropy_coef >= 0.0,
              "training.ppo.entropy_coef: must be >= 0");
  check_range(errors, p.value_coef >= 0.0,
              "training.ppo.value_coef: must be >= 0");
}

Config parse_config_json(const nlohmann::json& root) {
  std::vector<std::string> errors;
  if (!root.is_object()) {
    throw ConfigError({"top level: must be an object"});
  }

  Config cfg;
  ScenarioConfig& s = cfg.scenario;

  Section top(root, "config", errors);
  s.nodes = top.field("nodes", s.nodes);
  s.seed = top.field("seed", s.seed);
  s.t_max = top.field("t_max", s.t_max);
  s.episode_cap = top.field("episode_cap", s.episode_cap);
  s.link_reliability = top.field("link_reliability", s.link_reliability);
  s.k_best = top.field("k_best", s.k_best);
  s.ack_size_ratio = top.field("ack_size_ratio", s.ack_size_ratio);

  if (const auto* jp = top.object("protocol")) {
    Section sec(*jp, "protocol", errors);
    s.protocol.lambda = sec.field("lambda", s.protocol.lambda);
    s.protocol.epsilon = sec.field("epsilon", s.protocol.epsilon);
    s.protocol.h_max = sec.field("h_max", s.protocol.h_max);
    sec.finish();
  }
  if (const auto* ja = top.object("arena")) {
    Section sec(*ja, "arena", errors);
    s.arena.width = sec.field("width", s.arena.width);
    s.arena.height = sec.field("height", s.arena.height);
    s.arena.region_scale = sec.field("region_scale", s.arena.region_scale);
    s.arena.radio_range = sec.field("radio_range", s.arena.radio_range);
    sec.finish();
  }
  if (const auto* jm = top.object("mobility")) {
    Section sec(*jm, "mobility", errors);
    s.mobility.model = parse_model(
        sec.field("model", to_string(s.mobility.model)), errors);
    s.mobility.alpha = sec.field("alpha", s.mobility.alpha);
    s.mobility.mean_speed = sec.field("mean_speed", s.mobility.mean_speed);
    s.mobility.speed_variance =
        sec.field("speed_variance", s.mobility.speed_variance);
    s.mobility.heading_variance =
        sec.field("heading_variance", s.mobility.heading_variance);
    s.mobility.speed_min = sec.field("speed_min", s.mobility.speed_min);
    s.mobility.speed_max = sec.field("speed_max", s.mobility.speed_max);
    s.mobility.dynamic_scale =
        sec.field("dynamic_scale", s.mobility.dynamic_scale);
    sec.finish();
  }
  if (const auto* jt = top.object("traffic")) {
    Section sec(*jt, "traffic", errors);
    sec.field("flows", nlohmann::json::array());
    if (jt->contains("flows")) {
      const auto& jflows = jt->at("flows");
      if (!jflows.is_array()) {
        errors.push_back("traffic.flows: must be an array");
      } else {
        for (std::size_t i = 0; i < jflows.size(); ++i) {
          const std::string where = "traffic.flows[" + std::to_string(i) + "]";
          if (!jflows[i].is_object()) {
            errors.push_back(where + ": must be an object");
            continue;
          }
          Section fsec(jflows[i], where, errors);
          FlowSpec f;
          f.source = fsec.field("source", f.source);
          f.destination = fsec.field("destination", f.destination);
          f.inter_arrival = fsec.field("inter_arrival", f.inter_arrival);
          fsec.finish();
          s.flows.push_back(f);
        }
      }
    }
    sec.finish();
  }
  if (const auto* jt = top.object("training")) {
    Section sec(*jt, "training", errors);
    if (const auto* jr = sec.object("reward")) {
      Section rsec(*jr, "training.reward", errors);
      cfg.training.reward.mode = parse_reward_mode(
          rsec.field("mode", to_string(cfg.training.reward.mode)), errors);
      cfg.training.reward.w1 = rsec.field("w1", cfg.training.reward.w1);
      cfg.training.reward.w2 = rsec.field("w2", cfg.training.reward.w2);
      cfg.training.reward.w3 = rsec.field("w3", cfg.training.reward.w3);
      rsec.finish();
    }
    if (const auto* jp = sec.object("ppo")) {
      Section psec(*jp, "training.ppo", errors);
      PpoConfig& p = cfg.training.ppo;
      p.learning_rate = psec.field("learning_rate", p.learning_rate);
      p.gamma = psec.field("gamma", p.gamma);
      p.gae_lambda = psec.field("gae_lambda", p.gae_lambda);
      p.clip_ratio = psec.field("clip_ratio", p.clip_ratio);
      p.epochs = psec.field("epochs", p.epochs);
      p.minibatch_size = psec.field("minibatch_size", p.minibatch_size);
      p.rollout_steps = psec.field("rollout_steps", p.rollout_steps);
      p.total_steps = psec.field("total_steps", p.total_steps);
      p.entropy_coef = psec.field("entropy_coef", p.entropy_coef);
      p.value_coef = psec.field("value_coef", p.value_coef);
      p.checkpoint_every = psec.field("checkpoint_every", p.checkpoint_every);
      psec.finish();
    }
    sec.finish();
  }
  top.finish();

  // A scenario without explicit traffic gets one end-to-end flow.
  if (s.flows.empty() && s.nodes >= 2) {
    s.flows.push_back({0, static_cast<NodeId>(s.nodes - 1), 2});
  }

  auto scenario_errors = validate_scenario(s);
  errors.insert(errors.end(), scenario_errors.begin(), scenario_errors.end());
  validate_training(cfg.training, errors);

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

}  // namespace

Config parse_config_text(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Translate the byte offset into a line/column for a usable message.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError({"parse error at line " + std::to_string(line) +
                       ", column " + std::to_string(col) + ": " + e.what()});
  }
  return parse_config_json(root);
}

Config load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file: " + path});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

nlohmann::json to_json(const Config& cfg) {
  const ScenarioConfig& s = cfg.scenario;
  nlohmann::json flows = nlohmann::json::array();
  for (const auto& f : s.flows) {
    flows.push_back({{"source", f.source},
                     {"destination", f.destination},
                     {"inter_arrival", f.inter_arrival}});
  }
  return nlohmann::json{
      {"nodes", s.nodes},
      {"seed", s.seed},
      {"t_max", s.t_max},
      {"episode_cap", s.episode_cap},
      {"link_reliability", s.link_reliability},
      {"k_best", s.k_best},
      {"ack_size_ratio", s.ack_size_ratio},
      {"protocol",
       {{"lambda", s.protocol.lambda},
        {"epsilon", s.protocol.epsilon},
        {"h_max", s.protocol.h_max}}},
      {"arena",
       {{"width", s.arena.width},
        {"height", s.arena.height},
        {"region_scale", s.arena.region_scale},
        {"radio_range", s.arena.radio_range}}},
      {"mobility",
       {{"model", to_string(s.mobility.model)},
        {"alpha", s.mobility.alpha},
        {"mean_speed", s.mobility.mean_speed},
        {"speed_variance", s.mobility.speed_variance},
        {"heading_variance", s.mobility.heading_variance},
        {"speed_min", s.mobility.speed_min},
        {"speed_max", s.mobility.speed_max},
        {"dynamic_scale", s.mobility.dynamic_scale}}},
      {"traffic", {{"flows", flows}}},
      {"training",
       {{"reward",
         {{"mode", to_string(cfg.training.reward.mode)},
          {"w1", cfg.training.reward.w1},
          {"w2", cfg.training.reward.w2},
          {"w3", cfg.training.reward.w3}}},
        {"ppo",
         {{"learning_rate", cfg.training.ppo.learning_rate},
          {"gamma", cfg.training.ppo.gamma},
          {"gae_lambda", cfg.training.ppo.gae_lambda},
          {"clip_ratio", cfg.training.ppo.clip_ratio},
          {"epochs", cfg.training.ppo.epochs},
          {"minibatch_size", cfg.training.ppo.minibatch_size},
          {"rollout_steps", cfg.training.ppo.rollout_steps},
          {"total_steps", cfg.training.ppo.total_steps},
          {"entropy_coef", cfg.training.ppo.entropy_coef},
          {"value_coef", cfg.training.ppo.value_coef},
          {"checkpoint_every", cfg.training.ppo.checkpoint_every}}}}}};
}

std::string effective_config_text(const Config& cfg) {
  return to_json(cfg).dump(2) + "\n";
}

std::uint64_t config_hash(const Config& cfg) {
  return fnv1a64(to_json(cfg).dump());
}

}  // namespace deepcq
