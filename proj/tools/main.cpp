// Command-line front end: simulate / train / evaluate / sweep.
//
// Every run emits an "effective config" file with all defaults filled in,
// and every result row carries the config hash, seed, and weights hash it
// was produced from, so any row is reproducible from those three alone.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deepcq/config.hpp"
#include "deepcq/eval.hpp"
#include "deepcq/metrics.hpp"
#include "deepcq/policy.hpp"
#include "deepcq/sim.hpp"
#include "deepcq/trainer.hpp"
#include "deepcq/util.hpp"

namespace {

using namespace deepcq;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

void emit_effective_config(const Config& cfg, const std::string& path) {
  write_file(path, effective_config_text(cfg));
}

/// Default effective-config path for a run that writes `out` ("" = stdout).
std::string effective_path_for(const std::string& out) {
  return out.empty() ? "effective_config.json" : out + ".effective.json";
}

void write_rows(const std::vector<ResultRow>& rows, const std::string& out) {
  std::ostringstream text;
  text << result_csv_header() << '\n';
  for (const auto& row : rows) text << result_csv_line(row) << '\n';
  if (out.empty()) {
    std::cout << text.str();
  } else {
    write_file(out, text.str());
  }
}

struct SimulateArgs {
  std::string config_path;
  std::string policy = "cq+";
  std::string weights_path;
  std::string out;
  std::string trace_path;
  std::string effective_path;
  std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& args) {
  Config cfg = load_config_file(args.config_path);
  if (args.seed) cfg.scenario.seed = *args.seed;

  std::unique_ptr<PolicyNetwork> net;
  std::unique_ptr<DecisionPolicy> policy;
  if (args.policy == "cq") {
    policy = std::make_unique<CqPolicy>();
  } else if (args.policy == "cq+") {
    policy = std::make_unique<CqPlusPolicy>();
  } else if (args.policy == "deepcq+") {
    if (args.weights_path.empty()) {
      std::cerr << "simulate: --policy deepcq+ requires --weights\n";
      return 1;
    }
    net = std::make_unique<PolicyNetwork>(load_weights(args.weights_path));
    if (net->input_dim() != observation_length(cfg.scenario.k_best)) {
      std::cerr << "simulate: weights expect input " << net->input_dim()
                << " but k_best " << cfg.scenario.k_best << " gives "
                << observation_length(cfg.scenario.k_best) << "\n";
      return 1;
    }
    policy = std::make_unique<DeepCqPolicy>(*net, cfg.scenario.k_best);
  } else {
    std::cerr << "simulate: unknown policy '" << args.policy << "'\n";
    return 1;
  }

  emit_effective_config(cfg, args.effective_path.empty()
                                 ? effective_path_for(args.out)
                                 : args.effective_path);

  SimOptions opts;
  opts.record_trace = !args.trace_path.empty();
  Simulator sim(cfg.scenario, *policy, cfg.scenario.seed, opts);
  const EpisodeResult res = sim.run();

  if (!args.trace_path.empty()) {
    std::ofstream trace(args.trace_path);
    if (!trace) throw std::runtime_error("cannot write " + args.trace_path);
    write_trace(trace, res.trace);
  }

  ResultRow row = make_result_row(res.metrics, cfg.scenario.nodes,
                                  cfg.scenario.ack_size_ratio);
  row.policy = args.policy;
  row.flows = static_cast<int>(cfg.scenario.flows.size());
  row.scale = cfg.scenario.mobility.dynamic_scale;
  row.seed = cfg.scenario.seed;
  row.config_hash = to_hex(config_hash(cfg));
  row.weights_hash = net ? to_hex(weights_hash(*net)) : "";
  write_rows({row}, args.out);
  return 0;
}

struct TrainArgs {
  std::string config_path;
  std::string out_dir = "train_out";
  std::string reward;
  std::optional<std::uint64_t> seed;
  std::optional<long long> total_steps;
  bool quiet = false;
};

int run_train(const TrainArgs& args) {
  Config cfg = load_config_file(args.config_path);
  if (args.seed) cfg.scenario.seed = *args.seed;
  if (args.total_steps) cfg.training.ppo.total_steps = *args.total_steps;
  if (!args.reward.empty()) {
    if (args.reward == "srr_mimic") {
      cfg.training.reward.mode = RewardMode::SrrMimic;
    } else if (args.reward == "overhead_min") {
      cfg.training.reward.mode = RewardMode::OverheadMin;
    } else {
      std::cerr << "train: unknown reward mode '" << args.reward << "'\n";
      return 1;
    }
  }

  std::filesystem::create_directories(args.out_dir);
  emit_effective_config(cfg, args.out_dir + "/effective_config.json");

  std::ostream* log = args.quiet ? nullptr : &std::cout;
  if (log) *log << curve_csv_header() << '\n';
  const TrainResult result = train(cfg, args.out_dir, log);
  std::cout << "trained " << result.steps << " steps over "
            << result.iterations << " iterations; weights at " << args.out_dir
            << "/weights.json\n";
  return 0;
}

struct EvalArgs {
  std::string config_path;
  std::string weights_path;
  std::string out;
  std::string effective_path;
  std::vector<int> n_values{12};
  std::vector<int> flow_counts{1};
  std::vector<double> scales{1.0};
  int seeds = 1;
  int jobs = 1;
  bool include_cq = false;
};

int run_evaluate(const EvalArgs& args, bool weights_required) {
  Config cfg = load_config_file(args.config_path);

  std::unique_ptr<PolicyNetwork> net;
  if (!args.weights_path.empty()) {
    net = std::make_unique<PolicyNetwork>(load_weights(args.weights_path));
    if (net->input_dim() != observation_length(cfg.scenario.k_best)) {
      std::cerr << "evaluate: weights expect input " << net->input_dim()
                << " but k_best " << cfg.scenario.k_best << " gives "
                << observation_length(cfg.scenario.k_best) << "\n";
      return 1;
    }
  } else if (weights_required) {
    std::cerr << "evaluate: --weights is required\n";
    return 1;
  }

  emit_effective_config(cfg, args.effective_path.empty()
                                 ? effective_path_for(args.out)
                                 : args.effective_path);

  EvalSpec spec;
  spec.n_values = args.n_values;
  spec.flow_counts = args.flow_counts;
  spec.scales = args.scales;
  spec.seeds = args.seeds;
  spec.jobs = args.jobs;
  spec.include_cq = args.include_cq;
  write_rows(evaluate_matrix(cfg, net.get(), spec), args.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event MANET routing lab: confidence-based Q-routing "
               "with selective broadcast, and its learned replacement"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* sim_cmd =
      app.add_subcommand("simulate", "Run one episode and print its metrics");
  sim_cmd->add_option("--config", sim_args.config_path, "Scenario config file")
      ->required();
  sim_cmd->add_option("--policy", sim_args.policy,
                      "Routing policy: cq, cq+, or deepcq+");
  sim_cmd->add_option("--weights", sim_args.weights_path,
                      "Weights file (deepcq+ only)");
  sim_cmd->add_option("--seed", sim_args.seed, "Override the config seed");
  sim_cmd->add_option("--out", sim_args.out, "Metrics CSV path (default stdout)");
  sim_cmd->add_option("--trace", sim_args.trace_path, "Event trace output path");
  sim_cmd->add_option("--effective-config", sim_args.effective_path,
                      "Effective config output path");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the shared policy");
  train_cmd->add_option("--config", train_args.config_path, "Config file")
      ->required();
  train_cmd->add_option("--out-dir", train_args.out_dir,
                        "Output directory for weights/curves");
  train_cmd->add_option("--reward", train_args.reward,
                        "Override reward mode: srr_mimic or overhead_min");
  train_cmd->add_option("--seed", train_args.seed, "Override the config seed");
  train_cmd->add_option("--total-steps", train_args.total_steps,
                        "Override the training step budget");
  train_cmd->add_flag("--quiet", train_args.quiet, "No per-iteration output");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Paired comparison of cq+ and deepcq+ over a grid");
  eval_cmd->add_option("--config", eval_args.config_path, "Base config file")
      ->required();
  eval_cmd->add_option("--weights", eval_args.weights_path, "Weights file");
  eval_cmd->add_option("--n", eval_args.n_values, "Network sizes")
      ->delimiter(',');
  eval_cmd->add_option("--flows", eval_args.flow_counts, "Flow counts")
      ->delimiter(',');
  eval_cmd->add_option("--scales", eval_args.scales, "Dynamic level scales")
      ->delimiter(',');
  eval_cmd->add_option("--seeds", eval_args.seeds, "Paired seeds per cell");
  eval_cmd->add_option("--jobs", eval_args.jobs, "Parallel workers");
  eval_cmd->add_flag("--include-cq", eval_args.include_cq,
                     "Also run the always-unicast baseline");
  eval_cmd->add_option("--out", eval_args.out, "CSV path (default stdout)");
  eval_cmd->add_option("--effective-config", eval_args.effective_path,
                       "Effective config output path");

  EvalArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "Grid sweep over sizes/flows/scales/seeds (weights optional)");
  sweep_cmd->add_option("--config", sweep_args.config_path, "Base config file")
      ->required();
  sweep_cmd->add_option("--weights", sweep_args.weights_path, "Weights file");
  sweep_cmd->add_option("--n", sweep_args.n_values, "Network sizes")
      ->delimiter(',');
  sweep_cmd->add_option("--flows", sweep_args.flow_counts, "Flow counts")
      ->delimiter(',');
  sweep_cmd->add_option("--scales", sweep_args.scales, "Dynamic level scales")
      ->delimiter(',');
  sweep_cmd->add_option("--seeds", sweep_args.seeds, "Seeds per cell");
  sweep_cmd->add_option("--jobs", sweep_args.jobs, "Parallel workers");
  sweep_cmd->add_option("--out", sweep_args.out, "CSV path (default stdout)");
  sweep_cmd->add_option("--effective-config", sweep_args.effective_path,
                        "Effective config output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_cmd->parsed()) return run_simulate(sim_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (eval_cmd->parsed()) return run_evaluate(eval_args, true);
    if (sweep_cmd->parsed()) {
      sweep_args.include_cq = true;
      return run_evaluate(sweep_args, false);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
