// Command-line front end: demo collection, training, evaluation, replay
// traces, and learning-curve plots.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "augairl/eval.hpp"
#include "augairl/expert.hpp"
#include "augairl/train.hpp"

namespace {

using namespace augairl;

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw config_error("invalid config: key '" + key + "' is not a number: " + v);
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw config_error("invalid config: key '" + key +
                       "' is not an integer: " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw config_error("invalid config: key '" + key + "' is not a bool: " + v);
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::istringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(int(to_int(key, cell)));
  if (out.empty()) throw config_error("invalid config: key '" + key + "' empty");
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Plain `key = value` lines under `[section]` headers; '#' starts a comment.
void apply_config_file(const std::string& path, TrainConfig& cfg,
                       ExpertConfig& expert) {
  std::ifstream in(path);
  if (!in) throw config_error("invalid config: cannot open file " + path);
  std::string line, section = "train";
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("invalid config: line " + std::to_string(lineno) +
                         " of " + path + " has no '='");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "train.algo") cfg.algo = algo_from_name(val);
    else if (key == "train.iterations") cfg.iterations = int(to_int(key, val));
    else if (key == "train.horizon") cfg.horizon = int(to_int(key, val));
    else if (key == "train.demo_path") cfg.demo_path = val;
    else if (key == "train.seed") cfg.seed = std::uint64_t(to_int(key, val));
    else if (key == "train.checkpoint_interval")
      cfg.checkpoint_interval = int(to_int(key, val));
    else if (key == "train.shaping_ablation")
      cfg.shaping_ablation = to_bool(key, val);
    else if (key == "train.policy_hidden") cfg.policy_hidden = to_int_list(key, val);
    else if (key == "train.value_hidden") cfg.value_hidden = to_int_list(key, val);
    else if (key == "train.disc_hidden") cfg.disc_hidden = to_int_list(key, val);
    else if (key == "train.disc_lr") cfg.disc_lr = to_double(key, val);
    else if (key == "train.disc_batch") cfg.disc_batch = int(to_int(key, val));
    else if (key == "train.disc_epochs") cfg.disc_epochs = int(to_int(key, val));
    else if (key == "train.value_lr") cfg.value_lr = to_double(key, val);
    else if (key == "train.value_epochs") cfg.value_epochs = int(to_int(key, val));
    else if (key == "train.bc_epochs") cfg.bc_epochs = int(to_int(key, val));
    else if (key == "train.bc_lr") cfg.bc_lr = to_double(key, val);

    else if (key == "trpo.max_kl") cfg.trpo.max_kl = to_double(key, val);
    else if (key == "trpo.cg_iters") cfg.trpo.cg_iters = int(to_int(key, val));
    else if (key == "trpo.cg_damping") cfg.trpo.cg_damping = to_double(key, val);
    else if (key == "trpo.backtrack_steps")
      cfg.trpo.backtrack_steps = int(to_int(key, val));
    else if (key == "trpo.backtrack_ratio")
      cfg.trpo.backtrack_ratio = to_double(key, val);
    else if (key == "trpo.gamma") cfg.trpo.gamma = to_double(key, val);
    else if (key == "trpo.gae_lambda") cfg.trpo.gae_lambda = to_double(key, val);

    else if (key == "traffic.segment_length")
      cfg.traffic.segment_length = to_double(key, val);
    else if (key == "traffic.init_speed_min")
      cfg.traffic.init_speed_min = to_double(key, val);
    else if (key == "traffic.init_speed_max")
      cfg.traffic.init_speed_max = to_double(key, val);
    else if (key == "traffic.desired_speed_min")
      cfg.traffic.desired_speed_min = to_double(key, val);
    else if (key == "traffic.desired_speed_max")
      cfg.traffic.desired_speed_max = to_double(key, val);
    else if (key == "traffic.time_gap_min")
      cfg.traffic.time_gap_min = to_double(key, val);
    else if (key == "traffic.time_gap_max")
      cfg.traffic.time_gap_max = to_double(key, val);
    else if (key == "traffic.density_multipliers") {
      const auto parts = to_int_list(key, val);  // reuse list splitting
      std::istringstream ss(val);
      std::string cell;
      std::size_t i = 0;
      (void)parts;
      while (std::getline(ss, cell, ',') && i < 3)
        cfg.traffic.density_multipliers[i++] = to_double(key, trim(cell));
      if (i != 3)
        throw config_error("invalid config: key '" + key + "' needs 3 values");
    } else if (key == "traffic.yield_overlap_fraction")
      cfg.traffic.yield_overlap_fraction = to_double(key, val);
    else if (key == "traffic.yield_lat_speed")
      cfg.traffic.yield_lat_speed = to_double(key, val);
    else if (key == "traffic.yield_probability")
      cfg.traffic.yield_probability = to_double(key, val);

    else if (key == "expert.jerk_threshold")
      expert.jerk_threshold = to_double(key, val);
    else if (key == "expert.safety_buffer")
      expert.safety_buffer = to_double(key, val);
    else if (key == "expert.prediction_horizon")
      expert.prediction_horizon = int(to_int(key, val));

    else
      throw config_error("invalid config: unknown key '" + key + "' in " + path);
  }
}

int run_collect(int episodes, std::uint64_t seed, const std::string& out,
                const std::string& config_path) {
  TrainConfig cfg;
  ExpertConfig expert;
  if (!config_path.empty()) apply_config_file(config_path, cfg, expert);
  const DemoDataset ds = collect_demos(episodes, seed, cfg.traffic, expert);
  save_dataset(ds, out);
  std::cout << "wrote " << ds.count << " trajectories to " << out << "\n";
  return 0;
}

int run_train(TrainConfig cfg, const std::string& out_dir) {
  const auto logs = train(cfg, out_dir);
  std::cout << "trained " << algo_name(cfg.algo) << " for " << logs.size()
            << " iterations; final success ratio "
            << (logs.empty() ? 0.0 : logs.back().success_ratio) << "\n";
  return 0;
}

int run_evaluate(const std::string& ckpt_path, int episodes,
                 std::uint64_t seed, const std::string& csv_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const CheckpointReport r = run_eval(ckpt, episodes, seed);
  emit_csv({r}, csv_path);
  std::cout << "episodes " << r.episodes << "  success " << r.success_mean
            << "  reward " << r.reward_mean << "  decision_steps "
            << r.decision_mean << "  changing_steps " << r.changing_mean
            << "\n";
  return 0;
}

int run_replay(const std::string& ckpt_path, std::uint64_t seed,
               const std::string& trace_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const MlpNet policy = policy_from_checkpoint(ckpt);
  write_trace(greedy_policy(policy), TrafficConfig{}, seed, trace_path);
  std::cout << "trace written to " << trace_path << "\n";
  return 0;
}

int run_plot(const std::vector<std::string>& runs, const std::string& out) {
  emit_curves(runs, out);
  std::cout << "curves written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"highway lane-change imitation-learning testbed"};
  app.require_subcommand(1);

  // collect
  auto* collect = app.add_subcommand("collect", "collect expert demonstrations");
  int c_episodes = 50;
  std::uint64_t c_seed = 0;
  std::string c_out, c_config;
  collect->add_option("--episodes", c_episodes, "episodes to run")->required();
  collect->add_option("--seed", c_seed, "base seed")->required();
  collect->add_option("--out", c_out, "output demos.jsonl path")->required();
  collect->add_option("--config", c_config, "config file");

  // train
  auto* tr = app.add_subcommand("train", "train an algorithm");
  std::string t_algo = "augairl", t_demos, t_out, t_config;
  int t_iters = -1, t_horizon = -1;
  std::uint64_t t_seed = 0;
  bool t_ablation = false;
  tr->add_option("--algo", t_algo, "augairl|airl|gail|trpo|bc-trpo");
  tr->add_option("--demos", t_demos, "demos.jsonl path");
  tr->add_option("--iters", t_iters, "training iterations");
  tr->add_option("--horizon", t_horizon, "steps per iteration");
  auto* t_seed_opt = tr->add_option("--seed", t_seed, "seed");
  tr->add_option("--out", t_out, "run directory")->required();
  tr->add_option("--config", t_config, "config file");
  tr->add_flag("--shaping-ablation", t_ablation,
               "add the semantic signal directly to the generator reward");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string e_ckpt, e_csv;
  int e_episodes = 50;
  std::uint64_t e_seed = 0;
  ev->add_option("--checkpoint", e_ckpt, "checkpoint path")->required();
  ev->add_option("--episodes", e_episodes, "episodes");
  ev->add_option("--seed", e_seed, "seed")->required();
  ev->add_option("--csv", e_csv, "report CSV path")->required();

  // replay
  auto* rp = app.add_subcommand("replay", "emit a per-tick trace");
  std::string r_ckpt, r_trace;
  std::uint64_t r_seed = 0;
  rp->add_option("--checkpoint", r_ckpt, "checkpoint path")->required();
  rp->add_option("--seed", r_seed, "seed")->required();
  rp->add_option("--trace", r_trace, "trace JSONL path")->required();

  // plot
  auto* pl = app.add_subcommand("plot", "learning-curve SVG from run dirs");
  std::vector<std::string> p_runs;
  std::string p_out;
  pl->add_option("--runs", p_runs, "run directories")->required();
  pl->add_option("--out", p_out, "output .svg path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (*collect) return run_collect(c_episodes, c_seed, c_out, c_config);
    if (*tr) {
      TrainConfig cfg;
      ExpertConfig expert_unused;
      if (!t_config.empty()) apply_config_file(t_config, cfg, expert_unused);
      // explicit flags override the file
      if (tr->count("--algo") || t_config.empty()) cfg.algo = algo_from_name(t_algo);
      if (!t_demos.empty()) cfg.demo_path = t_demos;
      if (t_iters >= 0) cfg.iterations = t_iters;
      if (t_horizon > 0) cfg.horizon = t_horizon;
      if (t_seed_opt->count()) cfg.seed = t_seed;
      if (t_ablation) cfg.shaping_ablation = true;
      return run_train(cfg, t_out);
    }
    if (*ev) return run_evaluate(e_ckpt, e_episodes, e_seed, e_csv);
    if (*rp) return run_replay(r_ckpt, r_seed, r_trace);
    if (*pl) return run_plot(p_runs, p_out);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
