#include "augairl/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace augairl {

PolicyFn greedy_policy(const MlpNet& policy) {
  return [policy](const WorldState& w) {
    const Eigen::VectorXd logits =
        policy.forward(policy_input(build_observation(w)));
    return categorical_argmax(logits);
  };
}

PolicyFn expert_policy(const ExpertConfig& cfg) {
  return [cfg](const WorldState& w) { return expert_action(w, cfg); };
}

PolicyFn random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng](const WorldState&) { return int((*rng)() % kNumActions); };
}

EpisodeMetrics run_episode(const PolicyFn& act, const TrafficConfig& config,
                           std::uint64_t seed) {
  WorldState w = reset(config, seed);
  EpisodeMetrics m;
  int span = 0;
  while (!w.terminated) {
    const int action = act(w);
    const WorldState prev = w;
    const StepResult sr = step(w, action);
    m.total_reward += crafted_reward(prev, w, sr.outcome);
    if (sr.outcome.events.lateral_move) {
      ++span;
    } else if (prev.maneuver_phase == ManeuverPhase::lateral_in_progress) {
      m.aborted_span_steps += span;
      span = 0;
    }
  }
  m.success = w.termination_reason == TerminationReason::success;
  m.decision_steps = w.time_step;
  m.changing_steps = span;
  return m;
}

double success_ratio(const std::vector<EpisodeMetrics>& episodes) {
  if (episodes.empty())
    throw std::invalid_argument("success_ratio: no episodes");
  double s = 0.0;
  for (const auto& ep : episodes) s += ep.success ? 1.0 : 0.0;
  return s / double(episodes.size());
}

int decision_steps(const EpisodeMetrics& ep) { return ep.decision_steps; }
int changing_steps(const EpisodeMetrics& ep) { return ep.changing_steps; }

namespace {
std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= double(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / double(xs.size()))};
}
}  // namespace

CheckpointReport run_eval(const PolicyFn& act, int n_episodes,
                          std::uint64_t seed, const TrafficConfig& config) {
  if (n_episodes < 1) throw std::invalid_argument("run_eval: need episodes");
  std::vector<double> rewards, successes, decisions, changings;
  for (int i = 0; i < n_episodes; ++i) {
    const EpisodeMetrics m =
        run_episode(act, config, derive_seed(seed, kEvalSeedTag, uint64_t(i)));
    rewards.push_back(m.total_reward);
    successes.push_back(m.success ? 1.0 : 0.0);
    decisions.push_back(double(m.decision_steps));
    changings.push_back(double(m.changing_steps));
  }
  CheckpointReport r;
  r.episodes = n_episodes;
  std::tie(r.reward_mean, r.reward_std) = mean_std(rewards);
  std::tie(r.success_mean, r.success_std) = mean_std(successes);
  std::tie(r.decision_mean, r.decision_std) = mean_std(decisions);
  std::tie(r.changing_mean, r.changing_std) = mean_std(changings);
  return r;
}

CheckpointReport run_eval(const Checkpoint& ckpt, int n_episodes,
                          std::uint64_t seed, const TrafficConfig& config) {
  const MlpNet policy = policy_from_checkpoint(ckpt);
  CheckpointReport r = run_eval(greedy_policy(policy), n_episodes, seed, config);
  r.iteration = ckpt.iteration;
  // discriminator loss is a training-time quantity; report its trailing
  // window from the checkpoint's metric log
  if (!ckpt.disc_dims.empty() && !ckpt.metric_log_csv.empty()) {
    std::istringstream ss(ckpt.metric_log_csv);
    std::string line;
    std::getline(ss, line);  // header
    std::vector<double> losses;
    while (std::getline(ss, line)) {
      std::istringstream row(line);
      std::string cell;
      for (int c = 0; c < 6 && std::getline(row, cell, ','); ++c)
        if (c == 5) losses.push_back(std::stod(cell));
    }
    if (losses.size() > 50) losses.erase(losses.begin(), losses.end() - 50);
    if (!losses.empty()) {
      r.has_disc_loss = true;
      std::tie(r.disc_loss_mean, r.disc_loss_std) = mean_std(losses);
    }
  }
  return r;
}

void emit_csv(const std::vector<CheckpointReport>& reports,
              const std::string& path) {
  if (reports.empty()) throw std::invalid_argument("emit_csv: no reports");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_csv: cannot open " + path);
  out << "iteration,episodes,reward_mean,reward_std,success_mean,success_std,"
         "decision_mean,decision_std,changing_mean,changing_std,"
         "disc_loss_mean,disc_loss_std\n";
  out.precision(17);
  for (const auto& r : reports) {
    out << r.iteration << ',' << r.episodes << ',' << r.reward_mean << ','
        << r.reward_std << ',' << r.success_mean << ',' << r.success_std << ','
        << r.decision_mean << ',' << r.decision_std << ',' << r.changing_mean
        << ',' << r.changing_std << ',';
    if (r.has_disc_loss)
      out << r.disc_loss_mean << ',' << r.disc_loss_std;
    else
      out << ',';
    out << "\n";
  }
  if (!out) throw std::runtime_error("emit_csv: write failed for " + path);
}

// ---- SVG curves -----------------------------------------------------------

namespace {

struct RunCurve {
  std::string name;
  std::vector<double> iterations;
  std::array<std::vector<double>, 4> metrics;  // reward, success, dec, chg
};

RunCurve load_run_curve(const std::string& dir) {
  std::ifstream in(dir + "/log.csv");
  if (!in) throw std::runtime_error("emit_curves: missing log.csv in " + dir);
  RunCurve c;
  c.name = dir;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() < 5) continue;
    c.iterations.push_back(cells[0]);
    c.metrics[0].push_back(cells[1]);
    c.metrics[1].push_back(cells[2]);
    c.metrics[2].push_back(cells[3]);
    c.metrics[3].push_back(cells[4]);
  }
  if (c.iterations.empty())
    throw std::runtime_error("emit_curves: empty log.csv in " + dir);
  return c;
}

const char* kPanelTitles[4] = {"Total reward", "Success ratio",
                               "Decision steps", "Changing steps"};
const char* kRunColors[8] = {"#d62728", "#ff7f0e", "#1f77b4", "#2ca02c",
                             "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

void emit_curves(const std::vector<std::string>& run_dirs,
                 const std::string& path) {
  if (run_dirs.empty()) throw std::invalid_argument("emit_curves: no runs");
  std::vector<RunCurve> curves;
  for (const auto& dir : run_dirs) curves.push_back(load_run_curve(dir));

  // expert reference values, fixed-seed so output is reproducible
  const CheckpointReport expert_ref =
      run_eval(expert_policy(), 20, 0xe0, TrafficConfig{});
  const double expert_vals[4] = {expert_ref.reward_mean, expert_ref.success_mean,
                                 expert_ref.decision_mean,
                                 expert_ref.changing_mean};

  const double pw = 380, ph = 260, margin = 45;
  std::ostringstream svg;
  svg.precision(12);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * pw
      << "\" height=\"" << 2 * ph << "\">\n";
  for (int panel = 0; panel < 4; ++panel) {
    const double ox = (panel % 2) * pw, oy = (panel / 2) * ph;
    double lo = expert_vals[panel], hi = expert_vals[panel];
    double it_max = 1.0;
    for (const auto& c : curves) {
      for (double v : c.metrics[size_t(panel)]) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      it_max = std::max(it_max, c.iterations.back());
    }
    if (hi - lo < 1e-9) hi = lo + 1.0;
    auto sx = [&](double it) {
      return ox + margin + (pw - 2 * margin) * it / it_max;
    };
    auto sy = [&](double v) {
      return oy + ph - margin - (ph - 2 * margin) * (v - lo) / (hi - lo);
    };
    svg << "<rect class=\"panel\" x=\"" << ox + margin << "\" y=\""
        << oy + margin << "\" width=\"" << pw - 2 * margin << "\" height=\""
        << ph - 2 * margin << "\" fill=\"none\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << ox + pw / 2 << "\" y=\"" << oy + margin - 10
        << "\" text-anchor=\"middle\" font-size=\"14\">" << kPanelTitles[panel]
        << "</text>\n";
    svg << "<line class=\"expert\" x1=\"" << sx(0) << "\" y1=\""
        << sy(expert_vals[panel]) << "\" x2=\"" << sx(it_max) << "\" y2=\""
        << sy(expert_vals[panel])
        << "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
    for (std::size_t r = 0; r < curves.size(); ++r) {
      svg << "<polyline class=\"run\" fill=\"none\" stroke=\""
          << kRunColors[r % 8] << "\" points=\"";
      const auto& c = curves[r];
      for (std::size_t i = 0; i < c.iterations.size(); ++i)
        svg << sx(c.iterations[i]) << ',' << sy(c.metrics[size_t(panel)][i])
            << ' ';
      svg << "\"/>\n";
    }
  }
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_curves: cannot open " + path);
  out << svg.str();
  if (!out) throw std::runtime_error("emit_curves: write failed for " + path);
}

void write_trace(const PolicyFn& act, const TrafficConfig& config,
                 std::uint64_t seed, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace: cannot open " + path);
  WorldState w = reset(config, seed);
  auto emit_tick = [&](const StepEvents& ev) {
    auto veh_line = [&](const VehicleState& v) {
      nlohmann::json j{{"t", w.time_step},       {"id", v.id},
                       {"lon_pos", v.lon_pos},   {"lat_pos", v.lat_pos},
                       {"lon_speed", v.lon_speed},
                       {"lane_index", v.lane_index},
                       {"success", ev.success},  {"crash", ev.crash},
                       {"margin_invasion", ev.margin_invasion},
                       {"lateral_move", ev.lateral_move}};
      out << j.dump() << "\n";
    };
    veh_line(w.ego);
    for (const auto& v : w.others) veh_line(v);
  };
  emit_tick(StepEvents{});
  while (!w.terminated) {
    const int action = act(w);
    const StepResult sr = step(w, action);
    emit_tick(sr.outcome.events);
  }
  if (!out) throw std::runtime_error("write_trace: write failed for " + path);
}

}  // namespace augairl
