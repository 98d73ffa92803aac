#pragma once

#include <functional>
#include <string>
#include <vector>

#include "augairl/sim.hpp"
#include "augairl/train.hpp"

namespace augairl {

struct EpisodeMetrics {
  bool success = false;
  int decision_steps = 0;
  int changing_steps = 0;   // final lateral traverse
  int aborted_span_steps = 0;
  double total_reward = 0.0;  // crafted-reward sum
};

struct CheckpointReport {
  int iteration = 0;
  int episodes = 0;
  double reward_mean = 0.0, reward_std = 0.0;
  double success_mean = 0.0, success_std = 0.0;
  double decision_mean = 0.0, decision_std = 0.0;
  double changing_mean = 0.0, changing_std = 0.0;
  bool has_disc_loss = false;
  double disc_loss_mean = 0.0, disc_loss_std = 0.0;
};

using PolicyFn = std::function<int(const WorldState&)>;

PolicyFn greedy_policy(const MlpNet& policy);
PolicyFn expert_policy(const ExpertConfig& cfg = {});
PolicyFn random_policy(std::uint64_t seed);

EpisodeMetrics run_episode(const PolicyFn& act, const TrafficConfig& config,
                           std::uint64_t seed);

CheckpointReport run_eval(const Checkpoint& ckpt, int n_episodes,
                          std::uint64_t seed,
                          const TrafficConfig& config = {});
CheckpointReport run_eval(const PolicyFn& act, int n_episodes,
                          std::uint64_t seed,
                          const TrafficConfig& config = {});

double success_ratio(const std::vector<EpisodeMetrics>& episodes);
int decision_steps(const EpisodeMetrics& ep);
int changing_steps(const EpisodeMetrics& ep);

void emit_csv(const std::vector<CheckpointReport>& reports,
              const std::string& path);
// 4-panel SVG, one polyline per run directory, dashed expert reference lines
void emit_curves(const std::vector<std::string>& run_dirs,
                 const std::string& path);

// per-tick JSON-lines trace of an episode driven by a checkpoint policy
void write_trace(const PolicyFn& act, const TrafficConfig& config,
                 std::uint64_t seed, const std::string& path);

}  // namespace augairl
