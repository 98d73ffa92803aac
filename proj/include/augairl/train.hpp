#pragma once

#include <string>
#include <vector>

#include "augairl/expert.hpp"
#include "augairl/nn.hpp"
#include "augairl/reward.hpp"
#include "augairl/sim.hpp"
#include "augairl/trpo.hpp"

namespace augairl {

enum class Algo { augairl, airl, gail, trpo, bc_trpo };

std::string algo_name(Algo a);
Algo algo_from_name(const std::string& name);

struct TrainConfig {
  Algo algo = Algo::augairl;
  int iterations = 15000;
  int horizon = 1024;
  std::string demo_path;
  std::uint64_t seed = 0;
  int checkpoint_interval = 3000;
  std::vector<int> policy_hidden = {100, 100};
  std::vector<int> value_hidden = {100, 100};
  std::vector<int> disc_hidden = {512, 512};
  TrpoConfig trpo;
  TrafficConfig traffic;
  SemanticRewardSpec semantic;
  bool shaping_ablation = false;
  // keep w_sem at its configured initial value (no discriminator updates
  // flow into the semantic weights)
  bool freeze_semantic_weights = false;
  double disc_lr = 3e-4;
  int disc_batch = 256;  // drawn equally from expert and policy data
  int disc_epochs = 2;   // m in the adversarial loop
  double value_lr = 1e-3;
  int value_epochs = 5;
  int bc_epochs = 20;
  double bc_lr = 1e-3;
};

struct IterationLog {
  int iteration = 0;
  double mean_total_reward = 0.0;
  double success_ratio = 0.0;
  double mean_decision_steps = 0.0;
  double mean_changing_steps = 0.0;
  double disc_loss = 0.0;  // NaN-free: 0 for non-imitation algorithms
  double kl_after = 0.0;
  double entropy = 0.0;
};

struct Checkpoint {
  int iteration = 0;
  Algo algo = Algo::augairl;
  std::vector<int> policy_dims;  // full layer dims incl. input/output
  std::vector<int> value_dims;
  std::vector<int> disc_dims;  // empty when the algorithm has no discriminator
  Eigen::VectorXd policy_params;
  Eigen::VectorXd value_params;
  Eigen::VectorXd disc_params;
  Eigen::Vector4d semantic_weights = Eigen::Vector4d::Zero();
  std::string rng_state;
  std::string metric_log_csv;
};

// Hand-crafted dense reward; also the "total reward" evaluation metric.
double crafted_reward(const WorldState& prev, const WorldState& next,
                      const StepOutcome& outcome);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

MlpNet policy_from_checkpoint(const Checkpoint& ckpt);

extern const char* kIterationLogHeader;
std::string iteration_log_row(const IterationLog& row);

// Runs the configured algorithm end to end; writes log.csv, interval
// checkpoints (ckpt_ITER.ckpt) and final.ckpt into out_dir.
// Returns the per-iteration logs.
std::vector<IterationLog> train(const TrainConfig& cfg,
                                const std::string& out_dir);

}  // namespace augairl
