#pragma once

#include <Eigen/Dense>
#include <functional>

#include "augairl/expert.hpp"
#include "augairl/nn.hpp"
#include "augairl/sim.hpp"

namespace augairl {

struct TrpoConfig {
  double max_kl = 0.01;
  int cg_iters = 10;
  double cg_damping = 0.1;
  int backtrack_steps = 10;
  double backtrack_ratio = 0.8;
  double gamma = 0.99;
  double gae_lambda = 0.95;
};

// Aligned per-step rollout data; inputs are the scaled observations
// (columns are steps).
struct RolloutBatch {
  Eigen::MatrixXd inputs;            // kObsDim x T, scaled
  std::vector<int> actions;
  Eigen::VectorXd rewards;
  std::vector<bool> dones;
  Eigen::VectorXd behavior_logprobs;
  Eigen::VectorXd values;            // T + 1 incl. bootstrap
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

Eigen::VectorXd policy_input(const ObservationVector& obs);

// advantages/returns via the GAE recursion; values must carry the bootstrap
// entry for the post-horizon state (0 when the last step terminated)
void compute_gae(const Eigen::VectorXd& rewards,
                 const Eigen::VectorXd& values, const std::vector<bool>& dones,
                 double gamma, double lambda, Eigen::VectorXd& advantages,
                 Eigen::VectorXd& returns);
void normalize_advantages(Eigen::VectorXd& advantages);

struct SurrogateResult {
  double loss = 0.0;  // -mean(ratio * advantage)
  Eigen::VectorXd gradient;
};
SurrogateResult surrogate_and_grad(const MlpNet& policy,
                                   const RolloutBatch& batch);
double surrogate_loss(const MlpNet& policy, const RolloutBatch& batch);

double mean_kl(const Eigen::MatrixXd& old_logits, const MlpNet& policy,
               const RolloutBatch& batch);

// (H + damping I) v where H is the Hessian of the mean KL at the current
// parameters (the Fisher information of the categorical policy)
Eigen::VectorXd fisher_vector_product(const MlpNet& policy,
                                      const RolloutBatch& batch,
                                      const Eigen::VectorXd& v,
                                      double damping);

Eigen::VectorXd conjugate_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_A,
    const Eigen::VectorXd& b, int iters, double tol = 1e-10);

struct TrpoUpdateResult {
  double kl_after = 0.0;
  double surrogate_improvement = 0.0;
  bool accepted = false;
};
TrpoUpdateResult trpo_update(MlpNet& policy, const RolloutBatch& batch,
                             const TrpoConfig& cfg);

// Supervised max-likelihood on expert state-action pairs. batch_size 0 runs
// full-batch gradient descent. Returns the final epoch's mean NLL.
double bc_train(MlpNet& policy, const Eigen::MatrixXd& inputs,
                const std::vector<int>& actions, int epochs, double lr,
                int batch_size, std::uint64_t shuffle_seed);
double bc_train(MlpNet& policy, const DemoDataset& demos, int epochs,
                double lr = 1e-3, int batch_size = 256,
                std::uint64_t shuffle_seed = 0);

// MSE regression of the returns; returns the final epoch's mean loss.
double fit_value(MlpNet& valuenet, const Eigen::MatrixXd& inputs,
                 const Eigen::VectorXd& returns, int epochs, double lr,
                 int batch_size, std::uint64_t shuffle_seed);

}  // namespace augairl
