#pragma once

#include <Eigen/Dense>
#include <vector>

#include "augairl/nn.hpp"
#include "augairl/sim.hpp"

namespace augairl {

constexpr int kDiscInputDim = kObsDim + kNumActions;  // obs + one-hot action

struct SemanticEventVector {
  // [success, crash, margin invasion, lateral move], 0/1 per transition
  Eigen::Vector4d indicators = Eigen::Vector4d::Zero();
  static SemanticEventVector from_events(const StepEvents& ev);
};

struct SemanticRewardSpec {
  Eigen::Vector4d base_values{15.0, -30.0, -1.0, 0.3};
  Eigen::Vector4d weights = Eigen::Vector4d::Ones();
};

double semantic_reward(const SemanticEventVector& events,
                       const SemanticRewardSpec& spec);

enum class DiscriminatorMode { airl_plain, airl_augmented, gail };

struct DiscriminatorModel {
  MlpNet f_net;  // helper network f_theta: 49 -> 1
  SemanticRewardSpec semantic;
  DiscriminatorMode mode = DiscriminatorMode::airl_augmented;

  static DiscriminatorModel make(DiscriminatorMode mode, std::uint64_t seed,
                                 const std::vector<int>& hidden = {512, 512});
};

// Scaled observation + one-hot action, the discriminator input.
Eigen::VectorXd disc_input(const ObservationVector& obs, int action);

// D = sigma(f + r_sem.w_sem - log pi), logistic form
double augmented_disc(const ObservationVector& obs, int action,
                      const SemanticEventVector& events, double log_pi,
                      const DiscriminatorModel& model);
// log D - log(1-D) = f + r_sem.w_sem - log pi
double generator_reward(const ObservationVector& obs, int action,
                        const SemanticEventVector& events, double log_pi,
                        const DiscriminatorModel& model);
// per-sample generator objective log(1-D) - log D (= -generator_reward)
double generator_objective(double discriminator_output);

double gail_disc(const ObservationVector& obs, int action,
                 const DiscriminatorModel& model);
double gail_reward(const ObservationVector& obs, int action,
                   const DiscriminatorModel& model);

struct DiscBatch {
  // columns are samples
  Eigen::MatrixXd inputs;       // kDiscInputDim x n
  Eigen::MatrixXd event_rows;   // 4 x n semantic indicators
  Eigen::VectorXd log_pi;       // current-policy log prob per sample
};

struct DiscGradients {
  double loss = 0.0;
  Eigen::VectorXd f_params;
  Eigen::Vector4d semantic_weights = Eigen::Vector4d::Zero();
};

// Binary cross-entropy of D with expert labeled 1; gradients flow to
// f_net and to the trainable semantic weights. log_pi entries are constants.
DiscGradients disc_loss_and_grad(const DiscriminatorModel& model,
                                 const DiscBatch& expert_batch,
                                 const DiscBatch& policy_batch);

}  // namespace augairl
