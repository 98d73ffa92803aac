#include "augairl/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace augairl {

namespace {
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
double softplus(double z) {  // log(1 + e^z), stable
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}
}  // namespace

SemanticEventVector SemanticEventVector::from_events(const StepEvents& ev) {
  SemanticEventVector v;
  v.indicators << double(ev.success), double(ev.crash),
      double(ev.margin_invasion), double(ev.lateral_move);
  return v;
}

double semantic_reward(const SemanticEventVector& events,
                       const SemanticRewardSpec& spec) {
  return (spec.base_values.array() * spec.weights.array() *
          events.indicators.array())
      .sum();
}

DiscriminatorModel DiscriminatorModel::make(DiscriminatorMode mode,
                                            std::uint64_t seed,
                                            const std::vector<int>& hidden) {
  MlpSpec spec;
  spec.input_dim = kDiscInputDim;
  spec.hidden_dims = hidden;
  spec.output_dim = 1;
  spec.hidden_activation = Activation::Relu;
  DiscriminatorModel m{MlpNet::initialized(spec, seed), {}, mode};
  if (mode != DiscriminatorMode::airl_augmented)
    m.semantic.weights.setZero();
  return m;
}

Eigen::VectorXd disc_input(const ObservationVector& obs, int action) {
  if (obs.size() != kObsDim)
    throw std::invalid_argument("disc_input: bad observation length");
  if (action < 0 || action >= kNumActions)
    throw std::invalid_argument("disc_input: bad action");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(kDiscInputDim);
  x.head(kObsDim) = obs.array() / observation_feature_scale().array();
  x(kObsDim + action) = 1.0;
  return x;
}

namespace {
double disc_score(const ObservationVector& obs, int action,
                  const SemanticEventVector& events,
                  const DiscriminatorModel& model) {
  const double f = model.f_net.forward(disc_input(obs, action))(0);
  if (model.mode == DiscriminatorMode::gail) return f;
  return f + semantic_reward(events, model.semantic);
}
}  // namespace

double augmented_disc(const ObservationVector& obs, int action,
                      const SemanticEventVector& events, double log_pi,
                      const DiscriminatorModel& model) {
  return sigmoid(disc_score(obs, action, events, model) - log_pi);
}

double generator_reward(const ObservationVector& obs, int action,
                        const SemanticEventVector& events, double log_pi,
                        const DiscriminatorModel& model) {
  return disc_score(obs, action, events, model) - log_pi;
}

double generator_objective(double d) {
  return std::log(std::max(1.0 - d, 1e-12)) - std::log(std::max(d, 1e-12));
}

double gail_disc(const ObservationVector& obs, int action,
                 const DiscriminatorModel& model) {
  return sigmoid(model.f_net.forward(disc_input(obs, action))(0));
}

double gail_reward(const ObservationVector& obs, int action,
                   const DiscriminatorModel& model) {
  // log D - log(1-D) collapses to the raw logit
  return model.f_net.forward(disc_input(obs, action))(0);
}

DiscGradients disc_loss_and_grad(const DiscriminatorModel& model,
                                 const DiscBatch& expert_batch,
                                 const DiscBatch& policy_batch) {
  const Eigen::Index ne = expert_batch.inputs.cols();
  const Eigen::Index np = policy_batch.inputs.cols();
  if (ne == 0 || np == 0)
    throw std::invalid_argument("disc_loss_and_grad: empty batch");
  const double n = double(ne + np);
  const bool gail = model.mode == DiscriminatorMode::gail;

  DiscGradients out;
  out.f_params = Eigen::VectorXd::Zero(model.f_net.param_count());

  auto accumulate = [&](const DiscBatch& batch, bool expert) {
    const Eigen::Index m = batch.inputs.cols();
    const Eigen::MatrixXd f = model.f_net.forward_batch(batch.inputs);
    Eigen::MatrixXd dz(1, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      double z = f(0, i);
      if (!gail) {
        z += (model.semantic.base_values.array() *
              model.semantic.weights.array() *
              batch.event_rows.col(i).array())
                 .sum();
        z -= batch.log_pi(i);
      }
      const double d = sigmoid(z);
      // expert: -log D = softplus(-z); policy: -log(1-D) = softplus(z)
      out.loss += expert ? softplus(-z) : softplus(z);
      const double g = (expert ? d - 1.0 : d) / n;
      dz(0, i) = g;
      if (!gail)
        out.semantic_weights.array() += g * model.semantic.base_values.array() *
                                        batch.event_rows.col(i).array();
    }
    out.f_params += model.f_net.backward_batch(batch.inputs, dz);
  };
  accumulate(expert_batch, true);
  accumulate(policy_batch, false);
  out.loss /= n;
  return out;
}

}  // namespace augairl
