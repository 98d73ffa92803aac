#include "augairl/trpo.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace augairl {

Eigen::VectorXd policy_input(const ObservationVector& obs) {
  return obs.array() / observation_feature_scale().array();
}

void compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                 const std::vector<bool>& dones, double gamma, double lambda,
                 Eigen::VectorXd& advantages, Eigen::VectorXd& returns) {
  const Eigen::Index t_max = rewards.size();
  if (values.size() != t_max + 1 || Eigen::Index(dones.size()) != t_max)
    throw std::invalid_argument("compute_gae: misaligned inputs");
  advantages.resize(t_max);
  returns.resize(t_max);
  double gae = 0.0;
  for (Eigen::Index t = t_max - 1; t >= 0; --t) {
    const double not_done = dones[size_t(t)] ? 0.0 : 1.0;
    const double delta =
        rewards(t) + gamma * not_done * values(t + 1) - values(t);
    gae = delta + gamma * lambda * not_done * gae;
    advantages(t) = gae;
    returns(t) = gae + values(t);
  }
}

void normalize_advantages(Eigen::VectorXd& adv) {
  const double mean = adv.mean();
  const double var = (adv.array() - mean).square().mean();
  const double std = std::sqrt(var);
  if (std < 1e-12) {
    adv.setZero();
    return;
  }
  adv = (adv.array() - mean) / std;
}

namespace {
// column-wise softmax probabilities
Eigen::MatrixXd batch_probs(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index i = 0; i < p.cols(); ++i) {
    Eigen::ArrayXd col = p.col(i).array() - p.col(i).maxCoeff();
    col = col.exp();
    p.col(i) = col / col.sum();
  }
  return p;
}
Eigen::VectorXd batch_logprob(const Eigen::MatrixXd& logits,
                              const std::vector<int>& actions) {
  Eigen::VectorXd lp(logits.cols());
  for (Eigen::Index i = 0; i < logits.cols(); ++i)
    lp(i) = categorical_logprob(logits.col(i), actions[size_t(i)]);
  return lp;
}
}  // namespace

SurrogateResult surrogate_and_grad(const MlpNet& policy,
                                   const RolloutBatch& batch) {
  const Eigen::Index t_max = batch.inputs.cols();
  const Eigen::MatrixXd logits = policy.forward_batch(batch.inputs);
  const Eigen::MatrixXd probs = batch_probs(logits);
  const Eigen::VectorXd logp = batch_logprob(logits, batch.actions);
  const Eigen::ArrayXd ratio =
      (logp.array() - batch.behavior_logprobs.array()).exp();

  SurrogateResult res;
  res.loss = -(ratio * batch.advantages.array()).mean();
  // d(-ratio_i A_i / T)/dlogits_i = -(ratio_i A_i / T)(e_a - p_i)
  Eigen::MatrixXd dlogits = probs;
  for (Eigen::Index i = 0; i < t_max; ++i) {
    const double c = -ratio(i) * batch.advantages(i) / double(t_max);
    dlogits.col(i) *= -c;
    dlogits(batch.actions[size_t(i)], i) += c;
  }
  res.gradient = policy.backward_batch(batch.inputs, dlogits);
  return res;
}

double surrogate_loss(const MlpNet& policy, const RolloutBatch& batch) {
  const Eigen::MatrixXd logits = policy.forward_batch(batch.inputs);
  const Eigen::VectorXd logp = batch_logprob(logits, batch.actions);
  const Eigen::ArrayXd ratio =
      (logp.array() - batch.behavior_logprobs.array()).exp();
  return -(ratio * batch.advantages.array()).mean();
}

double mean_kl(const Eigen::MatrixXd& old_logits, const MlpNet& policy,
               const RolloutBatch& batch) {
  const Eigen::MatrixXd new_logits = policy.forward_batch(batch.inputs);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < old_logits.cols(); ++i)
    kl += categorical_kl(old_logits.col(i), new_logits.col(i));
  return kl / double(old_logits.cols());
}

Eigen::VectorXd fisher_vector_product(const MlpNet& policy,
                                      const RolloutBatch& batch,
                                      const Eigen::VectorXd& v,
                                      double damping) {
  const Eigen::Index t_max = batch.inputs.cols();
  const Eigen::MatrixXd logits = policy.forward_batch(batch.inputs);
  const Eigen::MatrixXd probs = batch_probs(logits);
  const Eigen::MatrixXd u = policy.param_jvp_batch(batch.inputs, v);
  // per-sample Fisher of the logits: diag(p) - p p^T
  Eigen::MatrixXd w(u.rows(), u.cols());
  for (Eigen::Index i = 0; i < t_max; ++i) {
    const Eigen::VectorXd p = probs.col(i);
    w.col(i) = p.array() * u.col(i).array();
    w.col(i) -= p * p.dot(u.col(i));
  }
  Eigen::VectorXd hv = policy.backward_batch(batch.inputs, w) / double(t_max);
  hv += damping * v;
  return hv;
}

Eigen::VectorXd conjugate_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_A,
    const Eigen::VectorXd& b, int iters, double tol) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = b;
  double rs = r.squaredNorm();
  const double threshold = tol * tol * b.squaredNorm();
  for (int i = 0; i < iters && rs > threshold; ++i) {
    const Eigen::VectorXd ap = apply_A(p);
    const double alpha = rs / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rs_new = r.squaredNorm();
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  return x;
}

TrpoUpdateResult trpo_update(MlpNet& policy, const RolloutBatch& batch,
                             const TrpoConfig& cfg) {
  TrpoUpdateResult res;
  const SurrogateResult sur = surrogate_and_grad(policy, batch);
  const Eigen::VectorXd g = -sur.gradient;  // ascent direction on the surrogate
  if (g.norm() < 1e-12) return res;

  auto fvp = [&](const Eigen::VectorXd& v) {
    return fisher_vector_product(policy, batch, v, cfg.cg_damping);
  };
  const Eigen::VectorXd dir = conjugate_gradient(fvp, g, cfg.cg_iters);
  const double shs = dir.dot(fvp(dir));
  if (shs <= 0.0) return res;
  const Eigen::VectorXd full_step = std::sqrt(2.0 * cfg.max_kl / shs) * dir;

  const Eigen::VectorXd old_params = policy.get_flat_params();
  const Eigen::MatrixXd old_logits = policy.forward_batch(batch.inputs);
  double scale = 1.0;
  for (int i = 0; i < cfg.backtrack_steps; ++i, scale *= cfg.backtrack_ratio) {
    policy.set_flat_params(old_params + scale * full_step);
    const double new_loss = surrogate_loss(policy, batch);
    const double improvement = sur.loss - new_loss;
    const double kl = mean_kl(old_logits, policy, batch);
    if (improvement > 0.0 && kl <= 1.5 * cfg.max_kl) {
      res.accepted = true;
      res.kl_after = kl;
      res.surrogate_improvement = improvement;
      return res;
    }
  }
  policy.set_flat_params(old_params);
  return res;
}

double bc_train(MlpNet& policy, const Eigen::MatrixXd& inputs,
                const std::vector<int>& actions, int epochs, double lr,
                int batch_size, std::uint64_t shuffle_seed) {
  const Eigen::Index n = inputs.cols();
  if (n == 0) throw std::invalid_argument("bc_train: empty dataset");
  AdamOptimizer opt(policy.param_count(), lr);
  Eigen::VectorXd params = policy.get_flat_params();
  std::mt19937_64 rng(shuffle_seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  double final_nll = 0.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (batch_size > 0)
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[size_t(rng() % i)]);
    const Eigen::Index bs = batch_size > 0 ? batch_size : n;
    double nll_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += bs) {
      const Eigen::Index m = std::min(bs, n - start);
      Eigen::MatrixXd x(inputs.rows(), m);
      std::vector<int> acts(static_cast<std::size_t>(m));
      for (Eigen::Index i = 0; i < m; ++i) {
        x.col(i) = inputs.col(order[size_t(start + i)]);
        acts[size_t(i)] = actions[size_t(order[size_t(start + i)])];
      }
      const Eigen::MatrixXd logits = policy.forward_batch(x);
      Eigen::MatrixXd dlogits = batch_probs(logits);
      for (Eigen::Index i = 0; i < m; ++i) {
        nll_sum -= categorical_logprob(logits.col(i), acts[size_t(i)]);
        dlogits(acts[size_t(i)], i) -= 1.0;
      }
      dlogits /= double(m);
      const Eigen::VectorXd grad = policy.backward_batch(x, dlogits);
      opt.step(params, grad);
      policy.set_flat_params(params);
    }
    final_nll = nll_sum / double(n);
  }
  return final_nll;
}

double bc_train(MlpNet& policy, const DemoDataset& demos, int epochs,
                double lr, int batch_size, std::uint64_t shuffle_seed) {
  std::size_t total = 0;
  for (const auto& traj : demos.trajectories) total += traj.records.size();
  if (total == 0) throw std::invalid_argument("bc_train: empty demo dataset");
  Eigen::MatrixXd inputs(kObsDim, Eigen::Index(total));
  std::vector<int> actions(total);
  std::size_t k = 0;
  for (const auto& traj : demos.trajectories)
    for (const auto& rec : traj.records) {
      inputs.col(Eigen::Index(k)) = policy_input(rec.observation);
      actions[k] = rec.action;
      ++k;
    }
  return bc_train(policy, inputs, actions, epochs, lr, batch_size,
                  shuffle_seed);
}

double fit_value(MlpNet& valuenet, const Eigen::MatrixXd& inputs,
                 const Eigen::VectorXd& returns, int epochs, double lr,
                 int batch_size, std::uint64_t shuffle_seed) {
  const Eigen::Index n = inputs.cols();
  if (n == 0 || returns.size() != n)
    throw std::invalid_argument("fit_value: misaligned inputs");
  AdamOptimizer opt(valuenet.param_count(), lr);
  Eigen::VectorXd params = valuenet.get_flat_params();
  std::mt19937_64 rng(shuffle_seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  double final_loss = 0.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (batch_size > 0)
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[size_t(rng() % i)]);
    const Eigen::Index bs = batch_size > 0 ? batch_size : n;
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += bs) {
      const Eigen::Index m = std::min(bs, n - start);
      Eigen::MatrixXd x(inputs.rows(), m);
      Eigen::VectorXd y(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        x.col(i) = inputs.col(order[size_t(start + i)]);
        y(i) = returns(order[size_t(start + i)]);
      }
      const Eigen::MatrixXd pred = valuenet.forward_batch(x);
      const Eigen::MatrixXd err = pred.row(0).transpose() - y;
      loss_sum += err.squaredNorm();
      const Eigen::MatrixXd dout = (2.0 / double(m)) * err.transpose();
      const Eigen::VectorXd grad = valuenet.backward_batch(x, dout);
      opt.step(params, grad);
      valuenet.set_flat_params(params);
    }
    final_loss = loss_sum / double(n);
  }
  return final_loss;
}

}  // namespace augairl
