#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "augairl/trpo.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace augairl;
using testutil::finite_diff;
using testutil::max_rel_err;
using testutil::random_vector;

namespace {

MlpSpec spec_of(int in, std::vector<int> hidden, int out) {
  MlpSpec s;
  s.input_dim = in;
  s.hidden_dims = std::move(hidden);
  s.output_dim = out;
  return s;
}

// random rollout batch for an `in`-dim observation, `out`-action policy
RolloutBatch random_batch(const MlpNet& policy, int t_max,
                          std::mt19937_64& rng, bool identity_behavior) {
  RolloutBatch b;
  const int in = policy.spec().input_dim;
  const int out = policy.spec().output_dim;
  b.inputs.resize(in, t_max);
  b.actions.resize(std::size_t(t_max));
  b.rewards.resize(t_max);
  b.dones.assign(std::size_t(t_max), false);
  b.behavior_logprobs.resize(t_max);
  b.values = Eigen::VectorXd::Zero(t_max + 1);
  b.advantages.resize(t_max);
  for (int t = 0; t < t_max; ++t) {
    b.inputs.col(t) = random_vector(in, rng);
    b.actions[std::size_t(t)] = int(rng() % std::uint64_t(out));
    b.advantages(t) = uniform_range(rng, -1.0, 1.0);
    const Eigen::VectorXd logits = policy.forward(b.inputs.col(t));
    b.behavior_logprobs(t) =
        identity_behavior
            ? categorical_logprob(logits, b.actions[std::size_t(t)])
            : uniform_range(rng, -3.0, -0.5);
  }
  return b;
}

}  // namespace

TEST_CASE("compute_gae: single terminal step") {
  Eigen::VectorXd rewards(1), values(2), adv, ret;
  rewards << 2.5;
  values << 0.7, 0.0;
  compute_gae(rewards, values, {true}, 0.99, 0.95, adv, ret);
  CHECK(adv(0) == doctest::Approx(2.5 - 0.7).epsilon(1e-12));
  CHECK(ret(0) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("compute_gae: Monte-Carlo limit sums future rewards") {
  std::mt19937_64 rng(1);
  const int n = 12;
  Eigen::VectorXd rewards = random_vector(n, rng);
  Eigen::VectorXd values = Eigen::VectorXd::Zero(n + 1);
  std::vector<bool> dones(std::size_t(n), false);
  dones.back() = true;
  Eigen::VectorXd adv, ret;
  compute_gae(rewards, values, dones, 1.0, 1.0, adv, ret);
  for (int t = 0; t < n; ++t) {
    double s = 0.0;
    for (int k = t; k < n; ++k) s += rewards(k);
    CHECK(adv(t) == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("compute_gae: matches the brute-force double loop") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 20 + int(rng() % 80);
    Eigen::VectorXd rewards = random_vector(n, rng);
    Eigen::VectorXd values = random_vector(n + 1, rng);
    std::vector<bool> dones(std::size_t(n), false);
    for (int t = 0; t < n; ++t)
      if (rng() % 7 == 0) dones[std::size_t(t)] = true;
    if (dones[std::size_t(n - 1)]) values(n) = 0.0;
    const double gamma = 0.99, lambda = 0.95;

    Eigen::VectorXd adv, ret;
    compute_gae(rewards, values, dones, gamma, lambda, adv, ret);

    for (int t = 0; t < n; ++t) {
      double acc = 0.0, w = 1.0;
      for (int k = t; k < n; ++k) {
        const double nd = dones[std::size_t(k)] ? 0.0 : 1.0;
        const double delta =
            rewards(k) + gamma * nd * values(k + 1) - values(k);
        acc += w * delta;
        if (nd == 0.0) break;
        w *= gamma * lambda;
      }
      CHECK(std::abs(adv(t) - acc) < 1e-10);
      CHECK(std::abs(ret(t) - (acc + values(t))) < 1e-10);
    }
  }
}

TEST_CASE("compute_gae: misaligned inputs are a hard error") {
  Eigen::VectorXd r(3), v(3), adv, ret;  // values needs the bootstrap entry
  r.setZero();
  v.setZero();
  CHECK_THROWS(compute_gae(r, v, {false, false, false}, 0.99, 0.95, adv, ret));
}

TEST_CASE("normalize_advantages: mean zero, unit std") {
  std::mt19937_64 rng(3);
  Eigen::VectorXd adv = random_vector(256, rng, -4.0, 9.0);
  normalize_advantages(adv);
  CHECK(std::abs(adv.mean()) < 1e-10);
  const double std = std::sqrt((adv.array() - adv.mean()).square().mean());
  CHECK(std::abs(std - 1.0) < 1e-10);
}

TEST_CASE("surrogate: identity policy has zero loss on normalized advantages") {
  const MlpNet policy = MlpNet::initialized(spec_of(6, {8}, 4), 4);
  std::mt19937_64 rng(5);
  RolloutBatch b = random_batch(policy, 64, rng, true);
  normalize_advantages(b.advantages);
  const SurrogateResult r = surrogate_and_grad(policy, b);
  // ratio = 1 everywhere, so loss = -mean(A) = 0
  CHECK(std::abs(r.loss) < 1e-12);
  CHECK(std::abs(surrogate_loss(policy, b)) < 1e-12);
}

TEST_CASE("surrogate: gradient matches finite differences") {
  MlpNet policy = MlpNet::initialized(spec_of(5, {6}, 3), 6);
  std::mt19937_64 rng(7);
  const RolloutBatch b = random_batch(policy, 32, rng, false);
  const SurrogateResult r = surrogate_and_grad(policy, b);
  MlpNet probe = policy;
  const Eigen::VectorXd fd = finite_diff(
      [&](const Eigen::VectorXd& p) {
        probe.set_flat_params(p);
        return surrogate_loss(probe, b);
      },
      policy.get_flat_params());
  CHECK(max_rel_err(r.gradient, fd) < 1e-4);
}

TEST_CASE("surrogate: gradient is linear in the advantages") {
  const MlpNet policy = MlpNet::initialized(spec_of(4, {5}, 3), 8);
  std::mt19937_64 rng(9);
  RolloutBatch b = random_batch(policy, 24, rng, false);
  const Eigen::VectorXd g1 = surrogate_and_grad(policy, b).gradient;
  b.advantages *= 2.0;
  const Eigen::VectorXd g2 = surrogate_and_grad(policy, b).gradient;
  CHECK((g2 - 2.0 * g1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fisher_vector_product: zero vector maps to zero") {
  const MlpNet policy = MlpNet::initialized(spec_of(4, {5}, 3), 10);
  std::mt19937_64 rng(11);
  const RolloutBatch b = random_batch(policy, 16, rng, true);
  const Eigen::VectorXd hv = fisher_vector_product(
      policy, b, Eigen::VectorXd::Zero(policy.param_count()), 0.1);
  CHECK(hv.norm() == 0.0);
}

TEST_CASE("fisher_vector_product: matches the explicit KL Hessian") {
  // tiny policy so the full Hessian is cheap to build by differentiating
  // the KL gradient
  MlpNet policy = MlpNet::initialized(spec_of(1, {1}, 2), 12);
  std::mt19937_64 rng(13);
  const RolloutBatch b = random_batch(policy, 8, rng, true);
  const Eigen::MatrixXd old_logits = policy.forward_batch(b.inputs);
  const Eigen::VectorXd theta = policy.get_flat_params();
  const int n = policy.param_count();

  // numeric Hessian of kl(theta) via central differences of the KL itself
  auto kl_at = [&](const Eigen::VectorXd& p) {
    MlpNet probe = policy;
    probe.set_flat_params(p);
    return mean_kl(old_logits, probe, b);
  };
  const double h = 1e-4;
  Eigen::MatrixXd hess(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd p = theta;
      p(i) += h; p(j) += h; const double pp = kl_at(p);
      p = theta; p(i) += h; p(j) -= h; const double pm = kl_at(p);
      p = theta; p(i) -= h; p(j) += h; const double mp = kl_at(p);
      p = theta; p(i) -= h; p(j) -= h; const double mm = kl_at(p);
      hess(i, j) = (pp - pm - mp + mm) / (4.0 * h * h);
    }
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd v = random_vector(n, rng);
    const Eigen::VectorXd hv = fisher_vector_product(policy, b, v, 0.0);
    const Eigen::VectorXd ref = hess * v;
    CHECK((hv - ref).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("fisher_vector_product: positive semidefinite plus damping") {
  const MlpNet policy = MlpNet::initialized(spec_of(4, {6}, 3), 14);
  std::mt19937_64 rng(15);
  const RolloutBatch b = random_batch(policy, 32, rng, true);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd v = random_vector(policy.param_count(), rng);
    CHECK(v.dot(fisher_vector_product(policy, b, v, 0.1)) >= 0.0);
  }
}

TEST_CASE("conjugate_gradient: identity system solves in one pass") {
  std::mt19937_64 rng(16);
  const Eigen::VectorXd b = random_vector(7, rng);
  const Eigen::VectorXd x =
      conjugate_gradient([](const Eigen::VectorXd& v) { return v; }, b, 1);
  CHECK((x - b).norm() < 1e-12);
}

TEST_CASE("conjugate_gradient: 5x5 SPD system with a known solution") {
  std::mt19937_64 rng(17);
  Eigen::MatrixXd m(5, 5);
  for (int i = 0; i < 5; ++i) m.col(i) = random_vector(5, rng);
  const Eigen::MatrixXd a =
      m * m.transpose() + 0.5 * Eigen::MatrixXd::Identity(5, 5);
  const Eigen::VectorXd x_star = random_vector(5, rng);
  const Eigen::VectorXd b = a * x_star;
  const Eigen::VectorXd x = conjugate_gradient(
      [&](const Eigen::VectorXd& v) { return a * v; }, b, 5);
  CHECK((x - x_star).norm() < 1e-6);
}

TEST_CASE("conjugate_gradient: zero rhs gives zero solution") {
  const Eigen::VectorXd x = conjugate_gradient(
      [](const Eigen::VectorXd& v) { return 2.0 * v; },
      Eigen::VectorXd::Zero(6), 10);
  CHECK(x.norm() == 0.0);
}

TEST_CASE("conjugate_gradient: random 20x20 SPD systems reach 1e-6 residual") {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd m(20, 20);
    for (int i = 0; i < 20; ++i) m.col(i) = random_vector(20, rng);
    const Eigen::MatrixXd a =
        m * m.transpose() + Eigen::MatrixXd::Identity(20, 20);
    const Eigen::VectorXd b = random_vector(20, rng);
    const Eigen::VectorXd x = conjugate_gradient(
        [&](const Eigen::VectorXd& v) { return a * v; }, b, 20, 1e-8);
    CHECK((a * x - b).norm() < 1e-6 * b.norm());
  }
}

TEST_CASE("trpo_update: zero advantages leave the policy untouched") {
  MlpNet policy = MlpNet::initialized(spec_of(5, {6}, 3), 19);
  std::mt19937_64 rng(20);
  RolloutBatch b = random_batch(policy, 32, rng, true);
  b.advantages.setZero();
  const Eigen::VectorXd before = policy.get_flat_params();
  const TrpoUpdateResult r = trpo_update(policy, b, TrpoConfig{});
  CHECK_FALSE(r.accepted);
  CHECK((policy.get_flat_params() - before).norm() == 0.0);
}

TEST_CASE("trpo_update: accepted steps obey the KL bound and improve") {
  MlpNet policy = MlpNet::initialized(spec_of(5, {8}, 3), 21);
  std::mt19937_64 rng(22);
  const TrpoConfig cfg;
  int accepted = 0;
  for (int it = 0; it < 30; ++it) {
    RolloutBatch b = random_batch(policy, 64, rng, true);
    normalize_advantages(b.advantages);
    const TrpoUpdateResult r = trpo_update(policy, b, cfg);
    if (r.accepted) {
      ++accepted;
      CHECK(r.kl_after <= 1.5 * cfg.max_kl + 1e-12);
      CHECK(r.surrogate_improvement > 0.0);
    }
  }
  CHECK(accepted > 0);
}

TEST_CASE("trpo_update: solves the 2-state synthetic MDP") {
  // states one-hot in R^2; action 1 pays +1, action 0 pays 0; the optimal
  // policy puts all mass on action 1 in both states
  MlpNet policy = MlpNet::initialized(spec_of(2, {8}, 2), 23, 0.01);
  std::mt19937_64 rng(24);
  const TrpoConfig cfg;
  const int horizon = 256;

  for (int update = 0; update < 50; ++update) {
    RolloutBatch b;
    b.inputs.resize(2, horizon);
    b.actions.resize(std::size_t(horizon));
    b.rewards.resize(horizon);
    b.dones.assign(std::size_t(horizon), false);
    b.behavior_logprobs.resize(horizon);
    b.values = Eigen::VectorXd::Zero(horizon + 1);
    int state = 0;
    for (int t = 0; t < horizon; ++t) {
      Eigen::VectorXd obs = Eigen::VectorXd::Zero(2);
      obs(state) = 1.0;
      const Eigen::VectorXd logits = policy.forward(obs);
      const int a = categorical_sample(logits, rng);
      b.inputs.col(t) = obs;
      b.actions[std::size_t(t)] = a;
      b.behavior_logprobs(t) = categorical_logprob(logits, a);
      b.rewards(t) = a == 1 ? 1.0 : 0.0;
      b.dones[std::size_t(t)] = (t % 16) == 15;  // short episodes
      state = int(rng() % 2);
    }
    compute_gae(b.rewards, b.values, b.dones, cfg.gamma, cfg.gae_lambda,
                b.advantages, b.returns);
    normalize_advantages(b.advantages);
    trpo_update(policy, b, cfg);
  }
  for (int s = 0; s < 2; ++s) {
    Eigen::VectorXd obs = Eigen::VectorXd::Zero(2);
    obs(s) = 1.0;
    CHECK(softmax(policy.forward(obs))(1) > 0.95);
  }
}

TEST_CASE("bc_train: constant-action demos are memorized") {
  MlpNet policy = MlpNet::initialized(spec_of(6, {16}, 4), 25, 0.01);
  std::mt19937_64 rng(26);
  const int n = 128;
  Eigen::MatrixXd inputs(6, n);
  for (int i = 0; i < n; ++i) inputs.col(i) = random_vector(6, rng);
  const std::vector<int> actions(std::size_t(n), 2);
  const double nll = bc_train(policy, inputs, actions, 300, 1e-2, 0, 1);
  CHECK(nll < 0.01);
  for (int i = 0; i < 10; ++i)
    CHECK(softmax(policy.forward(inputs.col(i)))(2) > 0.99);
}

TEST_CASE("bc_train: full-batch NLL decreases monotonically") {
  MlpNet policy = MlpNet::initialized(spec_of(5, {12}, 3), 27, 0.01);
  std::mt19937_64 rng(28);
  const int n = 200;
  Eigen::MatrixXd inputs(5, n);
  std::vector<int> actions(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    inputs.col(i) = random_vector(5, rng);
    actions[std::size_t(i)] = inputs(0, i) > 0.0 ? 1 : 2;
  }
  const double first = bc_train(policy, inputs, actions, 1, 1e-3, 0, 0);
  double prev = first;
  for (int epoch = 0; epoch < 15; ++epoch) {
    const double nll = bc_train(policy, inputs, actions, 1, 1e-3, 0, 0);
    CHECK(nll <= prev + 1e-4);  // small slack for optimizer-state restarts
    prev = nll;
  }
  CHECK(prev < first);
}

TEST_CASE("bc_train: empty dataset is a hard error") {
  MlpNet policy = MlpNet::initialized(spec_of(5, {6}, 3), 29);
  Eigen::MatrixXd inputs(5, 0);
  CHECK_THROWS(bc_train(policy, inputs, {}, 1, 1e-3, 0, 0));
}

TEST_CASE("fit_value: fits constant returns") {
  MlpNet value = MlpNet::initialized(spec_of(4, {16}, 1), 30);
  std::mt19937_64 rng(31);
  const int n = 64;
  Eigen::MatrixXd inputs(4, n);
  for (int i = 0; i < n; ++i) inputs.col(i) = random_vector(4, rng);
  const double c = 3.0;
  fit_value(value, inputs, Eigen::VectorXd::Constant(n, c), 400, 1e-2, 0, 0);
  for (int i = 0; i < n; ++i)
    CHECK(std::abs(value.forward(inputs.col(i))(0) - c) < std::abs(c) * 0.05);
}

TEST_CASE("fit_value: full-batch loss is non-increasing") {
  MlpNet value = MlpNet::initialized(spec_of(4, {10}, 1), 32);
  std::mt19937_64 rng(33);
  const int n = 128;
  Eigen::MatrixXd inputs(4, n);
  Eigen::VectorXd returns(n);
  for (int i = 0; i < n; ++i) {
    inputs.col(i) = random_vector(4, rng);
    returns(i) = inputs.col(i).sum();
  }
  const double first = fit_value(value, inputs, returns, 1, 1e-3, 0, 0);
  double prev = first;
  for (int epoch = 0; epoch < 15; ++epoch) {
    const double loss = fit_value(value, inputs, returns, 1, 1e-3, 0, 0);
    CHECK(loss <= prev + 1e-4);
    prev = loss;
  }
  CHECK(prev < first);
}

TEST_CASE("fit_value: MSE gradient path matches finite differences") {
  MlpNet value = MlpNet::initialized(spec_of(4, {6}, 1), 34);
  std::mt19937_64 rng(35);
  const int n = 16;
  Eigen::MatrixXd inputs(4, n);
  Eigen::VectorXd returns(n);
  for (int i = 0; i < n; ++i) {
    inputs.col(i) = random_vector(4, rng);
    returns(i) = uniform_range(rng, -1.0, 1.0);
  }
  // the gradient fit_value consumes: d/dp mean((v(x) - y)^2)
  auto loss_at = [&](MlpNet& net) {
    const Eigen::MatrixXd pred = net.forward_batch(inputs);
    return (pred.row(0).transpose() - returns).squaredNorm() / double(n);
  };
  const Eigen::MatrixXd pred = value.forward_batch(inputs);
  const Eigen::MatrixXd dout =
      (2.0 / double(n)) * (pred.row(0).transpose() - returns).transpose();
  const Eigen::VectorXd grad = value.backward_batch(inputs, dout);

  MlpNet probe = value;
  const Eigen::VectorXd fd = finite_diff(
      [&](const Eigen::VectorXd& p) {
        probe.set_flat_params(p);
        return loss_at(probe);
      },
      value.get_flat_params());
  CHECK(max_rel_err(grad, fd) < 1e-4);
}

TEST_CASE("policy_input: applies the documented feature scaling") {
  ObservationVector obs = ObservationVector::Zero(kObsDim);
  obs(0) = 250.0;   // ego lon position, scale 500
  obs(7) = 25.0;    // V0 relative position, scale 50
  obs(42) = 2.0;    // target lane, scale 2
  const Eigen::VectorXd x = policy_input(obs);
  CHECK(x(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(x(7) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(x(42) == doctest::Approx(1.0).epsilon(1e-12));
}
