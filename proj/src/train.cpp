#include "augairl/train.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace augairl {

std::string algo_name(Algo a) {
  switch (a) {
    case Algo::augairl: return "augairl";
    case Algo::airl: return "airl";
    case Algo::gail: return "gail";
    case Algo::trpo: return "trpo";
    case Algo::bc_trpo: return "bc-trpo";
  }
  return "unknown";
}

Algo algo_from_name(const std::string& name) {
  if (name == "augairl") return Algo::augairl;
  if (name == "airl") return Algo::airl;
  if (name == "gail") return Algo::gail;
  if (name == "trpo") return Algo::trpo;
  if (name == "bc-trpo" || name == "bc_trpo") return Algo::bc_trpo;
  throw std::invalid_argument("unknown algorithm: " + name);
}

double crafted_reward(const WorldState& prev, const WorldState& next,
                      const StepOutcome& outcome) {
  double r = -0.01;  // time penalty
  if (outcome.events.success) r += 15.0;
  if (outcome.events.crash) r += -30.0;
  if (outcome.events.margin_invasion) r += -1.0;
  const double jerk =
      std::abs(next.ego.lon_accel - prev.ego.lon_accel) / kDt;
  r += -0.1 * std::min(jerk, 5.0);
  const double target = lane_center(next.ego_target_lane);
  r += 0.05 * (std::abs(prev.ego.lat_pos - target) -
               std::abs(next.ego.lat_pos - target));
  return r;
}

// ---- checkpoint serialization -------------------------------------------

namespace {
constexpr char kMagic[6] = {'A', 'A', 'I', 'R', 'L', '\x01'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}
std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("checkpoint: truncated file");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
         std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}
void write_vec(std::ostream& out, const Eigen::VectorXd& v) {
  write_u32(out, std::uint32_t(v.size()));
  if (v.size() > 0)
    out.write(reinterpret_cast<const char*>(v.data()),
              std::streamsize(v.size() * sizeof(double)));
}
Eigen::VectorXd read_vec(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  if (n > (1u << 28)) throw std::runtime_error("checkpoint: corrupt length");
  Eigen::VectorXd v(n);
  if (!in.read(reinterpret_cast<char*>(v.data()),
               std::streamsize(n * sizeof(double))))
    throw std::runtime_error("checkpoint: truncated vector");
  return v;
}
void write_dims(std::ostream& out, const std::vector<int>& dims) {
  write_u32(out, std::uint32_t(dims.size()));
  for (int d : dims) write_u32(out, std::uint32_t(d));
}
std::vector<int> read_dims(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  if (n > 64) throw std::runtime_error("checkpoint: corrupt dim count");
  std::vector<int> dims(n);
  for (auto& d : dims) d = int(read_u32(in));
  return dims;
}
void write_blob(std::ostream& out, const std::string& s) {
  write_u32(out, std::uint32_t(s.size()));
  out.write(s.data(), std::streamsize(s.size()));
}
std::string read_blob(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  if (n > (1u << 30)) throw std::runtime_error("checkpoint: corrupt blob length");
  std::string s(n, '\0');
  if (!in.read(s.data(), std::streamsize(n)))
    throw std::runtime_error("checkpoint: truncated blob");
  return s;
}
}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + tmp);
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, std::uint32_t(ckpt.iteration));
    write_u32(out, std::uint32_t(ckpt.algo));
    write_dims(out, ckpt.policy_dims);
    write_dims(out, ckpt.value_dims);
    write_dims(out, ckpt.disc_dims);
    write_vec(out, ckpt.policy_params);
    write_vec(out, ckpt.value_params);
    write_vec(out, ckpt.disc_params);
    write_vec(out, ckpt.semantic_weights);
    write_blob(out, ckpt.rng_state);
    write_blob(out, ckpt.metric_log_csv);
    if (!out) throw std::runtime_error("save_checkpoint: write failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[6];
  if (!in.read(magic, 6) || std::memcmp(magic, kMagic, 6) != 0)
    throw std::runtime_error("load_checkpoint: bad magic/version in " + path);
  Checkpoint c;
  c.iteration = int(read_u32(in));
  c.algo = Algo(read_u32(in));
  c.policy_dims = read_dims(in);
  c.value_dims = read_dims(in);
  c.disc_dims = read_dims(in);
  c.policy_params = read_vec(in);
  c.value_params = read_vec(in);
  c.disc_params = read_vec(in);
  const Eigen::VectorXd w = read_vec(in);
  if (w.size() != 4)
    throw std::runtime_error("load_checkpoint: bad semantic weight block");
  c.semantic_weights = w;
  c.rng_state = read_blob(in);
  c.metric_log_csv = read_blob(in);
  return c;
}

namespace {
MlpNet net_from_dims(const std::vector<int>& dims, Activation act,
                     const Eigen::VectorXd& params) {
  if (dims.size() < 3)
    throw std::runtime_error("checkpoint: invalid layer dims");
  MlpSpec spec;
  spec.input_dim = dims.front();
  spec.output_dim = dims.back();
  spec.hidden_dims.assign(dims.begin() + 1, dims.end() - 1);
  spec.hidden_activation = act;
  MlpNet net(spec);
  net.set_flat_params(params);
  return net;
}
}  // namespace

MlpNet policy_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.policy_dims.empty() && ckpt.policy_dims.front() != kObsDim)
    throw std::runtime_error("checkpoint: incompatible observation dimension");
  return net_from_dims(ckpt.policy_dims, Activation::Tanh, ckpt.policy_params);
}

const char* kIterationLogHeader =
    "iteration,mean_total_reward,success_ratio,mean_decision_steps,"
    "mean_changing_steps,disc_loss,kl_after,entropy";

std::string iteration_log_row(const IterationLog& r) {
  std::ostringstream ss;
  ss.precision(17);
  ss << r.iteration << ',' << r.mean_total_reward << ',' << r.success_ratio
     << ',' << r.mean_decision_steps << ',' << r.mean_changing_steps << ','
     << r.disc_loss << ',' << r.kl_after << ',' << r.entropy;
  return ss.str();
}

// ---- training loop -------------------------------------------------------

namespace {

struct ExpertBuffer {
  Eigen::MatrixXd disc_inputs;  // kDiscInputDim x N
  Eigen::MatrixXd obs_scaled;   // kObsDim x N
  std::vector<int> actions;
  Eigen::MatrixXd events;  // 4 x N
};

ExpertBuffer flatten_demos(const DemoDataset& demos) {
  std::size_t total = 0;
  for (const auto& t : demos.trajectories) total += t.records.size();
  if (total == 0) throw std::runtime_error("train: demo dataset is empty");
  ExpertBuffer buf;
  buf.disc_inputs.resize(kDiscInputDim, Eigen::Index(total));
  buf.obs_scaled.resize(kObsDim, Eigen::Index(total));
  buf.actions.resize(total);
  buf.events.resize(4, Eigen::Index(total));
  Eigen::Index k = 0;
  for (const auto& t : demos.trajectories)
    for (const auto& rec : t.records) {
      buf.disc_inputs.col(k) = disc_input(rec.observation, rec.action);
      buf.obs_scaled.col(k) = policy_input(rec.observation);
      buf.actions[size_t(k)] = rec.action;
      buf.events.col(k) =
          SemanticEventVector::from_events(rec.events).indicators;
      ++k;
    }
  return buf;
}

struct EpisodeTracker {
  double crafted_sum = 0.0;
  int current_span = 0;  // steps of the ongoing lateral traverse
  int aborted_span_steps = 0;
};

struct CompletedEpisode {
  bool success = false;
  int decision_steps = 0;
  int changing_steps = 0;
  double total_reward = 0.0;
};

}  // namespace

std::vector<IterationLog> train(const TrainConfig& cfg,
                                const std::string& out_dir) {
  const bool imitation = cfg.algo == Algo::augairl || cfg.algo == Algo::airl ||
                         cfg.algo == Algo::gail;
  const bool needs_demos = imitation || cfg.algo == Algo::bc_trpo;

  std::optional<DemoDataset> demos;
  if (needs_demos) {
    if (cfg.demo_path.empty())
      throw std::runtime_error("train: " + algo_name(cfg.algo) +
                               " requires a demo dataset (--demos)");
    demos = load_dataset(cfg.demo_path);
  }

  std::filesystem::create_directories(out_dir);
  std::ofstream log_file(out_dir + "/log.csv");
  if (!log_file) throw std::runtime_error("train: cannot write to " + out_dir);
  log_file << kIterationLogHeader << "\n";

  MlpSpec policy_spec{kObsDim, cfg.policy_hidden, kNumActions,
                      Activation::Tanh};
  MlpNet policy =
      MlpNet::initialized(policy_spec, derive_seed(cfg.seed, 0x706f6cULL, 0),
                          0.01);
  MlpSpec value_spec{kObsDim, cfg.value_hidden, 1, Activation::Tanh};
  MlpNet value =
      MlpNet::initialized(value_spec, derive_seed(cfg.seed, 0x76616cULL, 0));

  std::optional<DiscriminatorModel> disc;
  std::optional<ExpertBuffer> expert;
  std::optional<AdamOptimizer> disc_opt;
  std::optional<AdamOptimizer> wsem_opt;
  if (imitation) {
    DiscriminatorMode mode = DiscriminatorMode::airl_plain;
    if (cfg.algo == Algo::augairl && !cfg.shaping_ablation)
      mode = DiscriminatorMode::airl_augmented;
    if (cfg.algo == Algo::gail) mode = DiscriminatorMode::gail;
    disc = DiscriminatorModel::make(mode, derive_seed(cfg.seed, 0x646973ULL, 0),
                                    cfg.disc_hidden);
    disc->semantic.base_values = cfg.semantic.base_values;
    if (mode == DiscriminatorMode::airl_augmented)
      disc->semantic.weights = cfg.semantic.weights;
    expert = flatten_demos(*demos);
    disc_opt.emplace(disc->f_net.param_count(), cfg.disc_lr);
    wsem_opt.emplace(4, cfg.disc_lr);
  }

  if (cfg.algo == Algo::bc_trpo)
    bc_train(policy, *demos, cfg.bc_epochs, cfg.bc_lr, 256,
             derive_seed(cfg.seed, 0x6263ULL, 0));

  std::mt19937_64 rng_policy(derive_seed(cfg.seed, 0x616374ULL, 0));
  std::mt19937_64 rng_disc(derive_seed(cfg.seed, 0x64726eULL, 0));
  std::uint64_t episode_counter = 0;

  WorldState world;
  bool world_valid = false;
  ObservationVector current_obs;
  EpisodeTracker tracker;

  const int horizon = cfg.horizon;
  std::vector<IterationLog> logs;
  logs.reserve(size_t(cfg.iterations));

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    // ---- collect one horizon of experience under the current policy ----
    RolloutBatch batch;
    batch.inputs.resize(kObsDim, horizon);
    batch.actions.resize(size_t(horizon));
    batch.rewards.resize(horizon);
    batch.dones.resize(size_t(horizon));
    batch.behavior_logprobs.resize(horizon);
    batch.values.resize(horizon + 1);
    Eigen::MatrixXd disc_inputs;
    Eigen::MatrixXd event_rows;
    if (imitation) {
      disc_inputs.resize(kDiscInputDim, horizon);
      event_rows.resize(4, horizon);
    }
    std::vector<CompletedEpisode> completed;
    double entropy_sum = 0.0;

    for (int t = 0; t < horizon; ++t) {
      if (!world_valid || world.terminated) {
        world = reset(cfg.traffic,
                      derive_seed(cfg.seed, kTrainSeedTag, episode_counter++));
        world_valid = true;
        current_obs = build_observation(world);
        tracker = EpisodeTracker{};
      }
      const Eigen::VectorXd input = policy_input(current_obs);
      const Eigen::VectorXd logits = policy.forward(input);
      const int action = categorical_sample(logits, rng_policy);
      const double logp = categorical_logprob(logits, action);
      entropy_sum += categorical_entropy(logits);

      const WorldState prev = world;
      const StepResult sr = step(world, action);
      const double crafted = crafted_reward(prev, world, sr.outcome);
      tracker.crafted_sum += crafted;
      if (sr.outcome.events.lateral_move) {
        ++tracker.current_span;
      } else if (prev.maneuver_phase == ManeuverPhase::lateral_in_progress) {
        tracker.aborted_span_steps += tracker.current_span;
        tracker.current_span = 0;
      }

      batch.inputs.col(t) = input;
      batch.actions[size_t(t)] = action;
      batch.dones[size_t(t)] = sr.outcome.terminated;
      batch.behavior_logprobs(t) = logp;
      batch.values(t) = value.forward(input)(0);
      if (imitation) {
        disc_inputs.col(t) = disc_input(current_obs, action);
        event_rows.col(t) =
            SemanticEventVector::from_events(sr.outcome.events).indicators;
      } else {
        batch.rewards(t) = crafted;
      }

      if (sr.outcome.terminated) {
        CompletedEpisode ep;
        ep.success = world.termination_reason == TerminationReason::success;
        ep.decision_steps = world.time_step;
        ep.changing_steps = tracker.current_span;
        ep.total_reward = tracker.crafted_sum;
        completed.push_back(ep);
      } else {
        current_obs = sr.observation;
      }
    }
    batch.values(horizon) =
        (world_valid && !world.terminated)
            ? value.forward(policy_input(current_obs))(0)
            : 0.0;

    // ---- discriminator updates ----
    double disc_loss_mean = 0.0;
    if (imitation) {
      const int half = cfg.disc_batch / 2;
      const Eigen::Index n_expert = expert->disc_inputs.cols();
      int n_batches = 0;
      std::vector<int> order(static_cast<std::size_t>(horizon));
      for (int i = 0; i < horizon; ++i) order[size_t(i)] = i;
      for (int epoch = 0; epoch < cfg.disc_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1], order[size_t(rng_disc() % i)]);
        for (int start = 0; start + half <= horizon; start += half) {
          DiscBatch pb, eb;
          pb.inputs.resize(kDiscInputDim, half);
          pb.event_rows.resize(4, half);
          pb.log_pi.resize(half);
          eb.inputs.resize(kDiscInputDim, half);
          eb.event_rows.resize(4, half);
          eb.log_pi.resize(half);
          Eigen::MatrixXd expert_obs(kObsDim, half);
          std::vector<int> expert_acts(static_cast<std::size_t>(half));
          for (int i = 0; i < half; ++i) {
            const int pi = order[size_t(start + i)];
            pb.inputs.col(i) = disc_inputs.col(pi);
            pb.event_rows.col(i) = event_rows.col(pi);
            pb.log_pi(i) = batch.behavior_logprobs(pi);
            const Eigen::Index ei =
                Eigen::Index(rng_disc() % std::uint64_t(n_expert));
            eb.inputs.col(i) = expert->disc_inputs.col(ei);
            eb.event_rows.col(i) = expert->events.col(ei);
            expert_obs.col(i) = expert->obs_scaled.col(ei);
            expert_acts[size_t(i)] = expert->actions[size_t(ei)];
          }
          const Eigen::MatrixXd expert_logits = policy.forward_batch(expert_obs);
          for (int i = 0; i < half; ++i)
            eb.log_pi(i) =
                categorical_logprob(expert_logits.col(i), expert_acts[size_t(i)]);

          const DiscGradients g = disc_loss_and_grad(*disc, eb, pb);
          disc_loss_mean += g.loss;
          ++n_batches;
          Eigen::VectorXd f_params = disc->f_net.get_flat_params();
          disc_opt->step(f_params, g.f_params);
          disc->f_net.set_flat_params(f_params);
          if (disc->mode == DiscriminatorMode::airl_augmented &&
              !cfg.freeze_semantic_weights) {
            Eigen::VectorXd w = disc->semantic.weights;
            wsem_opt->step(w, g.semantic_weights);
            disc->semantic.weights = w;
          }
        }
      }
      if (n_batches > 0) disc_loss_mean /= n_batches;

      // ---- rewards from the updated discriminator ----
      const Eigen::MatrixXd f = disc->f_net.forward_batch(disc_inputs);
      for (int t = 0; t < horizon; ++t) {
        if (cfg.algo == Algo::gail) {
          batch.rewards(t) = f(0, t);  // logit reward
        } else {
          const double bonus = (disc->semantic.base_values.array() *
                                disc->semantic.weights.array() *
                                event_rows.col(t).array())
                                   .sum();
          batch.rewards(t) =
              f(0, t) + bonus - batch.behavior_logprobs(t);
          if (cfg.shaping_ablation)
            batch.rewards(t) +=
                (cfg.semantic.base_values.array() * event_rows.col(t).array())
                    .sum();
        }
      }
    }

    // ---- advantage estimation and policy/value updates ----
    compute_gae(batch.rewards, batch.values, batch.dones, cfg.trpo.gamma,
                cfg.trpo.gae_lambda, batch.advantages, batch.returns);
    normalize_advantages(batch.advantages);
    const TrpoUpdateResult upd = trpo_update(policy, batch, cfg.trpo);
    fit_value(value, batch.inputs, batch.returns, cfg.value_epochs,
              cfg.value_lr, 256, derive_seed(cfg.seed, 0x7666ULL, uint64_t(iter)));

    // ---- iteration log ----
    IterationLog row;
    row.iteration = iter;
    if (!completed.empty()) {
      double rew = 0, suc = 0, dec = 0, chg = 0;
      for (const auto& ep : completed) {
        rew += ep.total_reward;
        suc += ep.success ? 1.0 : 0.0;
        dec += ep.decision_steps;
        chg += ep.changing_steps;
      }
      const double n = double(completed.size());
      row.mean_total_reward = rew / n;
      row.success_ratio = suc / n;
      row.mean_decision_steps = dec / n;
      row.mean_changing_steps = chg / n;
    }
    row.disc_loss = disc_loss_mean;
    row.kl_after = upd.kl_after;
    row.entropy = entropy_sum / double(horizon);
    logs.push_back(row);
    log_file << iteration_log_row(row) << "\n";
    log_file.flush();

    auto make_checkpoint = [&]() {
      Checkpoint c;
      c.iteration = iter;
      c.algo = cfg.algo;
      c.policy_dims = policy.spec().layer_dims();
      c.value_dims = value.spec().layer_dims();
      c.policy_params = policy.get_flat_params();
      c.value_params = value.get_flat_params();
      if (disc) {
        c.disc_dims = disc->f_net.spec().layer_dims();
        c.disc_params = disc->f_net.get_flat_params();
        c.semantic_weights = disc->semantic.weights;
      }
      std::ostringstream rng_ss;
      rng_ss << rng_policy << ' ' << rng_disc << ' ' << episode_counter;
      c.rng_state = rng_ss.str();
      std::ostringstream csv;
      csv << kIterationLogHeader << "\n";
      for (const auto& r : logs) csv << iteration_log_row(r) << "\n";
      c.metric_log_csv = csv.str();
      return c;
    };
    if (cfg.checkpoint_interval > 0 && iter % cfg.checkpoint_interval == 0)
      save_checkpoint(make_checkpoint(),
                      out_dir + "/ckpt_" + std::to_string(iter) + ".ckpt");
    if (iter == cfg.iterations)
      save_checkpoint(make_checkpoint(), out_dir + "/final.ckpt");
  }
  return logs;
}

}  // namespace augairl
