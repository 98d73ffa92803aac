#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "augairl/eval.hpp"
#include "augairl/train.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace augairl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

WorldState idle_world() {
  WorldState w;
  w.ego.lon_accel = 0.0;
  w.ego.lat_pos = lane_center(1);
  w.ego_target_lane = 1;
  return w;
}

TrainConfig small_cfg(Algo algo) {
  TrainConfig cfg;
  cfg.algo = algo;
  cfg.iterations = 5;
  cfg.horizon = 128;
  cfg.checkpoint_interval = 1000;  // final.ckpt only
  cfg.policy_hidden = {32, 32};
  cfg.value_hidden = {32, 32};
  cfg.disc_hidden = {32, 32};
  cfg.seed = 11;
  return cfg;
}

const std::string& shared_demo_path() {
  static std::string path;
  if (path.empty()) {
    const fs::path dir = fresh_dir("augairl_test_train_demos");
    const DemoDataset ds = collect_demos(5, 7, TrafficConfig{});
    path = (dir / "demos.jsonl").string();
    save_dataset(ds, path);
  }
  return path;
}

}  // namespace

TEST_CASE("crafted_reward: idle transition pays only the time penalty") {
  const WorldState prev = idle_world();
  WorldState next = prev;
  next.time_step = 1;
  CHECK(crafted_reward(prev, next, StepOutcome{}) ==
        doctest::Approx(-0.01).epsilon(1e-12));
}

TEST_CASE("crafted_reward: success plus lateral progress") {
  WorldState prev = idle_world();
  prev.ego_target_lane = 2;
  prev.ego.lat_pos = lane_center(2) - 0.3;
  WorldState next = prev;
  next.ego.lat_pos = lane_center(2);
  StepOutcome outcome;
  outcome.events.success = true;
  // -0.01 + 15 + 0.05 * 0.3
  CHECK(crafted_reward(prev, next, outcome) ==
        doctest::Approx(15.005).epsilon(1e-12));
}

TEST_CASE("crafted_reward: crash dominates every other term") {
  const WorldState prev = idle_world();
  const WorldState next = prev;
  StepOutcome outcome;
  outcome.events.crash = true;
  CHECK(crafted_reward(prev, next, outcome) ==
        doctest::Approx(-30.01).epsilon(1e-12));
  outcome.events.margin_invasion = true;
  CHECK(crafted_reward(prev, next, outcome) < -30.0);
}

TEST_CASE("crafted_reward: jerk penalty is clamped at 5 m/s^3") {
  const WorldState prev = idle_world();
  WorldState next = prev;
  next.ego.lon_accel = 1.0;  // jerk 10 over one tick, clamped to 5
  CHECK(crafted_reward(prev, next, StepOutcome{}) ==
        doctest::Approx(-0.01 - 0.5).epsilon(1e-12));
  next.ego.lon_accel = 0.2;  // jerk 2, inside the clamp
  CHECK(crafted_reward(prev, next, StepOutcome{}) ==
        doctest::Approx(-0.01 - 0.2).epsilon(1e-12));
}

TEST_CASE("checkpoint: save/load round-trips every field") {
  const fs::path dir = fresh_dir("augairl_test_ckpt");
  Checkpoint c;
  c.iteration = 1234;
  c.algo = Algo::gail;
  c.policy_dims = {kObsDim, 32, 32, kNumActions};
  c.value_dims = {kObsDim, 16, 1};
  c.disc_dims = {kObsDim + kNumActions, 8, 1};
  c.policy_params = MlpNet::initialized(
                        MlpSpec{kObsDim, {32, 32}, kNumActions}, 1)
                        .get_flat_params();
  c.value_params =
      MlpNet::initialized(MlpSpec{kObsDim, {16}, 1}, 2).get_flat_params();
  c.disc_params = MlpNet::initialized(
                      MlpSpec{kObsDim + kNumActions, {8}, 1}, 3)
                      .get_flat_params();
  c.semantic_weights << 0.5, 1.5, -0.25, 2.0;
  c.rng_state = "123 456 789";
  c.metric_log_csv = std::string(kIterationLogHeader) + "\n1,0,0,0,0,0,0,0\n";

  const std::string path = (dir / "ckpt.bin").string();
  save_checkpoint(c, path);
  const Checkpoint r = load_checkpoint(path);
  CHECK(r.iteration == c.iteration);
  CHECK(r.algo == c.algo);
  CHECK(r.policy_dims == c.policy_dims);
  CHECK(r.value_dims == c.value_dims);
  CHECK(r.disc_dims == c.disc_dims);
  CHECK(r.policy_params == c.policy_params);
  CHECK(r.value_params == c.value_params);
  CHECK(r.disc_params == c.disc_params);
  CHECK(r.semantic_weights == c.semantic_weights);
  CHECK(r.rng_state == c.rng_state);
  CHECK(r.metric_log_csv == c.metric_log_csv);

  MlpNet policy = policy_from_checkpoint(r);
  CHECK(policy.get_flat_params() == c.policy_params);
}

TEST_CASE("checkpoint: corrupt files are rejected") {
  const fs::path dir = fresh_dir("augairl_test_ckpt_bad");

  const std::string bad_magic = (dir / "bad_magic.bin").string();
  {
    std::ofstream out(bad_magic, std::ios::binary);
    out << "NOTACHECKPOINTFILE";
  }
  CHECK_THROWS(load_checkpoint(bad_magic));

  // valid checkpoint with the tail cut off
  Checkpoint c;
  c.policy_dims = {kObsDim, 8, kNumActions};
  c.value_dims = {kObsDim, 8, 1};
  c.policy_params = MlpNet::initialized(
                        MlpSpec{kObsDim, {8}, kNumActions}, 4)
                        .get_flat_params();
  c.value_params =
      MlpNet::initialized(MlpSpec{kObsDim, {8}, 1}, 5).get_flat_params();
  const std::string full = (dir / "full.bin").string();
  save_checkpoint(c, full);
  const std::string blob = read_file(full);
  const std::string truncated = (dir / "truncated.bin").string();
  {
    std::ofstream out(truncated, std::ios::binary);
    out.write(blob.data(), std::streamsize(blob.size() / 2));
  }
  CHECK_THROWS(load_checkpoint(truncated));

  CHECK_THROWS(load_checkpoint((dir / "missing.bin").string()));
}

TEST_CASE("train: trpo smoke run writes logs and interval checkpoints") {
  const fs::path dir = fresh_dir("augairl_test_train_trpo");
  TrainConfig cfg = small_cfg(Algo::trpo);
  cfg.iterations = 10;
  cfg.checkpoint_interval = 4;
  const std::vector<IterationLog> logs = train(cfg, dir.string());
  REQUIRE(logs.size() == 10);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    CHECK(logs[i].iteration == int(i) + 1);
    CHECK(logs[i].disc_loss == 0.0);  // no discriminator for plain rl
    CHECK(std::isfinite(logs[i].mean_total_reward));
    CHECK(logs[i].entropy >= 0.0);
  }

  const std::vector<std::string> rows = lines_of(read_file(dir / "log.csv"));
  REQUIRE(rows.size() == 11);
  CHECK(rows[0] == kIterationLogHeader);
  CHECK(rows[1].substr(0, 2) == "1,");

  CHECK(fs::exists(dir / "ckpt_4.ckpt"));
  CHECK(fs::exists(dir / "ckpt_8.ckpt"));
  CHECK(fs::exists(dir / "final.ckpt"));
  CHECK_FALSE(fs::exists(dir / "ckpt_10.ckpt"));

  const Checkpoint final_ckpt = load_checkpoint((dir / "final.ckpt").string());
  CHECK(final_ckpt.iteration == 10);
  CHECK(final_ckpt.algo == Algo::trpo);
  CHECK(final_ckpt.disc_dims.empty());
  CHECK(lines_of(final_ckpt.metric_log_csv).size() == 11);

  // the mid-run checkpoint only covers its own prefix of the log
  const Checkpoint mid = load_checkpoint((dir / "ckpt_4.ckpt").string());
  CHECK(mid.iteration == 4);
  CHECK(lines_of(mid.metric_log_csv).size() == 5);
}

TEST_CASE("train: evaluation of a checkpoint policy is deterministic") {
  const fs::path dir = fresh_dir("augairl_test_train_det");
  TrainConfig cfg = small_cfg(Algo::trpo);
  cfg.iterations = 3;
  train(cfg, dir.string());
  const Checkpoint ckpt = load_checkpoint((dir / "final.ckpt").string());
  const CheckpointReport a = run_eval(ckpt, 5, 99);
  const CheckpointReport b = run_eval(ckpt, 5, 99);
  CHECK(a.reward_mean == b.reward_mean);
  CHECK(a.success_mean == b.success_mean);
  CHECK(a.decision_mean == b.decision_mean);
  CHECK(a.changing_mean == b.changing_mean);
  CHECK(a.reward_std == b.reward_std);
}

TEST_CASE("train: imitation algorithms require a demo dataset") {
  const fs::path dir = fresh_dir("augairl_test_train_nodemos");
  for (const Algo algo : {Algo::augairl, Algo::airl, Algo::gail,
                          Algo::bc_trpo}) {
    TrainConfig cfg = small_cfg(algo);
    CHECK_THROWS_WITH_AS(train(cfg, dir.string()),
                         doctest::Contains("requires a demo dataset"),
                         std::exception);
  }
}

TEST_CASE("train: zero semantic weights reduce the augmented run to airl") {
  // frozen zero weights kill the semantic bonus everywhere, so the run
  // must be bit-identical to plain airl under the same seed
  const fs::path dir_a = fresh_dir("augairl_test_equiv_a");
  const fs::path dir_b = fresh_dir("augairl_test_equiv_b");

  TrainConfig cfg = small_cfg(Algo::augairl);
  cfg.demo_path = shared_demo_path();
  cfg.semantic.weights.setZero();
  cfg.freeze_semantic_weights = true;
  train(cfg, dir_a.string());

  cfg.algo = Algo::airl;
  cfg.semantic = SemanticRewardSpec{};
  cfg.freeze_semantic_weights = false;
  train(cfg, dir_b.string());

  CHECK(read_file(dir_a / "log.csv") == read_file(dir_b / "log.csv"));
}

TEST_CASE("train: augmented run learns nonzero semantic weights by default") {
  const fs::path dir = fresh_dir("augairl_test_train_aug");
  TrainConfig cfg = small_cfg(Algo::augairl);
  cfg.demo_path = shared_demo_path();
  const std::vector<IterationLog> logs = train(cfg, dir.string());
  REQUIRE(logs.size() == 5);
  for (const IterationLog& row : logs) CHECK(std::isfinite(row.disc_loss));
  const Checkpoint ckpt = load_checkpoint((dir / "final.ckpt").string());
  // weights start at 1 and move under the discriminator updates
  CHECK((ckpt.semantic_weights - Eigen::Vector4d::Ones()).norm() > 0.0);
}

TEST_CASE("train: shaping ablation runs end to end") {
  const fs::path dir = fresh_dir("augairl_test_train_shaping");
  TrainConfig cfg = small_cfg(Algo::augairl);
  cfg.demo_path = shared_demo_path();
  cfg.shaping_ablation = true;
  cfg.iterations = 3;
  const std::vector<IterationLog> logs = train(cfg, dir.string());
  REQUIRE(logs.size() == 3);
  for (const IterationLog& row : logs) {
    CHECK(std::isfinite(row.mean_total_reward));
    CHECK(std::isfinite(row.disc_loss));
  }
}

TEST_CASE("train: determinism across identical runs") {
  const fs::path dir_a = fresh_dir("augairl_test_det_a");
  const fs::path dir_b = fresh_dir("augairl_test_det_b");
  TrainConfig cfg = small_cfg(Algo::trpo);
  cfg.iterations = 4;
  train(cfg, dir_a.string());
  train(cfg, dir_b.string());
  CHECK(read_file(dir_a / "log.csv") == read_file(dir_b / "log.csv"));
  CHECK(read_file(dir_a / "final.ckpt") == read_file(dir_b / "final.ckpt"));
}

TEST_CASE("algo names round-trip") {
  for (const Algo a : {Algo::augairl, Algo::airl, Algo::gail, Algo::trpo,
                       Algo::bc_trpo})
    CHECK(algo_from_name(algo_name(a)) == a);
  CHECK_THROWS(algo_from_name("dagger"));
}
