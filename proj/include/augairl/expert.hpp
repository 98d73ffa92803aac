#pragma once

#include <string>
#include <vector>

#include "augairl/sim.hpp"

namespace augairl {

struct ExpertConfig {
  double jerk_threshold = 8.0;   // m/s^3, mean over the prediction horizon
  double safety_buffer = 2.0;    // m, on top of the dynamic margin
  int prediction_horizon = 5;    // ticks of model-based lookahead
};

struct TrajectoryRecord {
  ObservationVector observation;
  int action = 0;
  StepEvents events;
  bool done = false;
};

struct Trajectory {
  int episode_id = 0;
  std::vector<TrajectoryRecord> records;
};

struct DemoDataset {
  std::vector<Trajectory> trajectories;
  std::uint64_t seed = 0;
  std::string config_hash;
  int count = 0;
};

// Rule-based expert with full access to the environment models.
// Priority: safety, then comfort (jerk), then efficiency (fastest gap).
int expert_action(const WorldState& world, const ExpertConfig& cfg);

double estimate_completion_time(const WorldState& world, int gap_index);

// Derives per-episode seeds from (seed, episode index); keeps successful
// episodes only and fails hard if the success ratio drops below 0.95.
DemoDataset collect_demos(int n_episodes, std::uint64_t seed,
                          const TrafficConfig& config,
                          const ExpertConfig& expert_cfg = {});

void save_dataset(const DemoDataset& ds, const std::string& path);
DemoDataset load_dataset(const std::string& path);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag,
                          std::uint64_t index);
constexpr std::uint64_t kTrainSeedTag = 0x745261696e5f5f31ULL;
constexpr std::uint64_t kEvalSeedTag = 0x4576616c5f5f5f31ULL;
constexpr std::uint64_t kDemoSeedTag = 0x44656d6f5f5f5f31ULL;

}  // namespace augairl
