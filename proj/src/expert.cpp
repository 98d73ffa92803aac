#include "augairl/expert.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace augairl {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag,
                          std::uint64_t index) {
  // splitmix64 mix of (base, tag, index)
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1) + tag;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

struct LookaheadResult {
  bool crash = false;
  bool success = false;
  double min_separation = std::numeric_limits<double>::infinity();
  double mean_jerk = 0.0;
};

// Roll the exact environment model forward with a fixed ego action.
LookaheadResult lookahead(const WorldState& world, int action, int ticks) {
  LookaheadResult r;
  WorldState w = world;
  const double a0 = w.ego.lon_accel;
  int done_ticks = 0;
  for (int t = 0; t < ticks && !w.terminated; ++t) {
    const StepResult sr = step(w, action);
    ++done_ticks;
    if (sr.outcome.events.crash) {
      r.crash = true;
      break;
    }
    for (const auto& v : w.others) {
      if (std::abs(v.lat_pos - w.ego.lat_pos) >=
          0.5 * (v.width + w.ego.width))
        continue;
      const double gap = std::abs(v.lon_pos - w.ego.lon_pos) -
                         0.5 * (v.length + w.ego.length);
      r.min_separation = std::min(r.min_separation, gap);
    }
    if (w.termination_reason == TerminationReason::success) {
      r.success = true;
      break;
    }
  }
  if (done_ticks > 0)
    r.mean_jerk = std::abs(w.ego.lon_accel - a0) / (done_ticks * kDt);
  return r;
}

constexpr int kTraverseLookahead = 60;  // covers a full lateral traverse

bool commit_admissible(const WorldState& world, const ExpertConfig& cfg) {
  // the traffic models are deterministic, so a predicted clean traverse is a
  // guaranteed clean traverse as long as the commit is held
  const LookaheadResult r = lookahead(world, kChangeLane, kTraverseLookahead);
  if (r.crash || !r.success) return false;
  if (r.min_separation <= 0.1) return false;
  const LookaheadResult c =
      lookahead(world, kChangeLane, cfg.prediction_horizon);
  return c.mean_jerk < cfg.jerk_threshold;
}

int positioning_action(int gap_index) {
  switch (gap_index) {
    case 0: return kMoveAheadGap0;
    case 1: return kAlongsideGap1;
    case 2: return kBehindGap2;
    default: return kKeepLane;
  }
}

}  // namespace

namespace {

// target slot (position, speed) inside a gap; nullopt for a fully open gap
std::optional<std::pair<double, double>> gap_target(const WorldState& world,
                                                    int gap_index) {
  const GapAssignment gaps = identify_gaps(world);
  const auto& [rear_idx, front_idx] = gaps.gap_bounds[size_t(gap_index)];
  if (!rear_idx && !front_idx) return std::nullopt;

  const VehicleState* front = front_idx ? &world.others[size_t(*front_idx)] : nullptr;
  const VehicleState* rear = rear_idx ? &world.others[size_t(*rear_idx)] : nullptr;

  const double follow_dist =
      world.config.idm.s0 + world.ego.desired_time_gap * world.ego.lon_speed;
  double target_pos, gap_speed;
  if (front && rear) {
    target_pos = 0.5 * ((front->lon_pos - 0.5 * front->length) +
                        (rear->lon_pos + 0.5 * rear->length));
    gap_speed = 0.5 * (front->lon_speed + rear->lon_speed);
  } else if (front) {
    target_pos = front->lon_pos - 0.5 * front->length - follow_dist;
    gap_speed = front->lon_speed;
  } else {
    target_pos = rear->lon_pos + 0.5 * rear->length + follow_dist;
    gap_speed = rear->lon_speed;
  }
  return std::make_pair(target_pos, gap_speed);
}

}  // namespace

double estimate_completion_time(const WorldState& world, int gap_index) {
  if (gap_index < 0 || gap_index > 3)
    throw std::invalid_argument("estimate_completion_time: bad gap index");

  const double t_lat = kLaneWidth / kMaxLatSpeed;
  const auto target = gap_target(world, gap_index);
  if (!target) return t_lat;  // open gap: pure traverse
  const auto [target_pos, gap_speed] = *target;

  // constant-acceleration repositioning in the gap's moving frame
  const double d = target_pos - world.ego.lon_pos;
  const double a_cap = world.config.idm.a_max;
  double t_lon = 0.0;
  if (d != 0.0) {
    const double closing =
        (world.ego.lon_speed - gap_speed) * (d > 0.0 ? 1.0 : -1.0);
    t_lon = (-closing + std::sqrt(closing * closing + 2.0 * a_cap * std::abs(d))) /
            a_cap;
  }
  return t_lon + t_lat;
}

int expert_action(const WorldState& world, const ExpertConfig& cfg) {
  if (world.terminated)
    throw std::runtime_error("expert_action: world already terminated");

  // once the traverse has started keep going unless safety degrades badly;
  // re-running the comfort gate mid-maneuver would cause abort oscillation
  if (world.maneuver_phase == ManeuverPhase::lateral_in_progress) {
    const LookaheadResult r = lookahead(world, kChangeLane, kTraverseLookahead);
    if (!r.crash) return kChangeLane;
  } else if (commit_admissible(world, cfg)) {
    return kChangeLane;
  }

  // pick the admissible gap with the shortest estimated completion time;
  // stick with the gap the ego is already closest to unless another is
  // clearly faster (prevents dithering between neighbouring gaps)
  const GapAssignment gaps = identify_gaps(world);
  int best_gap = -1, near_gap = -1;
  double best_time = std::numeric_limits<double>::infinity();
  double near_time = std::numeric_limits<double>::infinity();
  double near_dist = std::numeric_limits<double>::infinity();
  for (int g = 0; g < 3; ++g) {
    // gap 0 is anchored ahead of V1 and gap 2 behind V2; without the anchor
    // vehicle those collapse into gap 1 and would double-count it
    if ((g == 0 && !gaps.v1) || (g == 2 && !gaps.v2)) continue;
    const auto& [rear_idx, front_idx] = gaps.gap_bounds[size_t(g)];
    if (rear_idx && front_idx) {
      const auto& front = world.others[size_t(*front_idx)];
      const auto& rear = world.others[size_t(*rear_idx)];
      const double len = (front.lon_pos - 0.5 * front.length) -
                         (rear.lon_pos + 0.5 * rear.length);
      if (len < world.ego.length + 2.0 * cfg.safety_buffer) continue;
    }
    const int act = positioning_action(g);
    const LookaheadResult r = lookahead(world, act, cfg.prediction_horizon);
    if (r.crash || r.min_separation <= cfg.safety_buffer) continue;
    double t = estimate_completion_time(world, g);
    const auto target = gap_target(world, g);
    const double dist =
        target ? std::abs(target->first - world.ego.lon_pos) : 0.0;
    // forward repositioning is capped by the current-lane leader: a slot
    // ahead can only be gained at the leader/gap speed difference
    if (target && target->first - world.ego.lon_pos > 5.0 && gaps.v4) {
      const auto& cap = world.others[size_t(*gaps.v4)];
      if (cap.lon_pos - world.ego.lon_pos < 60.0) {
        const double dv = cap.lon_speed - target->second;
        if (dv <= 0.3) continue;  // cannot out-pace the gap at all
        t = std::max(t, (target->first - world.ego.lon_pos) / dv);
      }
    }
    if (t < best_time) {
      best_time = t;
      best_gap = g;
    }
    if (dist < near_dist) {
      near_dist = dist;
      near_gap = g;
      near_time = t;
    }
  }
  if (near_gap >= 0 && near_time <= 1.25 * best_time + 0.5)
    return positioning_action(near_gap);
  return best_gap >= 0 ? positioning_action(best_gap) : kKeepLane;
}

DemoDataset collect_demos(int n_episodes, std::uint64_t seed,
                          const TrafficConfig& config,
                          const ExpertConfig& expert_cfg) {
  if (n_episodes < 1)
    throw std::invalid_argument("collect_demos: need at least one episode");

  DemoDataset ds;
  ds.seed = seed;
  {
    // order-sensitive hash over the config fields that shape the traffic
    std::uint64_t h = derive_seed(0x636f6e666967ULL, 0, 0);
    auto mix = [&h](double x) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof(bits));
      h = derive_seed(h ^ bits, 1, 0);
    };
    mix(config.segment_length);
    mix(config.init_speed_min);
    mix(config.init_speed_max);
    mix(config.desired_speed_min);
    mix(config.desired_speed_max);
    mix(config.time_gap_min);
    mix(config.time_gap_max);
    for (double d : config.density_multipliers) mix(d);
    mix(config.yield_probability);
    std::ostringstream ss;
    ss << std::hex << h;
    ds.config_hash = ss.str();
  }

  int successes = 0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    WorldState w = reset(config, derive_seed(seed, kDemoSeedTag, uint64_t(ep)));
    Trajectory traj;
    traj.episode_id = ep;
    while (!w.terminated) {
      TrajectoryRecord rec;
      rec.observation = build_observation(w);
      rec.action = expert_action(w, expert_cfg);
      const StepResult sr = step(w, rec.action);
      rec.events = sr.outcome.events;
      rec.done = sr.outcome.terminated;
      traj.records.push_back(std::move(rec));
    }
    if (w.termination_reason == TerminationReason::success) {
      ++successes;
      ds.trajectories.push_back(std::move(traj));
    }
  }
  if (double(successes) < 0.95 * double(n_episodes))
    throw std::runtime_error("collect_demos: expert success ratio below 0.95");
  ds.count = int(ds.trajectories.size());
  return ds;
}

void save_dataset(const DemoDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  nlohmann::json header{{"seed", ds.seed},
                        {"config_hash", ds.config_hash},
                        {"count", ds.count}};
  out << header.dump() << "\n";
  for (const auto& traj : ds.trajectories) {
    int t = 0;
    for (const auto& rec : traj.records) {
      nlohmann::json j;
      j["episode"] = traj.episode_id;
      j["t"] = t++;
      j["obs"] = std::vector<double>(rec.observation.data(),
                                     rec.observation.data() + kObsDim);
      j["action"] = rec.action;
      j["events"] = {int(rec.events.success), int(rec.events.crash),
                     int(rec.events.margin_invasion),
                     int(rec.events.lateral_move)};
      j["done"] = rec.done;
      out << j.dump() << "\n";
    }
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

DemoDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::string line;
  int line_no = 0;
  auto parse_line = [&](const std::string& s) {
    nlohmann::json j = nlohmann::json::parse(s, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error("load_dataset: parse error at line " +
                               std::to_string(line_no));
    return j;
  };

  if (!std::getline(in, line))
    throw std::runtime_error("load_dataset: empty file " + path);
  ++line_no;
  const nlohmann::json header = parse_line(line);

  DemoDataset ds;
  try {
    ds.seed = header.at("seed").get<std::uint64_t>();
    ds.config_hash = header.at("config_hash").get<std::string>();
    ds.count = header.at("count").get<int>();
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error("load_dataset: malformed header at line 1");
  }

  Trajectory current;
  bool have_current = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const nlohmann::json j = parse_line(line);
    TrajectoryRecord rec;
    int episode;
    try {
      episode = j.at("episode").get<int>();
      const auto obs = j.at("obs").get<std::vector<double>>();
      if (obs.size() != kObsDim)
        throw std::runtime_error("load_dataset: bad obs length at line " +
                                 std::to_string(line_no));
      rec.observation = Eigen::Map<const Eigen::VectorXd>(obs.data(), kObsDim);
      rec.action = j.at("action").get<int>();
      const auto ev = j.at("events").get<std::vector<int>>();
      if (ev.size() != 4)
        throw std::runtime_error("load_dataset: bad events length at line " +
                                 std::to_string(line_no));
      rec.events.success = ev[0] != 0;
      rec.events.crash = ev[1] != 0;
      rec.events.margin_invasion = ev[2] != 0;
      rec.events.lateral_move = ev[3] != 0;
      rec.done = j.at("done").get<bool>();
    } catch (const nlohmann::json::exception&) {
      throw std::runtime_error("load_dataset: malformed record at line " +
                               std::to_string(line_no));
    }
    if (!have_current || episode != current.episode_id) {
      if (have_current) {
        if (current.records.empty() || !current.records.back().done)
          throw std::runtime_error(
              "load_dataset: truncated trajectory before line " +
              std::to_string(line_no));
        ds.trajectories.push_back(std::move(current));
      }
      current = Trajectory{};
      current.episode_id = episode;
      have_current = true;
    }
    current.records.push_back(std::move(rec));
  }
  if (have_current) {
    if (current.records.empty() || !current.records.back().done)
      throw std::runtime_error("load_dataset: truncated final trajectory");
    ds.trajectories.push_back(std::move(current));
  }
  if (int(ds.trajectories.size()) != ds.count)
    throw std::runtime_error(
        "load_dataset: trajectory count does not match header");
  return ds;
}

}  // namespace augairl
