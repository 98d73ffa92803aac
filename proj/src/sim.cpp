#include "augairl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "augairl/nn.hpp"
#include "json.hpp"

namespace augairl {

namespace {

double clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

// nearest leader of `self` on `lane` among ego+others; nullptr if none
const VehicleState* lane_leader(const WorldState& w, const VehicleState& self,
                                int lane) {
  const VehicleState* best = nullptr;
  auto consider = [&](const VehicleState& v) {
    if (v.id == self.id || v.lane_index != lane) return;
    if (v.lon_pos <= self.lon_pos) return;
    if (!best || v.lon_pos < best->lon_pos) best = &v;
  };
  consider(w.ego);
  for (const auto& v : w.others) consider(v);
  return best;
}

}  // namespace

bool rectangles_overlap(const VehicleState& a, const VehicleState& b) {
  return std::abs(a.lon_pos - b.lon_pos) < 0.5 * (a.length + b.length) &&
         std::abs(a.lat_pos - b.lat_pos) < 0.5 * (a.width + b.width);
}

bool any_crash(const WorldState& w) {
  for (std::size_t i = 0; i < w.others.size(); ++i) {
    if (rectangles_overlap(w.ego, w.others[i])) return true;
    for (std::size_t j = i + 1; j < w.others.size(); ++j)
      if (rectangles_overlap(w.others[i], w.others[j])) return true;
  }
  return false;
}

WorldState reset(const TrafficConfig& config, std::uint64_t seed) {
  for (double d : config.density_multipliers)
    if (d < 0.0) throw std::invalid_argument("reset: negative lane density");

  WorldState w;
  w.config = config;
  w.rng.seed(seed);

  w.ego.id = 0;
  w.ego.lon_pos = 50.0;  // command active after ~50 m of travel
  w.ego.lane_index = 1;
  w.ego.lat_pos = lane_center(1);
  w.ego.lon_speed =
      uniform_range(w.rng, config.init_speed_min, config.init_speed_max);
  w.ego.desired_speed = uniform_range(w.rng, config.desired_speed_min,
                                      config.desired_speed_max);
  w.ego.desired_time_gap =
      uniform_range(w.rng, config.time_gap_min, config.time_gap_max);
  w.ego_origin_lane = 1;
  w.ego_target_lane = (w.rng() & 1) ? 2 : 0;

  int next_id = 1;
  for (int lane = 0; lane < config.lane_count; ++lane) {
    const double density = config.density_multipliers[size_t(lane)];
    if (density == 0.0) continue;
    double cursor = config.segment_length - uniform_range(w.rng, 0.0, 30.0);
    while (cursor >= 0.0) {
      VehicleState v;
      v.id = next_id++;
      v.lane_index = lane;
      v.lat_pos = lane_center(lane);
      v.lon_pos = cursor;
      v.lon_speed =
          uniform_range(w.rng, config.init_speed_min, config.init_speed_max);
      v.desired_speed = uniform_range(w.rng, config.desired_speed_min,
                                      config.desired_speed_max);
      v.desired_time_gap =
          uniform_range(w.rng, config.time_gap_min, config.time_gap_max);
      v.yield_willing = uniform01(w.rng) < config.yield_probability;
      w.others.push_back(v);

      const double gap_time =
          uniform_range(w.rng, config.time_gap_min, config.time_gap_max) /
          density;
      // next (follower) vehicle's speed is sampled on its own iteration; use
      // the current speed for spacing so the bumper gap covers either
      cursor -= v.length + gap_time * v.lon_speed;
    }
  }

  // drop middle-lane vehicles spawned too close to the ego
  const double ego_need = config.time_gap_min * w.ego.lon_speed;
  std::erase_if(w.others, [&](const VehicleState& v) {
    if (v.lane_index != 1) return false;
    if (v.lon_pos >= w.ego.lon_pos)
      return v.lon_pos - w.ego.lon_pos - v.length < ego_need;
    return w.ego.lon_pos - v.lon_pos - v.length <
           config.time_gap_min * v.lon_speed;
  });

  if (any_crash(w)) throw std::runtime_error("reset: infeasible traffic config");
  return w;
}

GapAssignment identify_gaps(const WorldState& w) {
  GapAssignment g;
  // target-lane vehicles sorted front to back
  std::vector<int> lane_idx;
  for (std::size_t i = 0; i < w.others.size(); ++i)
    if (w.others[i].lane_index == w.ego_target_lane) lane_idx.push_back(int(i));
  std::sort(lane_idx.begin(), lane_idx.end(), [&](int a, int b) {
    return w.others[size_t(a)].lon_pos > w.others[size_t(b)].lon_pos;
  });
  // V1: nearest leader (alongside counts as leader), V2: nearest follower
  int k = 0;
  while (k < int(lane_idx.size()) &&
         w.others[size_t(lane_idx[size_t(k)])].lon_pos >= w.ego.lon_pos)
    ++k;
  if (k >= 1) g.v1 = lane_idx[size_t(k - 1)];
  if (k >= 2) g.v0 = lane_idx[size_t(k - 2)];
  if (k < int(lane_idx.size())) g.v2 = lane_idx[size_t(k)];
  if (k + 1 < int(lane_idx.size())) g.v3 = lane_idx[size_t(k + 1)];

  const VehicleState* lead = lane_leader(w, w.ego, w.ego.lane_index);
  if (lead && lead->id != 0) {
    for (std::size_t i = 0; i < w.others.size(); ++i)
      if (w.others[i].id == lead->id) g.v4 = int(i);
  }

  g.gap_bounds[0] = {g.v1, g.v0};
  g.gap_bounds[1] = {g.v2, g.v1};
  g.gap_bounds[2] = {g.v3, g.v2};
  g.gap_bounds[3] = {std::nullopt, g.v4};
  return g;
}

ObservationVector build_observation(const WorldState& w) {
  const GapAssignment g = identify_gaps(w);
  ObservationVector obs = Eigen::VectorXd::Zero(kObsDim);

  auto write_block = [&](int block, const VehicleState* v, bool is_ego) {
    const int o = block * 7;
    if (!v) {
      obs(o + 0) = kAbsentRelPos;
      obs(o + 5) = kAbsentLane;
      return;  // speeds/accel stay 0, presence 0
    }
    obs(o + 0) = is_ego ? v->lon_pos : v->lon_pos - w.ego.lon_pos;
    obs(o + 1) = v->lat_pos;
    obs(o + 2) = v->lon_speed;
    obs(o + 3) = v->lat_speed;
    obs(o + 4) = v->lon_accel;
    obs(o + 5) = v->lane_index;
    obs(o + 6) = 1.0;
  };

  auto veh = [&](const std::optional<int>& idx) -> const VehicleState* {
    return idx ? &w.others[size_t(*idx)] : nullptr;
  };
  write_block(0, &w.ego, true);
  write_block(1, veh(g.v0), false);
  write_block(2, veh(g.v1), false);
  write_block(3, veh(g.v2), false);
  write_block(4, veh(g.v3), false);
  write_block(5, veh(g.v4), false);
  obs(42) = w.ego_target_lane;
  obs(43) = w.ego_target_lane - w.ego_origin_lane;  // signed direction
  return obs;
}

double idm_acceleration(const VehicleState& f, const VehicleState* leader,
                        const IdmParams& p) {
  const double v = std::max(0.0, f.lon_speed);
  const double v0 = std::max(0.1, f.desired_speed);
  double a = p.a_max * (1.0 - std::pow(v / v0, p.delta));
  if (leader) {
    const double gap =
        leader->lon_pos - f.lon_pos - 0.5 * (leader->length + f.length);
    const double dv = v - leader->lon_speed;
    const double s_star = p.s0 + std::max(0.0, v * f.desired_time_gap +
                                                   v * dv /
                                                       (2.0 * std::sqrt(p.a_max *
                                                                        p.b_comf)));
    const double s = std::max(0.1, gap);
    a -= p.a_max * (s_star / s) * (s_star / s);
  }
  return clamp(a, -p.b_max, p.a_max);
}

double pid_lateral(const VehicleState& ego, double target_lane_center,
                   PidState& st, const PidParams& p) {
  const double e = target_lane_center - ego.lat_pos;
  st.integral = clamp(st.integral + e * kDt, -p.integral_limit, p.integral_limit);
  const double de = st.has_prev ? (e - st.prev_error) / kDt : 0.0;
  st.prev_error = e;
  st.has_prev = true;
  return clamp(p.kp * e + p.ki * st.integral + p.kd * de, -kMaxLatSpeed,
               kMaxLatSpeed);
}

double sliding_mode_longitudinal(const VehicleState& ego,
                                 const VehicleState* leader,
                                 double desired_time_gap,
                                 const SlidingModeParams& p,
                                 const IdmParams& limits) {
  double s;
  if (leader) {
    const double gap =
        leader->lon_pos - ego.lon_pos - 0.5 * (leader->length + ego.length);
    s = (gap - desired_time_gap * ego.lon_speed) +
        p.lambda * (leader->lon_speed - ego.lon_speed);
  } else {
    s = p.lambda * (ego.desired_speed - ego.lon_speed);
  }
  const double sat = clamp(s / p.boundary_layer, -1.0, 1.0);
  return clamp(p.gain * sat, -limits.b_max, limits.a_max);
}

StepEvents detect_events(const WorldState& prev, const WorldState& next) {
  StepEvents ev;
  ev.crash = any_crash(next);
  ev.success = !ev.crash &&
               prev.maneuver_phase == ManeuverPhase::lateral_in_progress &&
               next.maneuver_phase == ManeuverPhase::completed;
  ev.lateral_move =
      next.maneuver_phase == ManeuverPhase::lateral_in_progress || ev.success;
  const double margin =
      std::max(2.0, 0.5 * next.ego.lon_speed);
  for (const auto& v : next.others) {
    if (std::abs(v.lat_pos - next.ego.lat_pos) >=
        0.5 * (v.width + next.ego.width))
      continue;
    const double gap = std::abs(v.lon_pos - next.ego.lon_pos) -
                       0.5 * (v.length + next.ego.length);
    if (gap < margin) {
      ev.margin_invasion = true;
      break;
    }
  }
  return ev;
}

StepResult step(WorldState& w, int action) {
  if (w.terminated) throw std::runtime_error("step: world already terminated");
  if (action < 0 || action >= kNumActions)
    throw std::invalid_argument("step: invalid action id");

  const WorldState prev = w;
  const GapAssignment gaps = identify_gaps(w);

  // maneuver phase transitions driven by the chosen action
  if (action == kChangeLane) {
    if (w.maneuver_phase == ManeuverPhase::pre_lateral ||
        w.maneuver_phase == ManeuverPhase::aborted_returning)
      w.maneuver_phase = ManeuverPhase::lateral_in_progress;
  } else if (w.maneuver_phase == ManeuverPhase::lateral_in_progress) {
    w.maneuver_phase = ManeuverPhase::aborted_returning;
  }

  // lateral reference
  double lat_ref = lane_center(w.ego_origin_lane);
  if (w.maneuver_phase == ManeuverPhase::lateral_in_progress ||
      w.maneuver_phase == ManeuverPhase::completed)
    lat_ref = lane_center(w.ego_target_lane);
  const double lat_cmd = pid_lateral(w.ego, lat_ref, w.lat_pid, w.config.pid);

  // longitudinal reference leader per action semantics
  auto veh = [&](const std::optional<int>& idx) -> const VehicleState* {
    return idx ? &w.others[size_t(*idx)] : nullptr;
  };
  const VehicleState* ref_leader = nullptr;
  switch (action) {
    case kMoveAheadGap0: ref_leader = veh(gaps.v0); break;
    case kAlongsideGap1:
    case kChangeLane: ref_leader = veh(gaps.v1); break;
    case kBehindGap2: ref_leader = veh(gaps.v2); break;
    case kKeepLane: ref_leader = veh(gaps.v4); break;
    default: break;
  }
  double lon_cmd = sliding_mode_longitudinal(
      w.ego, ref_leader, w.ego.desired_time_gap, w.config.smc, w.config.idm);
  // never out-run the current-lane leader
  const VehicleState* safety_leader = lane_leader(w, w.ego, w.ego.lane_index);
  if (safety_leader)
    lon_cmd = std::min(
        lon_cmd, sliding_mode_longitudinal(w.ego, safety_leader,
                                           w.ego.desired_time_gap,
                                           w.config.smc, w.config.idm));

  // surrounding vehicles: IDM against the lane leader, yielding to a
  // laterally-committing ego when willing (synchronous update from prev state)
  std::vector<double> accel(w.others.size());
  for (std::size_t i = 0; i < w.others.size(); ++i) {
    const VehicleState& v = prev.others[i];
    const VehicleState* lead = lane_leader(prev, v, v.lane_index);
    double a = idm_acceleration(v, lead, w.config.idm);
    if (v.yield_willing && prev.ego.lon_pos > v.lon_pos &&
        (!lead || prev.ego.lon_pos < lead->lon_pos) &&
        prev.ego.lane_index != v.lane_index) {
      // lateral overlap of the ego into this vehicle's lane band
      const double band_lo = lane_center(v.lane_index) - 0.5 * kLaneWidth;
      const double band_hi = lane_center(v.lane_index) + 0.5 * kLaneWidth;
      const double lo = std::max(band_lo, prev.ego.lat_pos - 0.5 * prev.ego.width);
      const double hi = std::min(band_hi, prev.ego.lat_pos + 0.5 * prev.ego.width);
      const double frac = std::max(0.0, hi - lo) / prev.ego.width;
      const double toward = (lane_center(v.lane_index) > prev.ego.lat_pos)
                                ? prev.ego.lat_speed
                                : -prev.ego.lat_speed;
      if (frac > w.config.yield_overlap_fraction &&
          toward > w.config.yield_lat_speed)
        a = std::min(a, idm_acceleration(v, &prev.ego, w.config.idm));
    }
    accel[i] = a;
  }

  // integrate
  auto integrate_lon = [](VehicleState& v, double a) {
    v.lon_accel = a;
    v.lon_pos += v.lon_speed * kDt + 0.5 * a * kDt * kDt;
    v.lon_speed = std::max(0.0, v.lon_speed + a * kDt);
  };
  integrate_lon(w.ego, lon_cmd);
  w.ego.lat_speed = lat_cmd;
  w.ego.lat_pos += lat_cmd * kDt;
  w.ego.lane_index = lane_from_lat(w.ego.lat_pos);
  for (std::size_t i = 0; i < w.others.size(); ++i)
    integrate_lon(w.others[i], accel[i]);

  // phase settling
  if (w.maneuver_phase == ManeuverPhase::lateral_in_progress &&
      std::abs(w.ego.lat_pos - lane_center(w.ego_target_lane)) < kSuccessLatTol)
    w.maneuver_phase = ManeuverPhase::completed;
  if (w.maneuver_phase == ManeuverPhase::aborted_returning &&
      std::abs(w.ego.lat_pos - lane_center(w.ego_origin_lane)) < kSuccessLatTol)
    w.maneuver_phase = ManeuverPhase::pre_lateral;

  w.time_step += 1;

  StepResult res;
  res.outcome.events = detect_events(prev, w);
  if (res.outcome.events.crash) {
    w.terminated = true;
    w.termination_reason = TerminationReason::crash;
  } else if (res.outcome.events.success) {
    w.terminated = true;
    w.termination_reason = TerminationReason::success;
  } else if (w.time_step >= kMaxSteps) {
    w.terminated = true;
    w.termination_reason = TerminationReason::timeout;
  }
  res.outcome.terminated = w.terminated;
  res.outcome.reason = w.termination_reason;
  res.observation = build_observation(w);
  return res;
}

const Eigen::VectorXd& observation_feature_scale() {
  static const Eigen::VectorXd scale = [] {
    Eigen::VectorXd s(kObsDim);
    for (int block = 0; block < 6; ++block) {
      const int o = block * 7;
      s(o + 0) = block == 0 ? 500.0 : 50.0;  // abs / relative lon position
      s(o + 1) = kLaneWidth;
      s(o + 2) = 30.0;  // lon speed
      s(o + 3) = kMaxLatSpeed;
      s(o + 4) = 3.0;  // lon accel
      s(o + 5) = 2.0;  // lane index
      s(o + 6) = 1.0;  // presence
    }
    s(42) = 2.0;
    s(43) = 1.0;
    return s;
  }();
  return scale;
}

std::string serialize_world(const WorldState& w) {
  nlohmann::json j;
  auto veh_json = [](const VehicleState& v) {
    return nlohmann::json{{"id", v.id},
                          {"lon_pos", v.lon_pos},
                          {"lat_pos", v.lat_pos},
                          {"lon_speed", v.lon_speed},
                          {"lat_speed", v.lat_speed},
                          {"lon_accel", v.lon_accel},
                          {"lane_index", v.lane_index},
                          {"desired_speed", v.desired_speed},
                          {"desired_time_gap", v.desired_time_gap},
                          {"yield_willing", v.yield_willing}};
  };
  j["time_step"] = w.time_step;
  j["ego"] = veh_json(w.ego);
  j["others"] = nlohmann::json::array();
  for (const auto& v : w.others) j["others"].push_back(veh_json(v));
  j["ego_target_lane"] = w.ego_target_lane;
  j["ego_origin_lane"] = w.ego_origin_lane;
  j["maneuver_phase"] = int(w.maneuver_phase);
  j["terminated"] = w.terminated;
  std::ostringstream rng_ss;
  rng_ss << w.rng;
  j["rng_state"] = rng_ss.str();
  return j.dump();
}

}  // namespace augairl
