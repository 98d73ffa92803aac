#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace augairl {

constexpr int kObsDim = 44;
constexpr int kNumActions = 5;
constexpr double kDt = 0.1;          // 10 Hz decision / simulation tick
constexpr double kLaneWidth = 3.6;   // m
constexpr double kVehicleLength = 4.5;
constexpr double kVehicleWidth = 1.8;
constexpr double kMaxLatSpeed = 1.5;  // m/s, lateral command cap
constexpr int kMaxSteps = 200;        // decision-step timeout
constexpr double kSuccessLatTol = 0.3;
constexpr double kAbsentRelPos = 100.0;  // sentinel for missing vehicles
constexpr double kAbsentLane = -1.0;

using ObservationVector = Eigen::VectorXd;  // always length kObsDim

// Action ids: a0..a3 target gaps 0..2 on the target lane and the
// current-lane gap 3; a2 additionally commits the lateral move.
enum ActionId : int {
  kMoveAheadGap0 = 0,
  kAlongsideGap1 = 1,
  kChangeLane = 2,
  kBehindGap2 = 3,
  kKeepLane = 4,
};

struct VehicleState {
  int id = -1;
  double lon_pos = 0.0;   // m along road
  double lat_pos = 0.0;   // m from road centerline (middle-lane center)
  double lon_speed = 0.0;
  double lat_speed = 0.0;
  double lon_accel = 0.0;
  int lane_index = 1;  // 0 right .. 2 left
  double desired_speed = 30.0;
  double desired_time_gap = 1.5;
  double length = kVehicleLength;
  double width = kVehicleWidth;
  bool yield_willing = true;  // sampled per vehicle at reset
};

inline double lane_center(int lane) { return (lane - 1) * kLaneWidth; }
inline int lane_from_lat(double lat) {
  int lane = int(std::lround(lat / kLaneWidth)) + 1;
  return lane < 0 ? 0 : (lane > 2 ? 2 : lane);
}

struct IdmParams {
  double a_max = 1.5;   // m/s^2
  double b_comf = 2.0;  // comfortable deceleration
  double b_max = 4.0;   // hard clamp
  double delta = 4.0;
  double s0 = 2.0;  // jam distance, m
};

struct PidParams {
  double kp = 0.8;
  double ki = 0.05;
  double kd = 0.3;
  double integral_limit = 2.0;  // anti-windup clamp on the integral
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool has_prev = false;
};

struct SlidingModeParams {
  double lambda = 1.0;
  double gain = 2.0;           // k
  double boundary_layer = 2.0; // phi
};

struct TrafficConfig {
  int lane_count = 3;
  double segment_length = 500.0;
  double init_speed_min = 65.0 / 3.6;      // m/s
  double init_speed_max = 80.0 / 3.6;
  double desired_speed_min = 95.0 / 3.6;
  double desired_speed_max = 110.0 / 3.6;
  double time_gap_min = 1.0;  // s, inter-vehicle spacing at spawn
  double time_gap_max = 3.0;
  // spacing divisor per lane; 0 leaves the lane empty
  std::array<double, 3> density_multipliers = {1.6, 1.6, 1.6};
  double yield_overlap_fraction = 0.25;  // of ego width into the lane
  double yield_lat_speed = 0.1;          // m/s toward the vehicle's lane
  double yield_probability = 0.8;        // per-vehicle willingness
  IdmParams idm;
  PidParams pid;
  SlidingModeParams smc;
};

enum class ManeuverPhase { pre_lateral, lateral_in_progress, completed, aborted_returning };
enum class TerminationReason { none, success, crash, timeout };

struct StepEvents {
  bool success = false;
  bool crash = false;
  bool margin_invasion = false;
  bool lateral_move = false;
};

struct StepOutcome {
  StepEvents events;
  bool terminated = false;
  TerminationReason reason = TerminationReason::none;
};

struct WorldState {
  int time_step = 0;
  VehicleState ego;
  std::vector<VehicleState> others;
  int ego_target_lane = 1;
  int ego_origin_lane = 1;
  ManeuverPhase maneuver_phase = ManeuverPhase::pre_lateral;
  PidState lat_pid;
  bool terminated = false;
  TerminationReason termination_reason = TerminationReason::none;
  TrafficConfig config;
  std::mt19937_64 rng;
};

struct GapAssignment {
  // indices into world.others, front to back on the target lane; v4 is the
  // current-lane leader bounding gap 3
  std::optional<int> v0, v1, v2, v3, v4;
  // (rear, front) vehicle for gaps 0..3
  std::array<std::pair<std::optional<int>, std::optional<int>>, 4> gap_bounds;
};

WorldState reset(const TrafficConfig& config, std::uint64_t seed);
GapAssignment identify_gaps(const WorldState& world);
ObservationVector build_observation(const WorldState& world);

double idm_acceleration(const VehicleState& follower,
                        const VehicleState* leader, const IdmParams& params);
double pid_lateral(const VehicleState& ego, double target_lane_center,
                   PidState& state, const PidParams& params);
double sliding_mode_longitudinal(const VehicleState& ego,
                                 const VehicleState* leader,
                                 double desired_time_gap,
                                 const SlidingModeParams& params,
                                 const IdmParams& limits);

struct StepResult {
  StepOutcome outcome;
  ObservationVector observation;
};
StepResult step(WorldState& world, int action);

StepEvents detect_events(const WorldState& prev, const WorldState& next);

bool rectangles_overlap(const VehicleState& a, const VehicleState& b);
bool any_crash(const WorldState& world);

// Fixed divisors applied to observations before they enter any network.
const Eigen::VectorXd& observation_feature_scale();

std::string serialize_world(const WorldState& world);

}  // namespace augairl
