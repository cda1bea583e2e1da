#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tfta/dynamics.hpp"
#include "tfta/flowfield.hpp"
#include "tfta/mdrrt.hpp"
#include "tfta/terrain.hpp"
#include "tfta/threats.hpp"

namespace tfta {

inline constexpr int kStateDim = 16;
using StateVector = Eigen::Matrix<double, kStateDim, 1>;

enum class ObstacleRewardMode {
  kLiteral,    // the published expression, which decreases with distance
  kRepulsive,  // min(0, -literal): a penalty that fades out with distance
};

struct RewardConfig {
  double w_h = 1.0;
  double w_o = 1.0;
  double w_p = 0.5;
  double w_r = 1.0;
  double chi = 1.0;
  double delta = 1.0;
  double h_down = 450.0;
  double h_up = 550.0;
  double alpha_o = 1.0;
  double beta_o = 1.0;
  double kappa = 1.0;
  double phi_w = 1.0;
  double phi_good = deg2rad(25.0);
  ObstacleRewardMode obstacle_mode = ObstacleRewardMode::kRepulsive;
  bool sum_over_threats = false;
  /// With key points enabled, collision, ground and out-of-map endings also
  /// earn r_rrt = -ceil(remaining / (V dt)).
  bool failure_as_key_point = true;

  bool operator==(const RewardConfig&) const = default;
};

void validate(const RewardConfig& config);

/// Unit offset and log1p(distance / 1 km) for start, goal and the nearest
/// visible threat surface, then agl / h_up, climb / gamma_max, sin and cos of
/// the heading. A zero offset gives a zero unit vector and slot 0; a missing
/// threat gives a zero unit vector and slot -1.
StateVector build_state(const AircraftState& agent, const Vec3& start, const Vec3& goal,
                        std::span<const Observation> observations, const TerrainGrid& terrain,
                        const RewardConfig& reward, const KinematicLimits& limits);

/// Inverse of one (unit, slot) block of build_state.
Vec3 decode_offset(const StateVector& state, int block);

double reward_height(double h, double d_now, double d_all, const RewardConfig& config);
/// Literal obstacle term for a threat at surface distance d.
double reward_obstacle(double d, double r_obs, double r_threaten, const RewardConfig& config);
/// Term used by the environment, per config.obstacle_mode.
double shaped_obstacle_reward(double d, double r_obs, double r_threaten, const RewardConfig& config);
double reward_posture(double climb, double track_change, const RewardConfig& config);

struct RewardComponents {
  double height = 0.0;
  double obstacle = 0.0;
  double posture = 0.0;
  double rrt = 0.0;  // -T at a failed key point, else 0
};

double total_reward(const RewardComponents& components, const RewardConfig& config);

enum class Outcome { kNone, kGoal, kCollision, kGround, kOutOfMap, kKeyPointFail, kTimeout, kNoPath };

std::string to_string(Outcome outcome);
Outcome outcome_from_string(const std::string& text);

struct StepRecord {
  double time = 0.0;
  Vec3 position = Vec3::Zero();
  double agl = 0.0;
  double speed = 0.0;
  double climb = 0.0;
  double heading = 0.0;
  double roll = 0.0;
  FieldAction action{0.0, 0.0, 0.0, 0.0};
  double reward = 0.0;
  RewardComponents components;
  double threat_distance = 0.0;  // nearest surface over all threats, infinity without threats
};

/// Row 0 is the initial state (no action, no reward).
struct EpisodeRecord {
  std::vector<StepRecord> steps;
  Outcome outcome = Outcome::kNone;
  std::vector<double> latency_ms;  // per decision, when measured
  int key_point_checks = 0;

  bool operator==(const EpisodeRecord& other) const;
};

/// Disc in the horizontal plane; altitudes are set from the terrain.
struct Region {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;

  bool operator==(const Region&) const = default;
};

struct MissionConfig {
  double dt = 1.0;
  double goal_radius = 500.0;  // 3-D success sphere around the goal point
  double start_agl = 500.0;
  double goal_agl = 500.0;
  int max_steps = 0;  // 0 selects 3 * ceil(distance / (V dt))
  bool key_points = true;
  int collision_samples = 10;

  bool operator==(const MissionConfig&) const = default;
};

/// Immutable scenario data shared by all environments.
struct Mission {
  TerrainGrid terrain;
  std::vector<Threat> threats;
  Region start_region;
  Region goal_region;
  KinematicLimits limits;
  FieldConfig field;
  SensorConfig sensor;
  RewardConfig reward;
  PlannerConfig planner;  // key-point reachability planner
  MissionConfig config;

  bool operator==(const Mission&) const = default;
};

void validate(const Mission& mission);

/// What the field and the kinematic correction propose for one step.
struct Proposal {
  std::vector<Observation> observations;
  Vec3 velocity = Vec3::Zero();
  CorrectionResult correction;
  FieldTelemetry telemetry;
  Outcome failure = Outcome::kNone;  // set when the field itself reports a crash
};

struct StepResult {
  double reward = 0.0;
  RewardComponents components;
  bool done = false;
  Outcome outcome = Outcome::kNone;
  std::optional<PlanResult> key_point;
};

class Environment {
 public:
  explicit Environment(const Mission& mission);

  /// Draws start and goal from their regions.
  void reset(std::mt19937_64& rng);
  void reset(const Vec3& start, const Vec3& goal);
  /// Starts from an explicit state; a state below ground ends at once with outcome ground.
  void reset(const AircraftState& state, const Vec3& start, const Vec3& goal);

  /// Observation for the current state (consumes sensor draws).
  std::vector<Observation> observe_threats(std::mt19937_64& rng) const;
  StateVector state_vector(std::span<const Observation> observations) const;

  Proposal propose(const FieldAction& action, std::vector<Observation> observations) const;
  /// Same, but steering toward a given unrestricted waypoint instead of the field.
  Proposal propose_waypoint(const Vec3& unrestricted, std::vector<Observation> observations) const;
  /// Ends the episode without a step (for callers that cannot start it).
  void abort(Outcome outcome);
  StepResult commit(const Proposal& proposal, const FieldAction& action, std::mt19937_64& rng);
  StepResult step(const FieldAction& action, std::mt19937_64& rng);

  bool done() const { return record_.outcome != Outcome::kNone; }
  const AircraftState& aircraft() const { return state_; }
  const Vec3& start() const { return start_; }
  const Vec3& goal() const { return goal_; }
  double time() const { return time_; }
  int steps_taken() const { return steps_; }
  int max_steps() const { return max_steps_; }
  const EpisodeRecord& record() const { return record_; }
  EpisodeRecord& record() { return record_; }
  const Mission& mission() const { return *mission_; }

 private:
  double nearest_threat_distance(const Vec3& p, double t) const;

  const Mission* mission_;
  AircraftState state_;
  Vec3 start_ = Vec3::Zero();
  Vec3 goal_ = Vec3::Zero();
  double d_all_ = 0.0;
  double time_ = 0.0;
  int steps_ = 0;
  int max_steps_ = 0;
  KeyPointSchedule schedule_;
  EpisodeRecord record_;
};

struct MetricReport {
  double path_length_m = 0.0;
  double max_climb_deg = 0.0;
  double smoothness = 0.0;
  double min_threat_distance_m = 0.0;
  std::optional<double> latency_p50_ms;
  std::optional<double> latency_p99_ms;
  Outcome outcome = Outcome::kNone;
  int steps = 0;
  bool kinematics_ok = true;
  int skipped_points = 0;
};

MetricReport compute_metrics(const EpisodeRecord& record, const KinematicLimits& limits);

/// Nearest-rank percentile of a sample (q in [0, 100]).
double percentile(std::vector<double> values, double q);

void write_trajectory_csv(const EpisodeRecord& record, const std::filesystem::path& path);
void write_metrics_json(const MetricReport& report, const std::filesystem::path& path);

}  // namespace tfta
