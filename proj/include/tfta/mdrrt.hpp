#pragma once

#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "tfta/common.hpp"
#include "tfta/dynamics.hpp"
#include "tfta/terrain.hpp"
#include "tfta/threats.hpp"

namespace tfta {

struct TreeNode {
  Vec3 position = Vec3::Zero();
  double heading = 0.0;
  double climb = 0.0;
  std::optional<std::size_t> parent;
  double cost_to_come = 0.0;
  std::vector<std::size_t> children;
};

struct PlanResult {
  bool reachable = false;
  std::optional<std::vector<TreeNode>> path;  // root first
  long fail_estimate = 0;                     // predicted failed steps when unreachable
  double cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

struct PlannerConfig {
  int iter_max = 4000;
  double time_budget_s = 8.0;  // <= 0 disables the wall-clock cutoff
  double step = 1000.0;        // steering distance, m
  double goal_radius = 500.0;
  double w_len = 1.0;
  double w_tf = 1.0;
  double h_down = 450.0;  // sampling band and TF reference, AGL
  double h_up = 550.0;
  double gamma_rrt = 0.0;  // near-radius constant; 0 selects 10 * step
  double goal_bias = 0.1;
  bool stop_at_first_solution = false;
  int edge_samples = 10;
  double goal_connect_range = 3000.0;  // direct goal arcs from nodes this close; 0 disables

  double h_ref() const { return 0.5 * (h_down + h_up); }

  bool operator==(const PlannerConfig&) const = default;
};

/// World the planner searches: terrain plus threats frozen at `time`.
struct PlanningScene {
  const TerrainGrid* terrain = nullptr;
  std::span<const Threat> threats;
  double time = 0.0;
};

/// Sampling domain for the informed sampler; without one the sampler returns
/// raw spheroid samples.
struct SamplingRegion {
  const TerrainGrid* terrain = nullptr;
  double h_down = 450.0;
  double h_up = 550.0;
};

/// Uniform sample in the prolate spheroid with foci start/goal and major axis
/// c_best; uniform over the map in the AGL band when c_best is infinite. With a
/// region, z is clamped to the band whenever the clamped point stays inside the
/// spheroid.
Vec3 sample_in_ellipse(const Vec3& start, const Vec3& goal, double c_best, std::mt19937_64& rng,
                       const SamplingRegion* region = nullptr);

/// Dynamics-constrained extension of `from` toward `target`, at most `step` long.
TreeNode steer(const TreeNode& from, const Vec3& target, double step, double speed, const KinematicLimits& limits);

/// True when every interpolated sample (excluding a) is above ground, inside
/// the map and outside all threats.
bool collision_free(const Vec3& a, const Vec3& b, const PlanningScene& scene, int samples = 10);

/// w_len |b - a| + w_tf * mean |agl - h_ref| over the edge samples.
double edge_cost(const Vec3& a, const Vec3& b, const TerrainGrid& terrain, const PlannerConfig& config);

class MdRrtPlanner {
 public:
  MdRrtPlanner(PlanningScene scene, PlannerConfig config, KinematicLimits limits);

  /// Runs the search from a kinematic state. Deterministic for a given rng
  /// state unless the wall-clock budget expires first.
  PlanResult plan(const AircraftState& start, const Vec3& goal, std::mt19937_64& rng);

  const std::vector<TreeNode>& tree() const { return tree_; }
  /// Best solution cost after each iteration (infinity before the first one).
  const std::vector<double>& best_cost_history() const { return best_cost_history_; }
  /// Number of samples drawn after the first solution that fell outside the
  /// informed spheroid (should stay 0).
  int informed_violations() const { return informed_violations_; }

 private:
  AircraftState node_state(const TreeNode& node) const;
  double near_radius() const;
  bool try_rewire(std::size_t via, std::size_t target);
  void shift_subtree_cost(std::size_t node, double delta);
  double solution_cost(std::size_t node, const Vec3& goal) const;

  PlanningScene scene_;
  PlannerConfig config_;
  KinematicLimits limits_;
  double speed_ = 200.0;
  std::vector<TreeNode> tree_;
  std::vector<double> best_cost_history_;
  int informed_violations_ = 0;
};

/// Remaining-distance thresholds at which reachability is checked.
class KeyPointSchedule {
 public:
  KeyPointSchedule() = default;
  explicit KeyPointSchedule(std::vector<double> thresholds);
  /// Default fractions {0.95, 0.90, ..., 0.55} and {0.5, 0.4, ..., 0.1} of the
  /// start-goal distance.
  static KeyPointSchedule for_distance(double total_distance);

  /// Consumes every unconsumed threshold above `remaining`; true if any was.
  bool trigger(double remaining);
  const std::vector<double>& thresholds() const { return thresholds_; }
  std::size_t consumed_count() const;

 private:
  std::vector<double> thresholds_;
  std::vector<bool> consumed_;
};

/// Reachability gate. Returns nullopt when no threshold was crossed; otherwise
/// the plan, with fail_estimate = ceil(remaining / (V dt)) when unreachable.
std::optional<PlanResult> key_point_check(const AircraftState& state, const Vec3& goal, KeyPointSchedule& schedule,
                                          const PlanningScene& scene, const PlannerConfig& config,
                                          const KinematicLimits& limits, double dt, std::mt19937_64& rng);

}  // namespace tfta
