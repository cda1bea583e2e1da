#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "tfta/mission.hpp"
#include "tfta/ppo.hpp"

namespace tfta {

struct TerrainSpec {
  std::optional<std::string> file;  // DEM path; relative paths resolve against the scenario file
  std::uint64_t seed = 1;
  std::uint32_t cols = 141;
  std::uint32_t rows = 141;
  double cell = 100.0;
  double relief = 800.0;
  double origin_x = 0.0;
  double origin_y = 0.0;

  bool operator==(const TerrainSpec&) const = default;
};

struct TrainingConfig {
  int episodes = 3000;
  int eval_every = 10;          // episodes per round; evaluation after each round
  int eval_episodes = 10;       // greedy rollouts per evaluation
  int checkpoint_every = 0;     // episodes, 0 disables
  int workers = 1;              // rollout threads, capped by TFTA_THREADS
  double success_target = 0.8;  // for the "episodes to target" summary

  bool operator==(const TrainingConfig&) const = default;
};

/// Planner settings that keep runs reproducible: no wall-clock cutoff.
inline PlannerConfig deterministic_planner(bool stop_at_first_solution, int iter_max) {
  PlannerConfig p;
  p.time_budget_s = 0.0;
  p.stop_at_first_solution = stop_at_first_solution;
  p.iter_max = iter_max;
  return p;
}

struct BenchConfig {
  int runs = 10;
  double ifds_beta = 1.525;  // fixed-parameter arm keeps the box-center ground gain
  PlannerConfig rrt = deterministic_planner(false, 3000);  // global planner for the rrt arm

  bool operator==(const BenchConfig&) const = default;
};

struct Scenario {
  std::uint64_t seed = 1;
  TerrainSpec terrain;
  std::vector<Threat> threats;
  Region start_region;
  Region goal_region;
  KinematicLimits limits;
  FieldConfig field;
  SensorConfig sensor;
  RewardConfig reward;
  PlannerConfig planner = deterministic_planner(true, 1500);  // key-point checks
  MissionConfig mission;
  PpoConfig ppo;
  TrainingConfig training;
  BenchConfig bench;
  std::filesystem::path base_dir;  // not serialized

  bool operator==(const Scenario& other) const;
};

/// Missing keys take their defaults; unknown keys and invalid values raise ConfigError.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);
std::string serialize_scenario(const Scenario& scenario);

/// Throws ConfigError on any invariant violation (terrain is checked by build_mission).
void validate(const Scenario& scenario);

/// Loads or generates the terrain and assembles the environment data.
Mission build_mission(const Scenario& scenario);

}  // namespace tfta
