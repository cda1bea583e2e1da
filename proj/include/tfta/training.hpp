#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tfta/mission.hpp"
#include "tfta/ppo.hpp"
#include "tfta/scenario.hpp"

namespace tfta {

/// Independent, reproducible stream for (seed, purpose, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

enum class SeedStream : std::uint64_t { kTraining = 1, kEvaluation = 2, kUpdate = 3, kBench = 4, kInit = 5, kPlan = 6 };

/// Rollout worker count: `requested`, capped by TFTA_THREADS when set.
int worker_count(int requested);

struct PolicyRollout {
  EpisodeRecord record;
  RolloutBuffer buffer;  // filled only when sampling
  double total_return = 0.0;
  int key_point_failures = 0;
};

/// One episode under the policy. Greedy rollouts act on the mean; sampled ones
/// record every step into the buffer. With `measure_latency` the wall-clock of
/// build_state + actor_forward + field + correction is logged per decision.
PolicyRollout run_policy_episode(const Mission& mission, const ActorCritic& model, std::uint64_t episode_seed,
                                 bool greedy, bool measure_latency = false);

/// One episode with a constant field action.
EpisodeRecord run_fixed_episode(const Mission& mission, const FieldAction& action, std::uint64_t episode_seed);

/// Plans once with the global planner at t = 0, then flies the path open loop.
EpisodeRecord run_rrt_episode(const Mission& mission, const PlannerConfig& planner, std::uint64_t episode_seed);

struct EvaluationResult {
  double success_rate = 0.0;
  double mean_return = 0.0;
};

/// Greedy rollouts on a fixed set of evaluation seeds, key points off.
EvaluationResult evaluate_success(const Mission& mission, const ActorCritic& model, std::uint64_t seed, int episodes,
                                  int workers);

struct TrainingLogRow {
  int episode = 0;
  double eval_return = 0.0;
  double eval_success = 0.0;
  double train_return = 0.0;
  double train_success = 0.0;
  int key_point_events = 0;
  int key_point_failures = 0;
  double policy_loss = 0.0;
  double critic_loss = 0.0;
  double clip_fraction = 0.0;
};

struct TrainOptions {
  std::uint64_t seed = 1;
  int episodes = 0;
  bool key_points = true;
  int workers = 1;
  int checkpoint_every = 0;
  bool stop_at_target = false;  // end after the first evaluation at the success target
  std::filesystem::path checkpoint_prefix;  // checkpoints go to <prefix>.ep<N>
  std::function<void(const TrainingLogRow&)> on_row;
};

struct TrainingResult {
  ActorCritic model;
  std::vector<TrainingLogRow> log;
  std::optional<int> episodes_to_target;  // first evaluation at or above the success target
  bool aborted = false;                   // non-finite loss
};

TrainingResult train(const Scenario& scenario, const Mission& mission, const TrainOptions& options);

std::string training_log_header();
std::string format_log_row(const TrainingLogRow& row);

struct BenchRow {
  std::string arm;
  int runs = 0;
  double success_rate = 0.0;
  double path_length_km = 0.0;  // mean
  double max_climb_deg = 0.0;   // max over runs
  double smoothness = 0.0;      // mean
  double min_threat_distance_m = 0.0;  // mean of per-run minima
  double worst_threat_distance_m = 0.0;
  bool kinematics_ok = true;
  std::vector<std::string> outcomes;
};

/// Runs the rfppo, ifds and rrt arms on identical episode seeds.
std::vector<BenchRow> run_bench(const Mission& mission, const ActorCritic& model, const BenchConfig& bench,
                                std::uint64_t seed);

std::string bench_report_json(const std::vector<BenchRow>& rows);
std::string bench_report_table(const std::vector<BenchRow>& rows);

}  // namespace tfta
