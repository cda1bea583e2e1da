// Command-line front end: gen-terrain, train, plan, bench.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tfta/scenario.hpp"
#include "tfta/training.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct GenTerrainArgs {
  std::uint64_t seed = 1;
  std::uint32_t cols = 512;
  std::uint32_t rows = 512;
  double cell = 200.0;
  double relief = 1200.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  bool text = false;
  std::string out;
};

struct TrainArgs {
  std::string scenario;
  std::string out;
  std::string log;
  std::optional<int> episodes;
  std::optional<std::uint64_t> seed;
  bool no_keypoints = false;
  bool stop_at_target = false;
  std::optional<int> checkpoint_every;
  std::optional<int> workers;
};

struct PlanArgs {
  std::string scenario;
  std::string model;
  std::string trajectory;
  std::string metrics;
  std::optional<std::uint64_t> seed;
  bool no_timing = false;
};

struct BenchArgs {
  std::string scenario;
  std::string model;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw tfta::Error("cannot open for writing: " + path);
  out << text;
  if (!out) throw tfta::Error("failed writing: " + path);
}

tfta::ActorCritic load_compatible_model(const std::string& path) {
  tfta::ActorCritic model = tfta::load_model(path);
  if (model.state_dim() != tfta::kStateDim)
    throw tfta::ConfigError("model expects " + std::to_string(model.state_dim()) + " state inputs, environment has " +
                            std::to_string(tfta::kStateDim));
  return model;
}

int gen_terrain(const GenTerrainArgs& a) {
  const tfta::TerrainGrid grid =
      tfta::generate_terrain(a.seed, a.cols, a.rows, a.cell, a.relief, a.origin_x, a.origin_y);
  if (a.text) {
    tfta::save_dem_text(grid, a.out);
  } else {
    tfta::save_dem(grid, a.out);
  }
  std::cout << "wrote " << a.cols << "x" << a.rows << " DEM to " << a.out << "\n";
  return 0;
}

int train(const TrainArgs& a) {
  tfta::Scenario scenario = tfta::load_scenario(a.scenario);
  if (a.episodes) scenario.training.episodes = *a.episodes;
  if (a.checkpoint_every) scenario.training.checkpoint_every = *a.checkpoint_every;
  if (a.workers) scenario.training.workers = *a.workers;
  tfta::validate(scenario);
  const tfta::Mission mission = tfta::build_mission(scenario);

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw tfta::Error("cannot open training log: " + a.log);
    log << tfta::training_log_header() << "\n";
  }
  tfta::TrainOptions options;
  options.seed = a.seed.value_or(scenario.seed);
  options.episodes = scenario.training.episodes;
  options.key_points = !a.no_keypoints && scenario.mission.key_points;
  options.workers = scenario.training.workers;
  options.checkpoint_every = scenario.training.checkpoint_every;
  options.checkpoint_prefix = a.out;
  options.stop_at_target = a.stop_at_target;
  options.on_row = [&](const tfta::TrainingLogRow& row) {
    if (log.is_open()) log << tfta::format_log_row(row) << "\n" << std::flush;
  };
  const tfta::TrainingResult result = tfta::train(scenario, mission, options);
  tfta::save_model(result.model, a.out);
  if (result.aborted) {
    std::cerr << "training aborted: non-finite loss (checkpoint written)\n";
    return kExitRuntime;
  }
  const int trained = result.log.empty() ? 0 : result.log.back().episode;
  std::cout << "trained " << trained << " episodes";
  if (result.episodes_to_target)
    std::cout << "; success target reached at episode " << *result.episodes_to_target;
  std::cout << "\nmodel: " << a.out << "\n";
  return 0;
}

int plan(const PlanArgs& a) {
  const tfta::Scenario scenario = tfta::load_scenario(a.scenario);
  const tfta::Mission mission = tfta::build_mission(scenario);
  const tfta::ActorCritic model = load_compatible_model(a.model);
  tfta::Mission run = mission;
  run.config.key_points = false;
  const std::uint64_t seed = a.seed.value_or(scenario.seed);
  const auto rollout = tfta::run_policy_episode(
      run, model, tfta::derive_seed(seed, static_cast<std::uint64_t>(tfta::SeedStream::kPlan), 0), true, !a.no_timing);
  const tfta::MetricReport report = tfta::compute_metrics(rollout.record, mission.limits);
  tfta::write_trajectory_csv(rollout.record, a.trajectory);
  tfta::write_metrics_json(report, a.metrics);
  std::cout << "outcome " << tfta::to_string(report.outcome) << ", " << report.steps << " steps, "
            << report.path_length_m / 1000.0 << " km\n";
  return 0;
}

int bench(const BenchArgs& a) {
  tfta::Scenario scenario = tfta::load_scenario(a.scenario);
  if (a.runs) scenario.bench.runs = *a.runs;
  tfta::validate(scenario);
  const tfta::Mission mission = tfta::build_mission(scenario);
  const tfta::ActorCritic model = load_compatible_model(a.model);
  const auto rows = tfta::run_bench(mission, model, scenario.bench, a.seed.value_or(scenario.seed));
  write_text(a.out, tfta::bench_report_json(rows));
  std::cout << tfta::bench_report_table(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Terrain-following route planner: disturbed flow field tuned by PPO"};
  app.require_subcommand(1);

  GenTerrainArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-terrain", "Generate a synthetic DEM");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--cols", gen.cols, "Samples along x")->check(CLI::Range(2u, 1u << 15));
  gen_cmd->add_option("--rows", gen.rows, "Samples along y")->check(CLI::Range(2u, 1u << 15));
  gen_cmd->add_option("--cell", gen.cell, "Sample spacing, m")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--relief", gen.relief, "Max minus min height, m")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--origin-x", gen.origin_x, "x of the first sample, m");
  gen_cmd->add_option("--origin-y", gen.origin_y, "y of the first sample, m");
  gen_cmd->add_flag("--text", gen.text, "Write the plain-text DEM variant");
  gen_cmd->add_option("--out", gen.out, "Output DEM path")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the policy on a scenario");
  train_cmd->add_option("--scenario", tr.scenario, "Scenario file")->required();
  train_cmd->add_option("--out", tr.out, "Model file")->required();
  train_cmd->add_option("--log", tr.log, "Training log (CSV)");
  train_cmd->add_option("--episodes", tr.episodes, "Episodes (overrides the scenario)")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--seed", tr.seed, "Seed (overrides the scenario)");
  train_cmd->add_flag("--no-keypoints", tr.no_keypoints, "Disable key-point reachability checks");
  train_cmd->add_flag("--stop-at-target", tr.stop_at_target, "Stop at the first evaluation meeting the success target");
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every, "Checkpoint cadence in episodes")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--workers", tr.workers, "Rollout threads (capped by TFTA_THREADS)")
      ->check(CLI::PositiveNumber);

  PlanArgs pl;
  auto* plan_cmd = app.add_subcommand("plan", "Fly one greedy episode with a trained model");
  plan_cmd->add_option("--scenario", pl.scenario, "Scenario file")->required();
  plan_cmd->add_option("--model", pl.model, "Model file")->required();
  plan_cmd->add_option("--trajectory", pl.trajectory, "Trajectory CSV output")->required();
  plan_cmd->add_option("--metrics", pl.metrics, "Metrics JSON output")->required();
  plan_cmd->add_option("--seed", pl.seed, "Seed (overrides the scenario)");
  plan_cmd->add_flag("--no-timing", pl.no_timing, "Omit wall-clock latency so outputs are reproducible");

  BenchArgs be;
  auto* bench_cmd = app.add_subcommand("bench", "Compare rfppo, fixed-parameter ifds and rrt arms");
  bench_cmd->add_option("--scenario", be.scenario, "Scenario file")->required();
  bench_cmd->add_option("--model", be.model, "Model file for the rfppo arm")->required();
  bench_cmd->add_option("--out", be.out, "Report JSON output")->required();
  bench_cmd->add_option("--seed", be.seed, "Seed (overrides the scenario)");
  bench_cmd->add_option("--runs", be.runs, "Episodes per arm")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen_cmd) return gen_terrain(gen);
    if (*train_cmd) return train(tr);
    if (*plan_cmd) return plan(pl);
    if (*bench_cmd) return bench(be);
  } catch (const tfta::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
