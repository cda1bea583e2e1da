#include "tfta/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace tfta {

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Mission with_key_points(const Mission& mission, bool enabled) {
  Mission m = mission;
  m.config.key_points = enabled;
  return m;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

int worker_count(int requested) {
  int n = std::max(1, requested);
  if (const char* env = std::getenv("TFTA_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

PolicyRollout run_policy_episode(const Mission& mission, const ActorCritic& model, std::uint64_t episode_seed,
                                 bool greedy, bool measure_latency) {
  using Clock = std::chrono::steady_clock;
  PolicyRollout out;
  std::mt19937_64 rng(episode_seed);
  Environment env(mission);
  env.reset(rng);
  while (!env.done()) {
    auto observations = env.observe_threats(rng);
    const auto t0 = Clock::now();
    const StateVector state = env.state_vector(observations);
    const ActionVector mean = actor_forward(model.actor, state);
    SampledAction sampled;
    if (greedy) {
      sampled.raw = mean.cwiseMax(-1.0 + 1e-6).cwiseMin(1.0 - 1e-6);
    } else {
      sampled = sample_action({mean, model.log_std, 0.0}, rng);
    }
    const FieldAction action = squash_action(sampled.raw);
    const Proposal proposal = env.propose(action, std::move(observations));
    if (measure_latency)
      env.record().latency_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());

    const StepResult r = env.commit(proposal, action, rng);
    out.total_return += r.reward;
    if (r.outcome == Outcome::kKeyPointFail) ++out.key_point_failures;
    if (!greedy)
      out.buffer.add({state, sampled.sample, sampled.log_prob, r.reward, critic_forward(model.critic, state), r.done});
  }
  out.record = std::move(env.record());
  return out;
}

EpisodeRecord run_fixed_episode(const Mission& mission, const FieldAction& action, std::uint64_t episode_seed) {
  std::mt19937_64 rng(episode_seed);
  Environment env(mission);
  env.reset(rng);
  while (!env.done()) env.step(action, rng);
  return env.record();
}

EpisodeRecord run_rrt_episode(const Mission& mission, const PlannerConfig& config, std::uint64_t episode_seed) {
  std::mt19937_64 rng(episode_seed);
  Environment env(mission);
  env.reset(rng);
  if (env.done()) return env.record();

  MdRrtPlanner planner(PlanningScene{&mission.terrain, mission.threats, 0.0}, config, mission.limits);
  const PlanResult plan = planner.plan(env.aircraft(), env.goal(), rng);
  if (!plan.reachable || !plan.path) {
    env.abort(Outcome::kNoPath);
    return env.record();
  }
  std::vector<Vec3> waypoints;
  for (std::size_t i = 1; i < plan.path->size(); ++i) waypoints.push_back((*plan.path)[i].position);
  waypoints.push_back(env.goal());

  const double reach = mission.field.cruise_speed * mission.config.dt;
  std::size_t k = 0;
  while (!env.done()) {
    auto observations = env.observe_threats(rng);
    const Vec3 p = env.aircraft().position;
    while (k + 1 < waypoints.size() && (waypoints[k] - p).norm() < reach) ++k;
    const Vec3 to = waypoints[k] - p;
    const Vec3 target = to.norm() > 0.0 ? Vec3(p + reach * to.normalized()) : p;
    env.commit(env.propose_waypoint(target, std::move(observations)), FieldAction{0.0, 0.0, 0.0, 0.0}, rng);
  }
  return env.record();
}

EvaluationResult evaluate_success(const Mission& mission, const ActorCritic& model, std::uint64_t seed, int episodes,
                                  int workers) {
  const Mission eval_mission = with_key_points(mission, false);
  std::vector<PolicyRollout> results(episodes);
  parallel_for(episodes, workers, [&](int i) {
    results[i] = run_policy_episode(eval_mission, model, derive_seed(seed, static_cast<std::uint64_t>(SeedStream::kEvaluation), i),
                                    true);
  });
  EvaluationResult r;
  for (const auto& e : results) {
    r.success_rate += e.record.outcome == Outcome::kGoal ? 1.0 : 0.0;
    r.mean_return += e.total_return;
  }
  r.success_rate /= episodes;
  r.mean_return /= episodes;
  return r;
}

TrainingResult train(const Scenario& scenario, const Mission& mission, const TrainOptions& options) {
  const Mission train_mission = with_key_points(mission, options.key_points);
  const PpoConfig& ppo = scenario.ppo;
  const TrainingConfig& tc = scenario.training;
  const int workers = worker_count(options.workers);

  TrainingResult result;
  std::mt19937_64 init_rng(derive_seed(options.seed, static_cast<std::uint64_t>(SeedStream::kInit), 0));
  result.model = make_actor_critic(kStateDim, ppo, init_rng);
  OptimizerState optimizer;
  std::mt19937_64 update_rng(derive_seed(options.seed, static_cast<std::uint64_t>(SeedStream::kUpdate), 0));
  RolloutBuffer pending;
  UpdateReport last_update;

  auto checkpoint = [&](int episode) {
    if (options.checkpoint_prefix.empty()) return;
    std::filesystem::path p = options.checkpoint_prefix;
    p += ".ep" + std::to_string(episode);
    save_model(result.model, p);
  };

  int episode = 0;
  while (episode < options.episodes) {
    const int n = std::min(tc.eval_every, options.episodes - episode);
    std::vector<PolicyRollout> rollouts(n);
    parallel_for(n, workers, [&](int i) {
      const auto seed = derive_seed(options.seed, static_cast<std::uint64_t>(SeedStream::kTraining), episode + i);
      rollouts[i] = run_policy_episode(train_mission, result.model, seed, false);
    });

    TrainingLogRow row;
    for (const auto& r : rollouts) {
      pending.append(r.buffer);
      row.train_return += r.total_return / n;
      row.train_success += (r.record.outcome == Outcome::kGoal ? 1.0 : 0.0) / n;
      row.key_point_events += r.record.key_point_checks;
      row.key_point_failures += r.key_point_failures;
    }
    if (pending.size() >= static_cast<std::size_t>(ppo.batch_size)) {
      last_update = ppo_update(result.model, optimizer, pending, ppo, update_rng);
      pending.clear();
      if (last_update.aborted) {
        result.aborted = true;
        checkpoint(episode + n);
        break;
      }
    }
    episode += n;

    const EvaluationResult eval = evaluate_success(mission, result.model, options.seed, tc.eval_episodes, workers);
    row.episode = episode;
    row.eval_return = eval.mean_return;
    row.eval_success = eval.success_rate;
    row.policy_loss = last_update.policy_loss;
    row.critic_loss = last_update.critic_loss;
    row.clip_fraction = last_update.clip_fraction;
    result.log.push_back(row);
    if (options.on_row) options.on_row(row);
    if (!result.episodes_to_target && eval.success_rate >= tc.success_target) result.episodes_to_target = episode;
    if (options.checkpoint_every > 0 && episode % options.checkpoint_every < n) checkpoint(episode);
    if (options.stop_at_target && result.episodes_to_target) break;
  }
  return result;
}

std::string training_log_header() {
  return "episode,eval_return,eval_success,train_return,train_success,key_point_events,key_point_failures,"
         "policy_loss,critic_loss,clip_fraction";
}

std::string format_log_row(const TrainingLogRow& r) {
  std::ostringstream out;
  out << r.episode << ',' << fmt(r.eval_return) << ',' << fmt(r.eval_success) << ',' << fmt(r.train_return) << ','
      << fmt(r.train_success) << ',' << r.key_point_events << ',' << r.key_point_failures << ','
      << fmt(r.policy_loss) << ',' << fmt(r.critic_loss) << ',' << fmt(r.clip_fraction);
  return out.str();
}

std::vector<BenchRow> run_bench(const Mission& mission, const ActorCritic& model, const BenchConfig& bench,
                                std::uint64_t seed) {
  const Mission m = with_key_points(mission, false);
  const FieldAction ifds{bench.ifds_beta, 0.6, 0.8, 1.1};
  std::vector<BenchRow> rows(3);
  rows[0].arm = "rfppo";
  rows[1].arm = "ifds";
  rows[2].arm = "rrt";
  for (int run = 0; run < bench.runs; ++run) {
    const auto s = derive_seed(seed, static_cast<std::uint64_t>(SeedStream::kBench), run);
    const EpisodeRecord records[] = {run_policy_episode(m, model, s, true).record, run_fixed_episode(m, ifds, s),
                                     run_rrt_episode(m, bench.rrt, s)};
    for (int a = 0; a < 3; ++a) {
      const MetricReport r = compute_metrics(records[a], m.limits);
      BenchRow& row = rows[a];
      ++row.runs;
      row.success_rate += r.outcome == Outcome::kGoal ? 1.0 : 0.0;
      row.path_length_km += r.path_length_m / 1000.0;
      row.max_climb_deg = std::max(row.max_climb_deg, r.max_climb_deg);
      row.smoothness += r.smoothness;
      row.min_threat_distance_m += r.min_threat_distance_m;
      row.worst_threat_distance_m =
          row.runs == 1 ? r.min_threat_distance_m : std::min(row.worst_threat_distance_m, r.min_threat_distance_m);
      row.kinematics_ok = row.kinematics_ok && r.kinematics_ok;
      row.outcomes.push_back(to_string(r.outcome));
    }
  }
  for (auto& row : rows) {
    if (row.runs == 0) continue;
    row.success_rate /= row.runs;
    row.path_length_km /= row.runs;
    row.smoothness /= row.runs;
    row.min_threat_distance_m /= row.runs;
  }
  return rows;
}

std::string bench_report_json(const std::vector<BenchRow>& rows) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  for (const auto& r : rows) {
    j.push_back({{"arm", r.arm},
                 {"runs", r.runs},
                 {"success_rate", r.success_rate},
                 {"path_length_km", r.path_length_km},
                 {"max_climb_deg", r.max_climb_deg},
                 {"smoothness", r.smoothness},
                 {"min_threat_distance_m", num(r.min_threat_distance_m)},
                 {"worst_threat_distance_m", num(r.worst_threat_distance_m)},
                 {"kinematics_ok", r.kinematics_ok},
                 {"outcomes", r.outcomes}});
  }
  return j.dump(2) + "\n";
}

std::string bench_report_table(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-6s %6s %10s %14s %13s %12s %16s\n", "arm", "runs", "success", "path_len_km",
                "max_climb_deg", "smoothness", "min_threat_m");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-6s %6d %10.3f %14.3f %13.3f %12.6f %16.1f\n", r.arm.c_str(), r.runs,
                  r.success_rate, r.path_length_km, r.max_climb_deg, r.smoothness, r.min_threat_distance_m);
    out << line;
  }
  return out.str();
}

}  // namespace tfta
