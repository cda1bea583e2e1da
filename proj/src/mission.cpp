#include "tfta/mission.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include <json.hpp>

namespace tfta {

namespace {

constexpr double kKm = 1000.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

void encode_offset(StateVector& s, int block, const Vec3& offset) {
  const double d = offset.norm();
  s.segment<3>(4 * block) = d > 0.0 ? Vec3(offset / d) : Vec3::Zero();
  s[4 * block + 3] = std::log1p(d / kKm);
}

// Earliest fraction in [0, 1] at which the segment a->b is within r of c.
std::optional<double> segment_sphere_entry(const Vec3& a, const Vec3& b, const Vec3& c, double r) {
  const Vec3 d = b - a;
  const Vec3 m = a - c;
  const double cc = m.squaredNorm() - r * r;
  if (cc <= 0.0) return 0.0;
  const double aa = d.squaredNorm();
  if (aa == 0.0) return std::nullopt;
  const double bb = m.dot(d);
  const double disc = bb * bb - aa * cc;
  if (disc < 0.0) return std::nullopt;
  const double f = (-bb - std::sqrt(disc)) / aa;
  if (f < 0.0 || f > 1.0) return std::nullopt;
  return f;
}

Vec3 sample_in_region(const Region& region, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = region.radius * std::sqrt(unit(rng));
  const double a = 2.0 * kPi * unit(rng);
  return {region.x + r * std::cos(a), region.y + r * std::sin(a), 0.0};
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void validate(const RewardConfig& c) {
  for (double w : {c.w_h, c.w_o, c.w_p, c.w_r, c.chi, c.delta, c.alpha_o, c.beta_o, c.kappa, c.phi_w})
    if (!(w >= 0.0)) throw ConfigError("reward weights must be >= 0");
  if (!(c.h_down > 0.0 && c.h_down < c.h_up)) throw ConfigError("reward band needs 0 < h_down < h_up");
  if (!(c.phi_good > 0.0)) throw ConfigError("phi_good must be > 0");
}

StateVector build_state(const AircraftState& agent, const Vec3& start, const Vec3& goal,
                        std::span<const Observation> observations, const TerrainGrid& terrain,
                        const RewardConfig& reward, const KinematicLimits& limits) {
  StateVector s = StateVector::Zero();
  encode_offset(s, 0, start - agent.position);
  encode_offset(s, 1, goal - agent.position);

  const ThreatContact* nearest = nullptr;
  for (const auto& o : observations)
    if (o.visible() && (nearest == nullptr || o.contact->distance < nearest->distance)) nearest = &*o.contact;
  if (nearest) {
    encode_offset(s, 2, nearest->rel_position);
  } else {
    s[11] = -1.0;
  }
  s[12] = terrain.agl(agent.position) / reward.h_up;
  s[13] = agent.climb / limits.gamma_max;
  s[14] = std::sin(agent.heading);
  s[15] = std::cos(agent.heading);
  return s;
}

Vec3 decode_offset(const StateVector& state, int block) {
  const double slot = state[4 * block + 3];
  if (slot < 0.0) throw Error("state block is flagged absent");
  return state.segment<3>(4 * block) * (kKm * std::expm1(slot));
}

double reward_height(double h, double d_now, double d_all, const RewardConfig& c) {
  if (!(h > 0.0)) throw CrashError("height reward needs a positive altitude");
  const double progress = d_all > 0.0 ? std::clamp(d_now, 0.0, d_all) / d_all : 0.0;
  return -c.chi * ((c.h_down - h) / h) - c.delta * ((h - c.h_up) / h) - progress;
}

double reward_obstacle(double d, double r_obs, double r_threaten, const RewardConfig& c) {
  return -c.alpha_o * ((d - r_obs) / r_obs) - c.beta_o * ((d - r_obs - r_threaten) / (r_obs + r_threaten));
}

double shaped_obstacle_reward(double d, double r_obs, double r_threaten, const RewardConfig& c) {
  const double literal = reward_obstacle(d, r_obs, r_threaten, c);
  if (c.obstacle_mode == ObstacleRewardMode::kLiteral) return literal;
  return std::min(0.0, -literal);
}

double reward_posture(double climb, double track_change, const RewardConfig& c) {
  double r = 0.0;
  const double g = c.phi_good;
  if (std::abs(climb) > g) r -= c.kappa * std::log((std::abs(climb) - g) / g + 1.0);
  if (std::abs(track_change) > g) r -= c.phi_w * std::log((std::abs(track_change) - g) / g + 1.0);
  return r;
}

double total_reward(const RewardComponents& r, const RewardConfig& c) {
  return c.w_h * r.height + c.w_o * r.obstacle + c.w_p * r.posture + c.w_r * r.rrt;
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::kNone: return "none";
    case Outcome::kGoal: return "goal";
    case Outcome::kCollision: return "collision";
    case Outcome::kGround: return "ground";
    case Outcome::kOutOfMap: return "out_of_map";
    case Outcome::kKeyPointFail: return "key_point_fail";
    case Outcome::kTimeout: return "timeout";
    case Outcome::kNoPath: return "no_path";
  }
  return "none";
}

Outcome outcome_from_string(const std::string& text) {
  for (Outcome o : {Outcome::kNone, Outcome::kGoal, Outcome::kCollision, Outcome::kGround, Outcome::kOutOfMap,
                    Outcome::kKeyPointFail, Outcome::kTimeout, Outcome::kNoPath})
    if (to_string(o) == text) return o;
  throw Error("unknown outcome: " + text);
}

bool EpisodeRecord::operator==(const EpisodeRecord& other) const {
  if (outcome != other.outcome || key_point_checks != other.key_point_checks || steps.size() != other.steps.size())
    return false;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const StepRecord& a = steps[i];
    const StepRecord& b = other.steps[i];
    if (a.time != b.time || a.position != b.position || a.agl != b.agl || a.speed != b.speed || a.climb != b.climb ||
        a.heading != b.heading || a.roll != b.roll || !(a.action == b.action) || a.reward != b.reward ||
        a.components.height != b.components.height || a.components.obstacle != b.components.obstacle ||
        a.components.posture != b.components.posture || a.components.rrt != b.components.rrt ||
        a.threat_distance != b.threat_distance)
      return false;
  }
  return true;
}

void validate(const Mission& m) {
  validate(m.limits);
  validate(m.reward);
  for (const auto& t : m.threats) validate(t);
  const auto& c = m.config;
  if (!(c.dt > 0.0)) throw ConfigError("dt must be > 0");
  if (!(c.goal_radius > 0.0)) throw ConfigError("goal_radius must be > 0");
  if (!(c.start_agl > 0.0 && c.goal_agl > 0.0)) throw ConfigError("start/goal altitudes must be > 0");
  if (c.max_steps < 0 || c.collision_samples < 1) throw ConfigError("invalid step limits");
  if (!(m.field.cruise_speed > 0.0 && m.field.height_safe > 0.0 && m.field.r_conf > 0.0))
    throw ConfigError("field config values must be positive");
  if (!(m.sensor.range > 0.0 && m.sensor.dropout >= 0.0 && m.sensor.dropout <= 1.0))
    throw ConfigError("sensor range must be > 0 and dropout in [0, 1]");
  for (const Region* r : {&m.start_region, &m.goal_region}) {
    if (!(r->radius >= 0.0)) throw ConfigError("region radius must be >= 0");
    const double reach = r->radius;
    if (!m.terrain.contains(r->x - reach, r->y - reach) || !m.terrain.contains(r->x + reach, r->y + reach))
      throw ConfigError("start/goal regions must lie inside the map");
  }
}

Environment::Environment(const Mission& mission) : mission_(&mission) {}

void Environment::reset(std::mt19937_64& rng) {
  const Vec3 s = sample_in_region(mission_->start_region, rng);
  const Vec3 g = sample_in_region(mission_->goal_region, rng);
  reset(s, g);
}

void Environment::reset(const Vec3& start, const Vec3& goal) {
  const TerrainGrid& terrain = mission_->terrain;
  const Vec3 s(start.x(), start.y(), terrain.height_at(start.x(), start.y()) + mission_->config.start_agl);
  const Vec3 g(goal.x(), goal.y(), terrain.height_at(goal.x(), goal.y()) + mission_->config.goal_agl);
  AircraftState a;
  a.position = s;
  a.speed = mission_->field.cruise_speed;
  a.heading = std::atan2(g.y() - s.y(), g.x() - s.x());
  reset(a, s, g);
}

void Environment::reset(const AircraftState& state, const Vec3& start, const Vec3& goal) {
  state_ = state;
  start_ = start;
  goal_ = goal;
  d_all_ = (goal - start).norm();
  time_ = 0.0;
  steps_ = 0;
  const double v = state.speed;
  max_steps_ = mission_->config.max_steps > 0
                   ? mission_->config.max_steps
                   : 3 * static_cast<int>(std::ceil(d_all_ / (v * mission_->config.dt)));
  max_steps_ = std::max(max_steps_, 1);
  schedule_ = KeyPointSchedule::for_distance(d_all_);
  record_ = EpisodeRecord{};

  StepRecord first;
  first.position = state.position;
  first.speed = state.speed;
  first.climb = state.climb;
  first.heading = state.heading;
  first.roll = state.roll;
  first.threat_distance = nearest_threat_distance(state.position, 0.0);
  const TerrainGrid& terrain = mission_->terrain;
  if (!terrain.contains(state.position.x(), state.position.y())) {
    record_.outcome = Outcome::kOutOfMap;
  } else {
    first.agl = terrain.agl(state.position);
    if (first.agl <= 0.0) record_.outcome = Outcome::kGround;
    for (const auto& t : mission_->threats)
      if (record_.outcome == Outcome::kNone && threat_value(t, 0.0, state.position) <= 1.0)
        record_.outcome = Outcome::kCollision;
  }
  record_.steps.push_back(first);
}

std::vector<Observation> Environment::observe_threats(std::mt19937_64& rng) const {
  return observe(mission_->threats, time_, state_.position, rng, mission_->sensor);
}

StateVector Environment::state_vector(std::span<const Observation> observations) const {
  return build_state(state_, start_, goal_, observations, mission_->terrain, mission_->reward, mission_->limits);
}

Proposal Environment::propose(const FieldAction& action, std::vector<Observation> observations) const {
  if (done()) throw UsageError("episode is already done");
  Proposal p;
  p.observations = std::move(observations);
  const Mission& m = *mission_;
  try {
    const double agl = m.terrain.agl(state_.position);
    p.velocity = flow_velocity(state_.position, goal_, action, m.threats, p.observations, agl, m.field, time_,
                               &p.telemetry);
  } catch (const InsideThreatError&) {
    p.failure = Outcome::kCollision;
  } catch (const CrashError&) {
    p.failure = Outcome::kGround;
  }
  if (p.failure == Outcome::kNone) {
    const Vec3 target = state_.position + p.velocity * m.config.dt;
    p.correction = kinematic_correct(state_.position, target, state_, m.limits, m.config.dt);
  }
  return p;
}

Proposal Environment::propose_waypoint(const Vec3& unrestricted, std::vector<Observation> observations) const {
  if (done()) throw UsageError("episode is already done");
  Proposal p;
  p.observations = std::move(observations);
  p.velocity = (unrestricted - state_.position) / mission_->config.dt;
  p.correction = kinematic_correct(state_.position, unrestricted, state_, mission_->limits, mission_->config.dt);
  return p;
}

void Environment::abort(Outcome outcome) {
  if (done()) throw UsageError("episode is already done");
  if (outcome == Outcome::kNone) throw UsageError("abort needs an outcome");
  record_.outcome = outcome;
}

StepResult Environment::commit(const Proposal& proposal, const FieldAction& action, std::mt19937_64& rng) {
  if (done()) throw UsageError("episode is already done");
  const Mission& m = *mission_;
  const double dt = m.config.dt;
  StepResult result;

  // With key points on, a crash or exit is scored like an unreachable key point.
  const bool penalize_failure = m.config.key_points && m.reward.failure_as_key_point;
  auto failure_estimate = [&](const Vec3& p) {
    return -std::ceil((goal_ - p).norm() / (state_.speed * dt));
  };
  if (proposal.failure != Outcome::kNone) {
    record_.outcome = proposal.failure;
    result.done = true;
    result.outcome = proposal.failure;
    if (penalize_failure) {
      result.components.rrt = failure_estimate(state_.position);
      result.reward = total_reward(result.components, m.reward);
    }
    return result;
  }

  const Vec3 a = state_.position;
  const AircraftState next = proposal.correction.state;
  const Vec3 b = next.position;
  const double heading_before = state_.heading;

  // First failing sample along the step, and whether the goal comes earlier.
  Outcome failure = Outcome::kNone;
  double fail_fraction = kInf;
  const int n = m.config.collision_samples;
  for (int j = 1; j <= n && failure == Outcome::kNone; ++j) {
    const double f = static_cast<double>(j) / n;
    const Vec3 p = a + f * (b - a);
    const double t = time_ + f * dt;
    if (!m.terrain.contains(p.x(), p.y())) {
      failure = Outcome::kOutOfMap;
    } else if (m.terrain.agl(p) <= 0.0) {
      failure = Outcome::kGround;
    } else {
      for (const auto& threat : m.threats) {
        if (threat_value(threat, t, p) <= 1.0) {
          failure = Outcome::kCollision;
          break;
        }
      }
    }
    if (failure != Outcome::kNone) fail_fraction = f;
  }
  const auto goal_fraction = segment_sphere_entry(a, b, goal_, m.config.goal_radius);

  state_ = next;
  time_ += dt;
  ++steps_;

  Outcome outcome = Outcome::kNone;
  if (goal_fraction && *goal_fraction <= fail_fraction) {
    outcome = Outcome::kGoal;
  } else if (failure != Outcome::kNone) {
    outcome = failure;
  }

  RewardComponents r;
  const bool in_map = m.terrain.contains(b.x(), b.y());
  const double agl = in_map ? m.terrain.agl(b) : 0.0;
  if (outcome == Outcome::kNone || outcome == Outcome::kGoal) {
    if (agl > 0.0) r.height = reward_height(agl, (goal_ - b).norm(), d_all_, m.reward);
  }

  // Obstacle shaping over the threats the agent saw this step.
  double nearest_seen = kInf;
  double shaped_sum = 0.0;
  double shaped_nearest = 0.0;
  for (const auto& o : proposal.observations) {
    if (!o.visible()) continue;
    const Threat& threat = m.threats[o.threat_index];
    double d = 0.0;
    if (threat_value(threat, time_, b) > 1.0) d = nearest_surface_distance(threat, time_, b);
    const double term = shaped_obstacle_reward(d, threat.r_obs, threat.r_threaten, m.reward);
    shaped_sum += term;
    if (d < nearest_seen) {
      nearest_seen = d;
      shaped_nearest = term;
    }
  }
  r.obstacle = m.reward.sum_over_threats ? shaped_sum : shaped_nearest;
  r.posture = reward_posture(next.climb, wrap_angle(next.heading - heading_before), m.reward);

  if (outcome == Outcome::kNone && m.config.key_points) {
    const PlanningScene scene{&m.terrain, m.threats, time_};
    result.key_point = key_point_check(state_, goal_, schedule_, scene, m.planner, m.limits, dt, rng);
    if (result.key_point) {
      ++record_.key_point_checks;
      if (!result.key_point->reachable) {
        outcome = Outcome::kKeyPointFail;
        r.rrt = -static_cast<double>(result.key_point->fail_estimate);
      }
    }
  }
  if (penalize_failure && (outcome == Outcome::kCollision || outcome == Outcome::kGround ||
                           outcome == Outcome::kOutOfMap))
    r.rrt = failure_estimate(a);
  if (outcome == Outcome::kNone && steps_ >= max_steps_) outcome = Outcome::kTimeout;

  result.components = r;
  result.reward = total_reward(r, m.reward);
  result.outcome = outcome;
  result.done = outcome != Outcome::kNone;

  StepRecord row;
  row.time = time_;
  row.position = b;
  row.agl = in_map ? agl : std::numeric_limits<double>::quiet_NaN();
  row.speed = next.speed;
  row.climb = next.climb;
  row.heading = next.heading;
  row.roll = next.roll;
  row.action = action;
  row.reward = result.reward;
  row.components = r;
  row.threat_distance = nearest_threat_distance(b, time_);
  record_.steps.push_back(row);
  record_.outcome = outcome;
  return result;
}

StepResult Environment::step(const FieldAction& action, std::mt19937_64& rng) {
  return commit(propose(action, observe_threats(rng)), action, rng);
}

double Environment::nearest_threat_distance(const Vec3& p, double t) const {
  double best = kInf;
  for (const auto& threat : mission_->threats) {
    const double d = threat_value(threat, t, p) > 1.0 ? nearest_surface_distance(threat, t, p) : 0.0;
    best = std::min(best, d);
  }
  return best;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(q / 100.0 * static_cast<double>(values.size()));
  const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(values.size()))) - 1;
  return values[idx];
}

MetricReport compute_metrics(const EpisodeRecord& record, const KinematicLimits& limits) {
  MetricReport m;
  m.outcome = record.outcome;
  m.steps = static_cast<int>(record.steps.size()) - 1;
  m.min_threat_distance_m = kInf;

  std::vector<Vec3> dirs;
  for (std::size_t i = 0; i < record.steps.size(); ++i) {
    const StepRecord& s = record.steps[i];
    m.max_climb_deg = std::max(m.max_climb_deg, rad2deg(std::abs(s.climb)));
    m.min_threat_distance_m = std::min(m.min_threat_distance_m, s.threat_distance);
    if (std::abs(s.climb) > limits.gamma_max + 1e-9) m.kinematics_ok = false;
    if (i == 0) continue;
    const StepRecord& prev = record.steps[i - 1];
    const Vec3 seg = s.position - prev.position;
    const double len = seg.norm();
    m.path_length_m += len;
    const double radius = realized_turn_radius(prev.position, s.position, s.heading - prev.heading);
    if (radius < limits.min_turn_radius(prev.speed) - 1e-6) m.kinematics_ok = false;
    if (len == 0.0) {
      ++m.skipped_points;
      continue;
    }
    dirs.push_back(seg / len);
  }
  if (m.skipped_points > 0)
    std::cerr << "warning: " << m.skipped_points << " repeated trajectory points skipped in metrics\n";

  double sum = 0.0;
  for (std::size_t i = 1; i < dirs.size(); ++i) {
    const double c = std::clamp(dirs[i - 1].dot(dirs[i]), -1.0, 1.0);
    const double angle = std::atan2(dirs[i - 1].cross(dirs[i]).norm(), c);
    sum += angle * angle;
  }
  const std::size_t interior = dirs.size() > 1 ? dirs.size() - 1 : 0;
  m.smoothness = interior > 0 ? sum / static_cast<double>(interior) : 0.0;

  if (!record.latency_ms.empty()) {
    m.latency_p50_ms = percentile(record.latency_ms, 50.0);
    m.latency_p99_ms = percentile(record.latency_ms, 99.0);
  }
  return m;
}

void write_trajectory_csv(const EpisodeRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open trajectory file for writing: " + path.string());
  out << "time,x,y,z,agl,speed,climb,heading,roll,beta,rho,sigma,theta,reward,r_h,r_obs,r_p,r_rrt,"
         "threat_distance,outcome\n";
  for (std::size_t i = 0; i < record.steps.size(); ++i) {
    const StepRecord& s = record.steps[i];
    const double fields[] = {s.time,        s.position.x(),        s.position.y(),        s.position.z(),
                             s.agl,         s.speed,               s.climb,               s.heading,
                             s.roll,        s.action.beta,         s.action.rho,          s.action.sigma,
                             s.action.theta, s.reward,             s.components.height,   s.components.obstacle,
                             s.components.posture, s.components.rrt, s.threat_distance};
    for (double f : fields) out << format_double(f) << ',';
    out << (i + 1 == record.steps.size() ? to_string(record.outcome) : "") << '\n';
  }
  if (!out) throw Error("failed writing trajectory file: " + path.string());
}

void write_metrics_json(const MetricReport& r, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["path_length_m"] = r.path_length_m;
  j["max_climb_deg"] = r.max_climb_deg;
  j["smoothness"] = r.smoothness;
  j["min_threat_distance_m"] = std::isfinite(r.min_threat_distance_m) ? nlohmann::ordered_json(r.min_threat_distance_m)
                                                                      : nlohmann::ordered_json(nullptr);
  j["latency_p50_ms"] = r.latency_p50_ms ? nlohmann::ordered_json(*r.latency_p50_ms) : nlohmann::ordered_json(nullptr);
  j["latency_p99_ms"] = r.latency_p99_ms ? nlohmann::ordered_json(*r.latency_p99_ms) : nlohmann::ordered_json(nullptr);
  j["outcome"] = to_string(r.outcome);
  j["steps"] = r.steps;
  j["kinematics_ok"] = r.kinematics_ok;
  std::ofstream out(path);
  if (!out) throw Error("cannot open metrics file for writing: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace tfta
