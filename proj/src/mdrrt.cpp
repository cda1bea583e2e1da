#include "tfta/mdrrt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace tfta {

namespace {

Vec3 unit_ball_sample(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec3 g(gauss(rng), gauss(rng), gauss(rng));
  while (g.squaredNorm() == 0.0) g = Vec3(gauss(rng), gauss(rng), gauss(rng));
  return g.normalized() * std::cbrt(unit(rng));
}

bool inside_spheroid(const Vec3& s, const Vec3& start, const Vec3& goal, double c_best) {
  return (s - start).norm() + (s - goal).norm() <= c_best * (1.0 + 1e-12);
}

}  // namespace

Vec3 sample_in_ellipse(const Vec3& start, const Vec3& goal, double c_best, std::mt19937_64& rng,
                       const SamplingRegion* region) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (!std::isfinite(c_best)) {
    if (region == nullptr || region->terrain == nullptr)
      throw UsageError("unbounded sampling needs a terrain region");
    const TerrainGrid& t = *region->terrain;
    const double x = t.origin_x() + unit(rng) * (t.max_x() - t.origin_x());
    const double y = t.origin_y() + unit(rng) * (t.max_y() - t.origin_y());
    const double ground = t.height_at(x, y);
    const double z = ground + region->h_down + unit(rng) * (region->h_up - region->h_down);
    return {x, y, z};
  }

  const double c_min = (goal - start).norm();
  const Vec3 center = 0.5 * (start + goal);
  const double major = 0.5 * std::max(c_best, c_min);
  const double minor = 0.5 * std::sqrt(std::max(0.0, c_best * c_best - c_min * c_min));
  Mat3 rotation = Mat3::Identity();
  if (c_min > 0.0)
    rotation = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitX(), (goal - start) / c_min).toRotationMatrix();
  const Vec3 radii(major, minor, minor);

  auto draw = [&] { return Vec3(center + rotation * radii.cwiseProduct(unit_ball_sample(rng))); };
  if (region == nullptr || region->terrain == nullptr) return draw();

  constexpr int kTries = 64;
  Vec3 sample = draw();
  for (int i = 0; i < kTries; ++i) {
    if (region->terrain->contains(sample.x(), sample.y())) {
      const double ground = region->terrain->height_at(sample.x(), sample.y());
      Vec3 clamped = sample;
      clamped.z() = std::clamp(sample.z(), ground + region->h_down, ground + region->h_up);
      if (inside_spheroid(clamped, start, goal, c_best)) return clamped;
    }
    if (i + 1 < kTries) sample = draw();
  }
  return sample;
}

TreeNode steer(const TreeNode& from, const Vec3& target, double step, double speed, const KinematicLimits& limits) {
  const Vec3 d = target - from.position;
  const double distance = d.norm();
  const double length = std::min(step, distance);
  TreeNode out;
  out.parent = std::nullopt;
  if (length <= 0.0) {
    out = from;
    out.children.clear();
    return out;
  }
  AircraftState state;
  state.position = from.position;
  state.speed = speed;
  state.climb = from.climb;
  state.heading = from.heading;
  const CorrectionResult r =
      kinematic_correct(from.position, from.position + d * (length / distance), state, limits, length / speed);
  out.position = r.position;
  out.heading = r.state.heading;
  out.climb = r.state.climb;
  return out;
}

bool collision_free(const Vec3& a, const Vec3& b, const PlanningScene& scene, int samples) {
  for (int k = 1; k <= samples; ++k) {
    const Vec3 p = a + (b - a) * (static_cast<double>(k) / samples);
    if (!scene.terrain->contains(p.x(), p.y())) return false;
    if (!(scene.terrain->agl(p) > 0.0)) return false;
    for (const Threat& threat : scene.threats)
      if (!(threat_value(threat, scene.time, p) > 1.0)) return false;
  }
  return true;
}

double edge_cost(const Vec3& a, const Vec3& b, const TerrainGrid& terrain, const PlannerConfig& config) {
  double tf = 0.0;
  if (config.w_tf != 0.0) {
    const int n = config.edge_samples;
    for (int k = 1; k <= n; ++k) {
      const Vec3 p = a + (b - a) * (static_cast<double>(k) / n);
      tf += std::abs(terrain.agl(p) - config.h_ref());
    }
    tf /= n;
  }
  return config.w_len * (b - a).norm() + config.w_tf * tf;
}

MdRrtPlanner::MdRrtPlanner(PlanningScene scene, PlannerConfig config, KinematicLimits limits)
    : scene_(scene), config_(config), limits_(limits) {
  if (scene_.terrain == nullptr) throw UsageError("planning scene needs terrain");
  if (!(config_.step > 0.0)) throw ConfigError("planner step must be > 0");
}

AircraftState MdRrtPlanner::node_state(const TreeNode& node) const {
  AircraftState s;
  s.position = node.position;
  s.speed = speed_;
  s.climb = node.climb;
  s.heading = node.heading;
  return s;
}

double MdRrtPlanner::near_radius() const {
  const double n = static_cast<double>(tree_.size());
  const double gamma = config_.gamma_rrt > 0.0 ? config_.gamma_rrt : 10.0 * config_.step;
  if (n < 2.0) return 3.0 * config_.step;
  return std::min(gamma * std::cbrt(std::log(n) / n), 3.0 * config_.step);
}

double MdRrtPlanner::solution_cost(std::size_t node, const Vec3& goal) const {
  return tree_[node].cost_to_come + config_.w_len * (goal - tree_[node].position).norm();
}

void MdRrtPlanner::shift_subtree_cost(std::size_t node, double delta) {
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    tree_[i].cost_to_come += delta;
    for (std::size_t c : tree_[i].children) stack.push_back(c);
  }
}

// Re-parents `target` under `via`. The target keeps its position but its
// heading/climb change, so every descendant edge is re-derived; the rewire is
// rejected unless the whole subtree stays within the kinematic limits.
bool MdRrtPlanner::try_rewire(std::size_t via, std::size_t target) {
  const auto edge = connect_arc(node_state(tree_[via]), tree_[target].position, limits_);
  if (!edge) return false;

  struct Pose {
    std::size_t node;
    double heading;
    double climb;
  };
  std::vector<Pose> updates;
  const AircraftState target_state = propagate_arc(node_state(tree_[via]), edge->curvature, edge->climb_end,
                                                   edge->duration, limits_);
  updates.push_back({target, target_state.heading, edge->climb_end});
  for (std::size_t i = 0; i < updates.size(); ++i) {
    AircraftState parent = node_state(tree_[updates[i].node]);
    parent.heading = updates[i].heading;
    parent.climb = updates[i].climb;
    for (std::size_t c : tree_[updates[i].node].children) {
      const auto child_edge = connect_arc(parent, tree_[c].position, limits_);
      if (!child_edge) return false;
      const AircraftState cs =
          propagate_arc(parent, child_edge->curvature, child_edge->climb_end, child_edge->duration, limits_);
      updates.push_back({c, cs.heading, child_edge->climb_end});
    }
  }

  const double new_cost =
      tree_[via].cost_to_come + edge_cost(tree_[via].position, tree_[target].position, *scene_.terrain, config_);
  const double delta = new_cost - tree_[target].cost_to_come;
  for (const Pose& p : updates) {
    tree_[p.node].heading = p.heading;
    tree_[p.node].climb = p.climb;
  }
  auto& old_children = tree_[*tree_[target].parent].children;
  old_children.erase(std::remove(old_children.begin(), old_children.end(), target), old_children.end());
  tree_[target].parent = via;
  tree_[via].children.push_back(target);
  shift_subtree_cost(target, delta);
  return true;
}

PlanResult MdRrtPlanner::plan(const AircraftState& start, const Vec3& goal, std::mt19937_64& rng) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  tree_.clear();
  best_cost_history_.clear();
  informed_violations_ = 0;
  speed_ = start.speed;

  PlanResult result;
  TreeNode root;
  root.position = start.position;
  root.heading = start.heading;
  root.climb = start.climb;
  tree_.push_back(root);

  const double c_min = (goal - start.position).norm();
  if (c_min <= config_.goal_radius) {
    result.reachable = true;
    result.path = std::vector<TreeNode>{root};
    result.cost = 0.0;
    return result;
  }

  const SamplingRegion region{scene_.terrain, config_.h_down, config_.h_up};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> solutions;
  double c_best = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best_node;

  int iter = 0;
  for (; iter < config_.iter_max; ++iter) {
    if (config_.time_budget_s > 0.0 &&
        std::chrono::duration<double>(Clock::now() - t0).count() > config_.time_budget_s)
      break;

    // Informed sampling: the spheroid major axis bounds the path length of any
    // improving solution because cost >= w_len * length.
    const double axis = (std::isfinite(c_best) && config_.w_len > 0.0) ? std::max(c_min, c_best / config_.w_len)
                                                                       : std::numeric_limits<double>::infinity();
    Vec3 sample;
    if (unit(rng) < config_.goal_bias) {
      sample = goal;
    } else {
      sample = sample_in_ellipse(start.position, goal, axis, rng, &region);
      if (std::isfinite(axis) && !inside_spheroid(sample, start.position, goal, axis)) ++informed_violations_;
    }

    std::size_t nearest = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tree_.size(); ++i) {
      const double d2 = (tree_[i].position - sample).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        nearest = i;
      }
    }

    TreeNode fresh = steer(tree_[nearest], sample, config_.step, speed_, limits_);
    if ((fresh.position - tree_[nearest].position).squaredNorm() < 1e-6 ||
        !collision_free(tree_[nearest].position, fresh.position, scene_, config_.edge_samples)) {
      best_cost_history_.push_back(c_best);
      continue;
    }

    // ChooseParent among the near set; the steering parent is the baseline.
    const double radius = near_radius();
    std::vector<std::size_t> near;
    for (std::size_t i = 0; i < tree_.size(); ++i)
      if ((tree_[i].position - fresh.position).squaredNorm() <= radius * radius) near.push_back(i);

    std::size_t parent = nearest;
    double parent_cost =
        tree_[nearest].cost_to_come + edge_cost(tree_[nearest].position, fresh.position, *scene_.terrain, config_);
    for (std::size_t i : near) {
      if (i == nearest) continue;
      const double c = tree_[i].cost_to_come + edge_cost(tree_[i].position, fresh.position, *scene_.terrain, config_);
      if (c >= parent_cost) continue;
      const auto edge = connect_arc(node_state(tree_[i]), fresh.position, limits_);
      if (!edge || !collision_free(tree_[i].position, fresh.position, scene_, config_.edge_samples)) continue;
      const AircraftState s = propagate_arc(node_state(tree_[i]), edge->curvature, edge->climb_end, edge->duration,
                                            limits_);
      parent = i;
      parent_cost = c;
      fresh.heading = s.heading;
      fresh.climb = edge->climb_end;
    }

    fresh.parent = parent;
    fresh.cost_to_come = parent_cost;
    const std::size_t id = tree_.size();
    tree_.push_back(fresh);
    tree_[parent].children.push_back(id);

    // Rewire through the new node.
    for (std::size_t i : near) {
      if (i == parent || !tree_[i].parent) continue;
      const double c = tree_[id].cost_to_come + edge_cost(tree_[id].position, tree_[i].position, *scene_.terrain,
                                                          config_);
      if (c >= tree_[i].cost_to_come) continue;
      if (!collision_free(tree_[id].position, tree_[i].position, scene_, config_.edge_samples)) continue;
      try_rewire(id, i);
    }

    if ((fresh.position - goal).norm() <= config_.goal_radius) {
      solutions.push_back(id);
    } else if (config_.goal_connect_range > 0.0 &&
               (goal - tree_[id].position).norm() <= config_.goal_connect_range) {
      // Direct arc to the goal point; goal-biased steering alone rarely lines
      // up with the heading a turn-limited node arrives with.
      const auto edge = connect_arc(node_state(tree_[id]), goal, limits_);
      const int samples = std::max(config_.edge_samples, static_cast<int>(std::ceil(
          config_.edge_samples * (goal - tree_[id].position).norm() / config_.step)));
      if (edge && collision_free(tree_[id].position, goal, scene_, samples)) {
        const AircraftState s =
            propagate_arc(node_state(tree_[id]), edge->curvature, edge->climb_end, edge->duration, limits_);
        TreeNode g;
        g.position = goal;
        g.heading = s.heading;
        g.climb = edge->climb_end;
        g.parent = id;
        g.cost_to_come = tree_[id].cost_to_come + edge_cost(tree_[id].position, goal, *scene_.terrain, config_);
        const std::size_t gid = tree_.size();
        tree_.push_back(g);
        tree_[id].children.push_back(gid);
        solutions.push_back(gid);
      }
    }
    for (std::size_t s : solutions) {
      const double c = solution_cost(s, goal);
      if (c < c_best) {
        c_best = c;
        best_node = s;
      }
    }
    best_cost_history_.push_back(c_best);
    if (config_.stop_at_first_solution && best_node) {
      ++iter;
      break;
    }
  }

  result.iterations = iter;
  if (best_node) {
    result.reachable = true;
    result.cost = c_best;
    std::vector<TreeNode> path;
    for (std::optional<std::size_t> n = *best_node; n; n = tree_[*n].parent) path.push_back(tree_[*n]);
    std::reverse(path.begin(), path.end());
    result.path = std::move(path);
  }
  return result;
}

KeyPointSchedule::KeyPointSchedule(std::vector<double> thresholds) : thresholds_(std::move(thresholds)) {
  std::sort(thresholds_.begin(), thresholds_.end(), std::greater<>());
  consumed_.assign(thresholds_.size(), false);
}

KeyPointSchedule KeyPointSchedule::for_distance(double total_distance) {
  std::vector<double> t;
  for (int k = 19; k >= 11; --k) t.push_back(total_distance * k * 0.05);  // 0.95 .. 0.55
  for (int k = 5; k >= 1; --k) t.push_back(total_distance * k * 0.1);     // 0.5 .. 0.1
  return KeyPointSchedule(std::move(t));
}

bool KeyPointSchedule::trigger(double remaining) {
  bool fired = false;
  for (std::size_t i = 0; i < thresholds_.size(); ++i) {
    if (!consumed_[i] && remaining < thresholds_[i]) {
      consumed_[i] = true;
      fired = true;
    }
  }
  return fired;
}

std::size_t KeyPointSchedule::consumed_count() const {
  return static_cast<std::size_t>(std::count(consumed_.begin(), consumed_.end(), true));
}

std::optional<PlanResult> key_point_check(const AircraftState& state, const Vec3& goal, KeyPointSchedule& schedule,
                                          const PlanningScene& scene, const PlannerConfig& config,
                                          const KinematicLimits& limits, double dt, std::mt19937_64& rng) {
  const double remaining = (goal - state.position).norm();
  if (!schedule.trigger(remaining)) return std::nullopt;
  MdRrtPlanner planner(scene, config, limits);
  PlanResult r = planner.plan(state, goal, rng);
  if (!r.reachable) r.fail_estimate = static_cast<long>(std::ceil(remaining / (state.speed * dt)));
  return r;
}

}  // namespace tfta
