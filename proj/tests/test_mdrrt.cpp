#include <gtest/gtest.h>

#include <random>

#include "tfta/mdrrt.hpp"

using namespace tfta;

namespace {

TerrainGrid flat(double size = 20000.0, double height = 0.0) {
  const int n = static_cast<int>(size / 500.0) + 1;
  return TerrainGrid(0.0, 0.0, 500.0, TerrainGrid::HeightMatrix::Constant(n, n, height));
}

AircraftState at(const Vec3& p, double heading = 0.0) {
  AircraftState s;
  s.position = p;
  s.heading = heading;
  return s;
}

// Every stored cost equals the parent's cost plus the recomputed edge cost,
// and every edge is collision free.
void expect_tree_consistent(const MdRrtPlanner& planner, const PlanningScene& scene, const PlannerConfig& cfg) {
  const auto& tree = planner.tree();
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const TreeNode& n = tree[i];
    if (!n.parent) {
      EXPECT_EQ(i, 0u);
      EXPECT_EQ(n.cost_to_come, 0.0);
      continue;
    }
    const TreeNode& p = tree[*n.parent];
    EXPECT_NEAR(n.cost_to_come, p.cost_to_come + edge_cost(p.position, n.position, *scene.terrain, cfg),
                1e-6 * std::max(1.0, n.cost_to_come));
    EXPECT_TRUE(collision_free(p.position, n.position, scene, cfg.edge_samples));
    EXPECT_NE(std::find(p.children.begin(), p.children.end(), i), p.children.end());
  }
}

}  // namespace

TEST(MdRrt, DegenerateSpheroidSamplesOnSegment) {
  std::mt19937_64 rng(1);
  const Vec3 a(0, 0, 0), b(1000, 500, 100);
  for (int k = 0; k < 100; ++k) {
    const Vec3 s = sample_in_ellipse(a, b, (b - a).norm(), rng);
    EXPECT_NEAR((s - a).norm() + (s - b).norm(), (b - a).norm(), 1e-6);
  }
}

TEST(MdRrt, SamplesStayInsideSpheroid) {
  std::mt19937_64 rng(2);
  const Vec3 a(100, 200, 300), b(5000, -2000, 800);
  const double c = 1.3 * (b - a).norm();
  for (int k = 0; k < 10000; ++k) {
    const Vec3 s = sample_in_ellipse(a, b, c, rng);
    EXPECT_LE((s - a).norm() + (s - b).norm(), c * (1 + 1e-12));
  }
}

TEST(MdRrt, SpheroidVolumeScaling) {
  // Spheroid volume is (4/3) pi a b^2; sample second moments scale the same way.
  std::mt19937_64 rng(3);
  const Vec3 a(0, 0, 0), b(1000, 0, 0);
  auto transverse_spread = [&](double c) {
    double s2 = 0.0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) {
      const Vec3 s = sample_in_ellipse(a, b, c, rng);
      s2 += s.y() * s.y() + s.z() * s.z();
    }
    return s2 / n;
  };
  const double c1 = 2000.0, c2 = 1500.0;
  auto minor2 = [&](double c) { return 0.25 * (c * c - 1000.0 * 1000.0); };
  const double ratio = transverse_spread(c1) / transverse_spread(c2);
  EXPECT_NEAR(ratio, minor2(c1) / minor2(c2), 0.05 * minor2(c1) / minor2(c2));
}

TEST(MdRrt, SteerStraightAhead) {
  KinematicLimits lim;
  TreeNode n;
  n.position = Vec3(0, 0, 500);
  const TreeNode out = steer(n, Vec3(5000, 0, 500), 1000.0, 200.0, lim);
  EXPECT_NEAR(out.position.x(), 1000.0, 1e-9);
  EXPECT_NEAR(out.position.y(), 0.0, 1e-9);
  EXPECT_NEAR(out.position.z(), 500.0, 1e-9);
}

TEST(MdRrt, SteerBehindTurnsAtMinimumRadius) {
  KinematicLimits lim;
  TreeNode n;
  n.position = Vec3(0, 0, 500);
  const TreeNode out = steer(n, Vec3(-5000, 10, 500), 1000.0, 200.0, lim);
  const double r = realized_turn_radius(n.position, out.position, out.heading - n.heading);
  EXPECT_NEAR(r, lim.min_turn_radius(200.0), 1e-6);
}

TEST(MdRrt, RepeatedSteeringConverges) {
  KinematicLimits lim;
  TreeNode n;
  n.position = Vec3(0, 0, 500);
  n.heading = 2.5;
  const Vec3 target(20000, 3000, 700);
  double prev = (target - n.position).norm();
  bool aligned = false;
  for (int k = 0; k < 100 && prev > 1000.0; ++k) {
    n = steer(n, target, 500.0, 200.0, lim);
    const double d = (target - n.position).norm();
    const double bearing = std::atan2(target.y() - n.position.y(), target.x() - n.position.x());
    if (std::abs(wrap_angle(bearing - n.heading)) < 0.05) aligned = true;
    if (aligned) EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_TRUE(aligned);
  EXPECT_LE(prev, 1000.0);
}

TEST(MdRrt, EdgeCost) {
  const TerrainGrid g = flat();
  PlannerConfig cfg;
  const Vec3 a(1000, 1000, cfg.h_ref()), b(4000, 5000, cfg.h_ref());
  EXPECT_NEAR(edge_cost(a, b, g, cfg), 5000.0, 1e-9);
  cfg.w_tf = 0.0;
  const Vec3 hi(4000, 5000, 2000.0);
  EXPECT_NEAR(edge_cost(a, hi, g, cfg), (hi - a).norm(), 1e-9);
  cfg.w_tf = 1.0;
  const double tf1 = edge_cost(a, hi, g, cfg) - (hi - a).norm();
  cfg.w_tf = 2.0;
  const double tf2 = edge_cost(a, hi, g, cfg) - (hi - a).norm();
  EXPECT_NEAR(tf2, 2.0 * tf1, 1e-9);
  // Mean |agl - h_ref| of the ten samples along a linear climb.
  double expect = 0.0;
  for (int k = 1; k <= 10; ++k) expect += std::abs(cfg.h_ref() + (2000.0 - cfg.h_ref()) * k / 10.0 - cfg.h_ref());
  EXPECT_NEAR(tf1, expect / 10.0, 1e-9);
}

TEST(MdRrt, CollisionChecks) {
  const TerrainGrid g = flat(10000.0, 100.0);
  Threat t;
  t.center0 = Vec3(5000, 5000, 500);
  t.semi_axes = Vec3::Constant(500);
  const std::vector<Threat> threats{t};
  const PlanningScene scene{&g, threats, 0.0};
  EXPECT_TRUE(collision_free(Vec3(1000, 1000, 500), Vec3(2000, 1000, 500), scene));
  EXPECT_FALSE(collision_free(Vec3(4000, 5000, 500), Vec3(6000, 5000, 500), scene));
  EXPECT_FALSE(collision_free(Vec3(1000, 1000, 500), Vec3(2000, 1000, 50), scene));
  EXPECT_FALSE(collision_free(Vec3(9000, 1000, 500), Vec3(11000, 1000, 500), scene));
}

TEST(MdRrt, EmptyMapNearStraightLine) {
  const TerrainGrid g = flat();
  const PlanningScene scene{&g, {}, 0.0};
  PlannerConfig cfg;
  cfg.iter_max = 2000;
  cfg.time_budget_s = 0.0;
  cfg.w_tf = 0.0;
  KinematicLimits lim;
  MdRrtPlanner planner(scene, cfg, lim);
  std::mt19937_64 rng(4);
  const Vec3 goal(18000, 10000, 500);
  const AircraftState start = at(Vec3(2000, 10000, 500));
  const PlanResult r = planner.plan(start, goal, rng);
  ASSERT_TRUE(r.reachable);
  const double straight = (goal - start.position).norm();
  EXPECT_LE(r.cost, 1.05 * straight);
  ASSERT_TRUE(r.path);
  EXPECT_EQ(r.path->front().position, start.position);
  EXPECT_LE((r.path->back().position - goal).norm(), cfg.goal_radius);
  expect_tree_consistent(planner, scene, cfg);
}

TEST(MdRrt, BestCostNonIncreasingAndTreeConsistent) {
  const TerrainGrid g = generate_terrain(5, 41, 41, 250.0, 600.0);
  Threat t;
  t.center0 = Vec3(5000, 5000, 0);
  t.semi_axes = Vec3(800, 800, 3000);
  const std::vector<Threat> threats{t};
  const PlanningScene scene{&g, threats, 0.0};
  PlannerConfig cfg;
  cfg.iter_max = 1500;
  cfg.time_budget_s = 0.0;
  KinematicLimits lim;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    MdRrtPlanner planner(scene, cfg, lim);
    std::mt19937_64 rng(seed);
    const Vec3 start_p(1000, 5000, g.height_at(1000, 5000) + 500);
    const Vec3 goal(9000, 5200, g.height_at(9000, 5200) + 500);
    planner.plan(at(start_p), goal, rng);
    const auto& h = planner.best_cost_history();
    for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1]);
    EXPECT_EQ(planner.informed_violations(), 0);
    expect_tree_consistent(planner, scene, cfg);
  }
}

TEST(MdRrt, EnclosedGoalIsUnreachable) {
  const TerrainGrid g = flat();
  Threat shell;
  shell.center0 = Vec3(15000, 10000, 500);
  shell.semi_axes = Vec3(3000, 3000, 6000);
  const std::vector<Threat> threats{shell};
  const PlanningScene scene{&g, threats, 0.0};
  PlannerConfig cfg;
  cfg.iter_max = 500;
  cfg.time_budget_s = 0.0;
  MdRrtPlanner planner(scene, cfg, KinematicLimits{});
  std::mt19937_64 rng(5);
  const PlanResult r = planner.plan(at(Vec3(2000, 10000, 500)), Vec3(15000, 10000, 500), rng);
  EXPECT_FALSE(r.reachable);
  EXPECT_FALSE(r.path);
}

TEST(MdRrt, SameSeedSameTree) {
  const TerrainGrid g = generate_terrain(2, 41, 41, 500.0, 800.0);
  const PlanningScene scene{&g, {}, 0.0};
  PlannerConfig cfg;
  cfg.iter_max = 400;
  cfg.time_budget_s = 0.0;
  const AircraftState s = at(Vec3(1000, 1000, g.height_at(1000, 1000) + 500), 0.5);
  const Vec3 goal(15000, 12000, g.height_at(15000, 12000) + 500);
  MdRrtPlanner a(scene, cfg, KinematicLimits{}), b(scene, cfg, KinematicLimits{});
  std::mt19937_64 ra(6), rb(6);
  const PlanResult pa = a.plan(s, goal, ra);
  const PlanResult pb = b.plan(s, goal, rb);
  ASSERT_EQ(a.tree().size(), b.tree().size());
  for (std::size_t i = 0; i < a.tree().size(); ++i) {
    EXPECT_EQ(a.tree()[i].position, b.tree()[i].position);
    EXPECT_EQ(a.tree()[i].parent, b.tree()[i].parent);
  }
  EXPECT_EQ(pa.reachable, pb.reachable);
  EXPECT_EQ(pa.cost, pb.cost);
}

TEST(MdRrt, KeyPointSchedule) {
  KeyPointSchedule s = KeyPointSchedule::for_distance(100000.0);
  ASSERT_EQ(s.thresholds().size(), 14u);
  EXPECT_DOUBLE_EQ(s.thresholds().front(), 95000.0);
  EXPECT_DOUBLE_EQ(s.thresholds().back(), 10000.0);
  EXPECT_FALSE(s.trigger(99000.0));
  EXPECT_TRUE(s.trigger(94000.0));
  EXPECT_FALSE(s.trigger(92000.0));  // between thresholds
  EXPECT_TRUE(s.trigger(40000.0));   // skipping several consumes all of them
  EXPECT_EQ(s.consumed_count(), 10u);  // 95 .. 55 and 50 km
  EXPECT_FALSE(s.trigger(40000.0));
}

TEST(MdRrt, KeyPointCheckOutcomes) {
  const TerrainGrid g = flat(60000.0);
  PlannerConfig cfg;
  cfg.iter_max = 300;
  cfg.time_budget_s = 0.0;
  KinematicLimits lim;
  std::mt19937_64 rng(7);

  // Between thresholds nothing happens.
  KeyPointSchedule sched({30000.0, 10000.0});
  const PlanningScene empty{&g, {}, 0.0};
  EXPECT_FALSE(key_point_check(at(Vec3(5000, 5000, 500)), Vec3(5000 + 35000, 5000, 500), sched, empty, cfg, lim,
                               1.0, rng));

  // A reachable state passes with no penalty.
  const auto ok = key_point_check(at(Vec3(5000, 5000, 500)), Vec3(5000 + 25000, 5000, 500), sched, empty, cfg, lim,
                                  1.0, rng);
  ASSERT_TRUE(ok);
  EXPECT_TRUE(ok->reachable);
  EXPECT_EQ(ok->fail_estimate, 0);

  // Goal sealed inside a threat: 20 km remaining at 200 m/s is 100 failed steps.
  Threat shell;
  shell.center0 = Vec3(25000, 5000, 500);
  shell.semi_axes = Vec3(3000, 3000, 6000);
  const std::vector<Threat> threats{shell};
  const PlanningScene sealed{&g, threats, 0.0};
  KeyPointSchedule sched2({25000.0});
  const auto bad =
      key_point_check(at(Vec3(5000, 5000, 500)), Vec3(25000, 5000, 500), sched2, sealed, cfg, lim, 1.0, rng);
  ASSERT_TRUE(bad);
  EXPECT_FALSE(bad->reachable);
  EXPECT_EQ(bad->fail_estimate, 100);
}
