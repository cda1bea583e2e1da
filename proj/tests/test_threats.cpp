#include <gtest/gtest.h>

#include <random>

#include "tfta/threats.hpp"

using namespace tfta;

namespace {

Threat sphere(double radius, const Vec3& center = Vec3::Zero()) {
  Threat t;
  t.center0 = center;
  t.semi_axes = Vec3::Constant(radius);
  return t;
}

// Eq 1 written out with std::pow, independent of the templated helper.
double value_oracle(const Threat& t, const Vec3& c, const Vec3& p) {
  double f = 0.0;
  for (int i = 0; i < 3; ++i) f += std::pow((p[i] - c[i]) / t.semi_axes[i], 2 * t.exponents[i]);
  return f;
}

// Bisection on the center->p ray for F = 1; slow but obviously correct.
double radial_distance_oracle(const Threat& t, const Vec3& c, const Vec3& p) {
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (value_oracle(t, c, c + mid * (p - c)) < 1.0 ? lo : hi) = mid;
  }
  return (1.0 - 0.5 * (lo + hi)) * (p - c).norm();
}

Threat random_threat(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> axis(0.5, 5.0);
  std::uniform_int_distribution<int> expo(1, 3);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  Threat t;
  t.center0 = Vec3(coord(rng), coord(rng), coord(rng));
  t.semi_axes = Vec3(axis(rng), axis(rng), axis(rng));
  t.exponents = {expo(rng), expo(rng), expo(rng)};
  return t;
}

}  // namespace

TEST(Threats, ValueExamples) {
  const Threat unit = sphere(1.0);
  EXPECT_DOUBLE_EQ(threat_value(unit, 0.0, Vec3(1, 0, 0)), 1.0);
  EXPECT_DOUBLE_EQ(threat_value(unit, 0.0, Vec3(2, 0, 0)), 4.0);
  Threat ell = unit;
  ell.semi_axes = Vec3(2, 1, 1);
  EXPECT_DOUBLE_EQ(threat_value(ell, 0.0, Vec3(2, 1, 0)), 2.0);
}

TEST(Threats, ValueMatchesPowOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> coord(-10.0, 10.0);
  for (int k = 0; k < 500; ++k) {
    const Threat t = random_threat(rng);
    const Vec3 p(coord(rng), coord(rng), coord(rng));
    const double expect = value_oracle(t, t.center0, p);
    EXPECT_NEAR(threat_value(t, 0.0, p), expect, 1e-12 * std::max(1.0, expect));
  }
}

TEST(Threats, NormalExamples) {
  const Threat unit = sphere(1.0);
  EXPECT_TRUE(threat_normal(unit, 0.0, Vec3(1, 0, 0)).isApprox(Vec3(2, 0, 0)));
  EXPECT_TRUE(threat_normal(unit, 0.0, Vec3(0, 2, 0)).isApprox(Vec3(0, 4, 0)));
  EXPECT_THROW(threat_normal(unit, 0.0, Vec3::Zero()), DegenerateError);
}

TEST(Threats, NormalMatchesCentralDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(-8.0, 8.0);
  for (int k = 0; k < 1000; ++k) {
    const Threat t = random_threat(rng);
    Vec3 p(coord(rng), coord(rng), coord(rng));
    // Keep away from the center where the relative error is ill-conditioned.
    if ((p - t.center0).norm() < 0.5) p += Vec3(1.0, 1.0, 1.0);
    const Vec3 g = threat_normal(t, 0.0, p);
    Vec3 fd;
    for (int i = 0; i < 3; ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(p[i]));
      Vec3 a = p, b = p;
      a[i] += h;
      b[i] -= h;
      fd[i] = (value_oracle(t, t.center0, a) - value_oracle(t, t.center0, b)) / (2.0 * h);
    }
    EXPECT_LT((g - fd).norm(), 1e-6 * g.norm() + 1e-9) << "case " << k;
  }
}

TEST(Threats, MotionPatterns) {
  const Vec3 c0(10, 20, 30);
  MotionPattern m;
  auto [c, v] = position_at(m, c0, 123.0);
  EXPECT_EQ(c, c0);
  EXPECT_EQ(v, Vec3::Zero());

  m.kind = MotionKind::kCircle;
  m.amplitude = 50.0;
  m.angular_rate = 0.2;
  std::tie(c, v) = position_at(m, c0, 0.0);
  EXPECT_TRUE(c.isApprox(c0 + Vec3(50, 0, 0)));
  EXPECT_TRUE(v.isApprox(Vec3(0, 10, 0)));

  m.kind = MotionKind::kSine;
  m.direction = Vec3(0, 0.6, 0.8);
  m.phase = 0.3;
  const double t_peak = (kPi / 2 - m.phase) / m.angular_rate;
  std::tie(c, v) = position_at(m, c0, t_peak);
  EXPECT_TRUE(c.isApprox(c0 + 50.0 * m.direction));
  EXPECT_LT(v.norm(), 1e-12);

  m.kind = MotionKind::kLine;
  std::tie(c, v) = position_at(m, c0, 2.0);
  EXPECT_TRUE(c.isApprox(c0 + 20.0 * m.direction));
  EXPECT_TRUE(v.isApprox(10.0 * m.direction));
}

TEST(Threats, MotionVelocityIsTimeDerivative) {
  MotionPattern m;
  m.amplitude = 40.0;
  m.angular_rate = 0.15;
  m.phase = 0.4;
  m.direction = Vec3(1, 2, 2) / 3.0;
  for (MotionKind kind : {MotionKind::kLine, MotionKind::kCircle, MotionKind::kSine, MotionKind::kTangent}) {
    m.kind = kind;
    for (double t : {0.0, 1.7, 4.2}) {
      const double h = 1e-6;
      const Vec3 fd =
          (position_at(m, Vec3::Zero(), t + h).first - position_at(m, Vec3::Zero(), t - h).first) / (2 * h);
      EXPECT_LT((position_at(m, Vec3::Zero(), t).second - fd).norm(), 1e-5) << static_cast<int>(kind);
    }
  }
}

TEST(Threats, SurfaceDistanceExamples) {
  EXPECT_NEAR(nearest_surface_distance(sphere(1.0), 0.0, Vec3(3, 0, 0)), 2.0, 1e-6);
  EXPECT_NEAR(nearest_surface_distance(sphere(5.0), 0.0, Vec3(12, 0, 0) / std::sqrt(1.0) * 1.0), 7.0, 1e-6);
  EXPECT_NEAR(nearest_surface_distance(sphere(5.0), 0.0, Vec3(4, 4, std::sqrt(144.0 - 32.0))), 7.0, 1e-6);
  Threat ell = sphere(1.0);
  ell.semi_axes = Vec3(2, 1, 1);
  EXPECT_NEAR(nearest_surface_distance(ell, 0.0, Vec3(4, 0, 0)), 2.0, 1e-6);
  EXPECT_DOUBLE_EQ(nearest_surface_distance(sphere(1.0), 0.0, Vec3(1, 0, 0)), 0.0);
  EXPECT_THROW(nearest_surface_distance(sphere(1.0), 0.0, Vec3(0.5, 0, 0)), InsideThreatError);
}

TEST(Threats, SurfaceDistanceMatchesBisectionOracle) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> coord(-30.0, 30.0);
  int checked = 0;
  while (checked < 500) {
    const Threat t = random_threat(rng);
    const Vec3 p(coord(rng), coord(rng), coord(rng));
    if (value_oracle(t, t.center0, p) <= 1.0) continue;
    EXPECT_NEAR(nearest_surface_distance(t, 0.0, p), radial_distance_oracle(t, t.center0, p), 1e-6);
    const Vec3 s = project_to_surface(t, 0.0, p);
    EXPECT_NEAR(value_oracle(t, t.center0, s), 1.0, 1e-6);
    ++checked;
  }
}

TEST(Threats, MovingThreatUsesCurrentCenter) {
  Threat t = sphere(1.0);
  t.motion.kind = MotionKind::kLine;
  t.motion.amplitude = 1.0;
  t.motion.angular_rate = 1.0;
  t.motion.direction = Vec3::UnitX();
  EXPECT_NEAR(nearest_surface_distance(t, 2.0, Vec3(6, 0, 0)), 3.0, 1e-6);
  EXPECT_DOUBLE_EQ(threat_value(t, 2.0, Vec3(2, 0, 0)), 0.0);
}

TEST(Threats, Validation) {
  Threat t = sphere(1.0);
  EXPECT_NO_THROW(validate(t));
  Threat bad = t;
  bad.semi_axes.x() = 0.0;
  EXPECT_THROW(validate(bad), Error);
  bad = t;
  bad.exponents[1] = 0;
  EXPECT_THROW(validate(bad), Error);
  bad = t;
  bad.r_threaten = bad.r_obs;
  EXPECT_THROW(validate(bad), Error);
  bad = t;
  bad.lambda = 0.0;
  EXPECT_THROW(validate(bad), Error);
  bad = t;
  bad.motion.kind = MotionKind::kSine;
  bad.motion.direction = Vec3(1, 1, 0);
  EXPECT_THROW(validate(bad), Error);
}

TEST(Threats, SensorRangeAndExactContact) {
  const std::vector<Threat> threats{sphere(1000.0, Vec3(16000, 0, 0)), sphere(1000.0, Vec3(6000, 0, 0))};
  std::mt19937_64 rng(7);
  const auto obs = observe(threats, 0.0, Vec3::Zero(), rng, SensorConfig{10000.0, 0.0});
  ASSERT_EQ(obs.size(), 2u);
  EXPECT_FALSE(obs[0].visible());  // 15 km to the surface
  ASSERT_TRUE(obs[1].visible());
  EXPECT_NEAR(obs[1].contact->distance, 5000.0, 1e-6);
  EXPECT_TRUE(obs[1].contact->rel_position.isApprox(Vec3(5000, 0, 0), 1e-9));
  EXPECT_EQ(obs[1].contact->threat_velocity, Vec3::Zero());
}

TEST(Threats, DropoutRateWithinBinomialInterval) {
  const std::vector<Threat> threats{sphere(1000.0, Vec3(6000, 0, 0))};
  std::mt19937_64 rng(8);
  int dropped = 0;
  const int trials = 10000;
  for (int k = 0; k < trials; ++k)
    if (!observe(threats, 0.0, Vec3::Zero(), rng, SensorConfig{10000.0, 0.05})[0].visible()) ++dropped;
  const double rate = static_cast<double>(dropped) / trials;
  EXPECT_GE(rate, 0.037);
  EXPECT_LE(rate, 0.063);
}

TEST(Threats, ObserveConsumesOneDrawPerThreat) {
  const std::vector<Threat> threats{sphere(1.0, Vec3(5, 0, 0)), sphere(1.0, Vec3(50000, 0, 0))};
  std::mt19937_64 a(9), b(9);
  observe(threats, 0.0, Vec3::Zero(), a);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  unit(b);
  unit(b);
  EXPECT_EQ(a(), b());
}
