#include "tfta/threats.hpp"

#include <algorithm>

namespace tfta {

void validate(const Threat& threat) {
  if (!(threat.semi_axes.array() > 0.0).all()) throw Error("threat semi-axes must be > 0");
  for (int e : threat.exponents)
    if (e < 1) throw Error("threat exponents must be >= 1");
  if (!(threat.r_obs > 0.0 && threat.r_obs < threat.r_threaten))
    throw Error("threat radii must satisfy 0 < r_obs < r_threaten");
  if (!(threat.lambda > 0.0)) throw Error("threat lambda must be > 0");
  if (threat.motion.kind != MotionKind::kStatic && std::abs(threat.motion.direction.norm() - 1.0) > 1e-9)
    throw Error("moving threat direction must be a unit vector");
}

std::pair<Vec3, Vec3> position_at(const MotionPattern& m, const Vec3& center0, double t) {
  const double arg = m.angular_rate * t + m.phase;
  switch (m.kind) {
    case MotionKind::kStatic:
      return {center0, Vec3::Zero()};
    case MotionKind::kLine:
      return {center0 + m.amplitude * m.angular_rate * t * m.direction, m.amplitude * m.angular_rate * m.direction};
    case MotionKind::kCircle:
      return {center0 + m.amplitude * Vec3(std::cos(arg), std::sin(arg), 0.0),
              m.amplitude * m.angular_rate * Vec3(-std::sin(arg), std::cos(arg), 0.0)};
    case MotionKind::kSine:
      return {center0 + m.amplitude * std::sin(arg) * m.direction,
              m.amplitude * m.angular_rate * std::cos(arg) * m.direction};
    case MotionKind::kTangent: {
      // Unbounded tan() would eject the threat; clamp at +-10 amplitudes.
      const double limit = 10.0 * std::abs(m.amplitude);
      const double raw = m.amplitude * std::tan(arg);
      if (std::abs(raw) >= limit) return {center0 + std::copysign(limit, raw) * m.direction, Vec3::Zero()};
      const double c = std::cos(arg);
      return {center0 + raw * m.direction, m.amplitude * m.angular_rate / (c * c) * m.direction};
    }
  }
  return {center0, Vec3::Zero()};
}

double threat_value(const Threat& threat, double t, const Vec3& p) {
  const Vec3 center = position_at(threat.motion, threat.center0, t).first;
  return superquadric_value<double>(threat.semi_axes, threat.exponents, center, p);
}

Vec3 threat_normal(const Threat& threat, double t, const Vec3& p) {
  const Vec3 center = position_at(threat.motion, threat.center0, t).first;
  const Vec3 g = superquadric_gradient<double>(threat.semi_axes, threat.exponents, center, p);
  if (g.squaredNorm() == 0.0) throw DegenerateError("threat normal vanishes at the threat center");
  return g;
}

namespace {

// Solves F(center + s * r) = 1 for s in (0, 1]. F along the ray is
// sum_i c_i s^(2 k_i) with c_i >= 0: increasing and convex on s >= 0, so Newton
// from a point with F >= 1 decreases monotonically onto the root.
double surface_fraction(const Threat& threat, const Vec3& center, const Vec3& p, double f_value) {
  const Vec3 r = p - center;
  const double length = r.norm();
  std::array<double, 3> coef{};
  int k_max = 1;
  for (int i = 0; i < 3; ++i) {
    const double s = r[i] / threat.semi_axes[i];
    double v = 1.0;
    for (int k = 0; k < threat.exponents[i]; ++k) v *= s * s;
    coef[i] = v;
    k_max = std::max(k_max, threat.exponents[i]);
  }
  auto g = [&](double s, double& slope) {
    double value = -1.0;
    slope = 0.0;
    for (int i = 0; i < 3; ++i) {
      const int two_k = 2 * threat.exponents[i];
      const double sp = std::pow(s, two_k - 1);
      value += coef[i] * sp * s;
      slope += coef[i] * two_k * sp;
    }
    return value;
  };

  // s0 = F^(-1/(2 k_max)) satisfies g(s0) >= 0, so it brackets from the right.
  double hi = std::min(1.0, std::pow(f_value, -1.0 / (2.0 * k_max)));
  double lo = 0.0;
  double s = hi;
  for (int iter = 0; iter < 200; ++iter) {
    double slope = 0.0;
    const double value = g(s, slope);
    if (value == 0.0) return s;
    if (value > 0.0)
      hi = s;
    else
      lo = s;
    double next = slope > 0.0 ? s - value / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // damping safeguard
    if (std::abs(next - s) * length < 1e-7) return next;
    s = next;
  }
  return s;
}

}  // namespace

Vec3 project_to_surface(const Threat& threat, double t, const Vec3& p) {
  const Vec3 center = position_at(threat.motion, threat.center0, t).first;
  const double f = superquadric_value<double>(threat.semi_axes, threat.exponents, center, p);
  if (f < 1.0) throw InsideThreatError("point lies inside the threat volume");
  if (f == 1.0) return p;
  return center + surface_fraction(threat, center, p, f) * (p - center);
}

double nearest_surface_distance(const Threat& threat, double t, const Vec3& p) {
  const Vec3 center = position_at(threat.motion, threat.center0, t).first;
  const double f = superquadric_value<double>(threat.semi_axes, threat.exponents, center, p);
  if (f < 1.0) throw InsideThreatError("point lies inside the threat volume");
  if (f == 1.0) return 0.0;
  const double s = surface_fraction(threat, center, p, f);
  return std::max(0.0, (1.0 - s) * (p - center).norm());
}

std::vector<Observation> observe(std::span<const Threat> threats, double t, const Vec3& agent_position,
                                 std::mt19937_64& rng, const SensorConfig& sensor) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Observation> out;
  out.reserve(threats.size());
  for (std::size_t k = 0; k < threats.size(); ++k) {
    const double draw = unit(rng);
    Observation obs;
    obs.threat_index = k;
    const Threat& threat = threats[k];
    const auto [center, velocity] = position_at(threat.motion, threat.center0, t);
    const double f = superquadric_value<double>(threat.semi_axes, threat.exponents, center, agent_position);
    Vec3 surface = agent_position;
    if (f > 1.0) surface = center + surface_fraction(threat, center, agent_position, f) * (agent_position - center);
    const Vec3 rel = surface - agent_position;
    const double distance = rel.norm();
    if (distance <= sensor.range && draw >= sensor.dropout) obs.contact = ThreatContact{rel, distance, velocity};
    out.push_back(std::move(obs));
  }
  return out;
}

}  // namespace tfta
