#pragma once

#include <array>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "tfta/common.hpp"

namespace tfta {

enum class MotionKind { kStatic, kLine, kCircle, kSine, kTangent };

struct MotionPattern {
  MotionKind kind = MotionKind::kStatic;
  double amplitude = 0.0;     // m
  double angular_rate = 0.0;  // rad/s
  Vec3 direction = Vec3::UnitX();
  double phase = 0.0;  // rad

  bool operator==(const MotionPattern&) const = default;
};

/// Superquadric threat volume F(p) = sum_i ((p_i - c_i) / s_i)^(2 k_i).
struct Threat {
  Vec3 center0 = Vec3::Zero();
  Vec3 semi_axes = Vec3::Ones();
  std::array<int, 3> exponents = {1, 1, 1};
  MotionPattern motion;
  double r_obs = 1.0;
  double r_threaten = 2.0;
  double lambda = 5.0;

  bool operator==(const Threat&) const = default;
};

/// Throws Error if any Threat invariant is violated.
void validate(const Threat& threat);

/// Center and velocity of a moving pattern at time t.
std::pair<Vec3, Vec3> position_at(const MotionPattern& motion, const Vec3& center0, double t);

// Closed-form superquadric pieces, templated on scalar so the same expression
// serves double evaluation and any test-side reimplementation.

template <typename Scalar>
Scalar superquadric_value(const Vector3<Scalar>& semi_axes, const std::array<int, 3>& exponents,
                          const Vector3<Scalar>& center, const Vector3<Scalar>& p) {
  Scalar f(0);
  for (int i = 0; i < 3; ++i) {
    const Scalar s = (p[i] - center[i]) / semi_axes[i];
    const Scalar s2 = s * s;
    Scalar term(1);
    for (int k = 0; k < exponents[i]; ++k) term *= s2;
    f += term;
  }
  return f;
}

/// Analytic gradient dF/dp (no degeneracy check).
template <typename Scalar>
Vector3<Scalar> superquadric_gradient(const Vector3<Scalar>& semi_axes, const std::array<int, 3>& exponents,
                                      const Vector3<Scalar>& center, const Vector3<Scalar>& p) {
  Vector3<Scalar> g;
  for (int i = 0; i < 3; ++i) {
    const Scalar s = (p[i] - center[i]) / semi_axes[i];
    // d/dp (s^(2k)) = 2k s^(2k-1) / a
    Scalar pow_odd = s;
    for (int k = 1; k < exponents[i]; ++k) pow_odd *= s * s;
    g[i] = Scalar(2 * exponents[i]) * pow_odd / semi_axes[i];
  }
  return g;
}

double threat_value(const Threat& threat, double t, const Vec3& p);

/// Outward normal (gradient of F). Throws DegenerateError at the center.
Vec3 threat_normal(const Threat& threat, double t, const Vec3& p);

/// Point on F = 1 along the segment from the current center to p.
/// Throws InsideThreatError when F(p) < 1.
Vec3 project_to_surface(const Threat& threat, double t, const Vec3& p);

/// Radial-chord distance from p to the threat surface (damped Newton on the
/// center->p line, 1e-6 m tolerance). Throws InsideThreatError when F(p) < 1.
double nearest_surface_distance(const Threat& threat, double t, const Vec3& p);

struct SensorConfig {
  double range = 10000.0;   // m
  double dropout = 0.05;    // probability a visible threat is not reported

  bool operator==(const SensorConfig&) const = default;
};

struct ThreatContact {
  Vec3 rel_position;     // agent -> nearest surface point
  double distance;       // |rel_position|
  Vec3 threat_velocity;  // m/s
};

struct Observation {
  std::size_t threat_index = 0;
  std::optional<ThreatContact> contact;  // empty when not visible

  bool visible() const { return contact.has_value(); }
};

/// One observation per threat, in roster order. Exactly one uniform draw is
/// consumed per threat so the stream does not depend on geometry.
std::vector<Observation> observe(std::span<const Threat> threats, double t, const Vec3& agent_position,
                                 std::mt19937_64& rng, const SensorConfig& sensor = {});

}  // namespace tfta
