#pragma once

#include <span>
#include <vector>

#include "tfta/common.hpp"
#include "tfta/threats.hpp"

namespace tfta {

/// The four policy-controlled field parameters.
struct FieldAction {
  double beta = 1.0;   // ground disturbance intensity
  double rho = 1.0;    // repulsive strength
  double sigma = 1.0;  // tangential strength
  double theta = 0.0;  // tangential field angle, rad

  static constexpr double kMinGain = 0.05;
  static constexpr double kMaxGain = 3.0;

  bool operator==(const FieldAction&) const = default;
};

enum class GroundMode {
  kAdditive,  // upward velocity cruise*beta*ln(h_safe/agl + 1), tapered to 0 at the influence ceiling
  kLiteral,   // identity scaled by beta*ln(agl/h_safe + 1) applied to the free stream
};

struct FieldConfig {
  double cruise_speed = 200.0;  // m/s
  double r_conf = 10000.0;      // m, threats farther than this (surface distance) are ignored
  double height_safe = 150.0;   // m
  /// Ground field acts below this AGL only; 0 selects 50 * height_safe.
  double ground_ceiling = 0.0;
  GroundMode ground_mode = GroundMode::kAdditive;

  double effective_ground_ceiling() const { return ground_ceiling > 0.0 ? ground_ceiling : 50.0 * height_safe; }

  bool operator==(const FieldConfig&) const = default;
};

/// cruise_speed * unit(goal - p). Throws DegenerateError when p == goal.
Vec3 free_stream(const Vec3& p, const Vec3& goal, double cruise_speed);

/// R = -n n^T / (F^(1/rho) n^T n).
template <typename Scalar>
Matrix3<Scalar> repulsive_matrix(Scalar f_value, const Vector3<Scalar>& normal, Scalar rho) {
  const Scalar nn = normal.squaredNorm();
  if (nn == Scalar(0)) throw DegenerateError("repulsive matrix needs a nonzero normal");
  using std::pow;
  using std::abs;
  return -(normal * normal.transpose()) / (pow(abs(f_value), Scalar(1) / rho) * nn);
}

/// Unit tangent direction cos(theta) t1_hat + sin(theta) t2_hat built from the
/// gradient. `degenerate` is set when both basis vectors vanish (purely vertical
/// gradient); a horizontal fallback basis is used then.
template <typename Scalar>
Vector3<Scalar> tangent_direction(const Vector3<Scalar>& grad, Scalar theta, bool* degenerate = nullptr) {
  using std::cos;
  using std::sin;
  const Scalar fx = grad[0];
  const Scalar fy = grad[1];
  const Scalar fz = grad[2];
  Vector3<Scalar> t1(fy, -fx, Scalar(0));
  Vector3<Scalar> t2(fx * fz, fy * fz, -(fx * fx) - fy * fy);
  const bool bad = t1.squaredNorm() == Scalar(0);
  if (degenerate) *degenerate = bad;
  if (bad) {
    t1 = Vector3<Scalar>(Scalar(1), Scalar(0), Scalar(0));
    t2 = Vector3<Scalar>(Scalar(0), Scalar(1), Scalar(0));
  } else {
    // t2 vanishes exactly when t1 does.
    t1.normalize();
    t2.normalize();
  }
  return cos(theta) * t1 + sin(theta) * t2;
}

struct TangentialTerm {
  Mat3 matrix;
  bool degenerate_basis = false;
};

/// T = t n^T / (F^(1/sigma) |t| |n|).
template <typename Scalar>
Matrix3<Scalar> tangential_matrix(Scalar f_value, const Vector3<Scalar>& normal, Scalar sigma, Scalar theta,
                                  bool* degenerate = nullptr) {
  const Scalar n_norm = normal.norm();
  if (n_norm == Scalar(0)) throw DegenerateError("tangential matrix needs a nonzero normal");
  const Vector3<Scalar> t = tangent_direction<Scalar>(normal, theta, degenerate);
  using std::pow;
  using std::abs;
  return (t * normal.transpose()) / (pow(abs(f_value), Scalar(1) / sigma) * t.norm() * n_norm);
}

TangentialTerm tangential_term(double f_value, const Vec3& normal, double sigma, double theta);

/// Upward ground-disturbance velocity (additive mode). Throws CrashError for agl <= 0.
Vec3 ground_velocity(double agl, double beta, const FieldConfig& config);

/// Pure log law without the influence ceiling: (0, 0, cruise*beta*ln(h_safe/agl + 1)).
Vec3 ground_velocity(double agl, double beta, double height_safe, double cruise_speed);

/// omega_k = prod_{i != k} (F_i - 1) / ((F_i - 1) + (F_k - 1)); [1] for one obstacle.
/// Throws InsideThreatError if any F <= 1.
std::vector<double> obstacle_weights(std::span<const double> f_values);

/// Per-step field telemetry.
struct FieldTelemetry {
  int participating = 0;
  bool tangent_fallback = false;
};

/// Disturbed-flow planning velocity for the agent at p.
/// Only visible threats within r_conf participate. Throws InsideThreatError
/// if the agent is on/inside a participating threat and CrashError if agl <= 0.
Vec3 flow_velocity(const Vec3& p, const Vec3& goal, const FieldAction& action, std::span<const Threat> threats,
                   std::span<const Observation> observations, double terrain_agl, const FieldConfig& config,
                   double t, FieldTelemetry* telemetry = nullptr);

}  // namespace tfta
