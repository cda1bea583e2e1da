#include "tfta/dynamics.hpp"

#include <algorithm>
#include <limits>

namespace tfta {

namespace {

double sinc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

using StateVector = Eigen::Matrix<double, 6, 1>;

StateVector pack(const AircraftState& s) {
  StateVector v;
  v << s.position.x(), s.position.y(), s.position.z(), s.speed, s.climb, s.heading;
  return v;
}

}  // namespace

void validate(const KinematicLimits& limits) {
  if (!(limits.gamma_max > 0.0 && limits.gamma_max < kPi / 2)) throw Error("gamma_max must be in (0, pi/2)");
  if (!(limits.roll_max > 0.0 && limits.roll_max < kPi / 2)) throw Error("roll_max must be in (0, pi/2)");
  if (!(limits.gravity > 0.0)) throw Error("gravity must be > 0");
  if (!(limits.load_factor_max > 1.0)) throw Error("load_factor_max must be > 1");
}

HorizontalPose horizontal_step(const HorizontalPose& from, double v, double curvature, double dt) {
  const double length = v * dt;
  const double dphi = curvature * length;
  // sin(dphi)/rho and (1 - cos(dphi))/rho written through sinc so rho -> 0 is exact.
  const double along = length * sinc(dphi);
  const double across = length * std::sin(0.5 * dphi) * sinc(0.5 * dphi);
  const double c = std::cos(from.heading);
  const double s = std::sin(from.heading);
  return {from.x + c * along - s * across, from.y + s * along + c * across, wrap_angle(from.heading + dphi)};
}

HorizontalPose horizontal_step(const HorizontalPose& from, double v, double curvature, double dt,
                               const KinematicLimits& limits) {
  if (!(dt > 0.0)) throw LimitsExceededError("horizontal step needs dt > 0");
  if (std::abs(curvature) > limits.max_curvature(v) * (1.0 + 1e-12))
    throw LimitsExceededError("turn curvature exceeds the roll-limited maximum");
  return horizontal_step(from, v, curvature, dt);
}

StateDerivative vertical_derivatives(const AircraftState& state, const LoadFactors& n, double gravity) {
  const double v = state.speed;
  const double cg = std::cos(state.climb);
  if (!(v > 0.0)) throw SingularityError("speed must be positive");
  if (cg <= 1e-6) throw SingularityError("near-vertical flight path");
  const double sg = std::sin(state.climb);
  StateDerivative d;
  d << v * cg * std::cos(state.heading), v * cg * std::sin(state.heading), v * sg, (n.nx - sg) * gravity,
      gravity * (n.nz - cg) / v, n.ny * gravity / (v * cg);
  return d;
}

AircraftState integrate_vertical(const AircraftState& state, const LoadFactors& controls, double dt,
                                 const KinematicLimits& limits, int substeps) {
  const double cap = limits.load_factor_max;
  const LoadFactors n{std::clamp(controls.nx, -cap, cap), std::clamp(controls.ny, -cap, cap),
                      std::clamp(controls.nz, -cap, cap)};
  auto rhs = [&](const StateVector& x) {
    AircraftState s = state;
    s.position = x.head<3>();
    s.speed = x[3];
    s.climb = x[4];
    s.heading = x[5];
    return StateVector(vertical_derivatives(s, n, limits.gravity));
  };
  StateVector x = pack(state);
  const double h = dt / substeps;
  for (int i = 0; i < substeps; ++i) {
    const StateVector k1 = rhs(x);
    const StateVector k2 = rhs(x + 0.5 * h * k1);
    const StateVector k3 = rhs(x + 0.5 * h * k2);
    const StateVector k4 = rhs(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  AircraftState out = state;
  out.position = x.head<3>();
  out.speed = x[3];
  out.climb = x[4];
  out.heading = wrap_angle(x[5]);
  return out;
}

AircraftState propagate_arc(const AircraftState& state, double curvature, double climb_end, double dt,
                            const KinematicLimits& limits) {
  const double v = state.speed;
  const double mean = 0.5 * (state.climb + climb_end);
  const double half = 0.5 * (climb_end - state.climb);
  // Exact integrals of V cos(gamma) and V sin(gamma) for gamma linear in time.
  const double horizontal = v * dt * std::cos(mean) * sinc(half);
  const double vertical = v * dt * std::sin(mean) * sinc(half);
  const HorizontalPose pose =
      horizontal_step({state.position.x(), state.position.y(), state.heading}, horizontal / dt, curvature, dt);
  AircraftState out = state;
  out.position = Vec3(pose.x, pose.y, state.position.z() + vertical);
  out.heading = pose.heading;
  out.climb = climb_end;
  out.roll = std::atan(curvature * v * v / limits.gravity);
  return out;
}

CorrectionResult kinematic_correct(const Vec3& p_now, const Vec3& p_unrestricted, const AircraftState& state,
                                   const KinematicLimits& limits, double dt) {
  CorrectionResult r;
  const double v = state.speed;
  const Vec3 d = p_unrestricted - p_now;
  const double rate = limits.max_climb_rate(v) * dt;
  AircraftState start = state;
  start.position = p_now;

  if (d.squaredNorm() == 0.0) {
    r.degenerate = true;
    const double climb = std::clamp(state.climb, -limits.gamma_max, limits.gamma_max);
    r.demanded_climb = climb;
    r.state = propagate_arc(start, 0.0, climb, dt, limits);
    r.position = r.state.position;
    return r;
  }

  const double horizontal = std::hypot(d.x(), d.y());
  const double heading_dem = horizontal > 0.0 ? std::atan2(d.y(), d.x()) : state.heading;
  r.demanded_heading_change = wrap_angle(heading_dem - state.heading);
  r.demanded_climb = std::atan2(d.z(), horizontal);

  double climb = std::clamp(r.demanded_climb, state.climb - rate, state.climb + rate);
  climb = std::clamp(climb, -limits.gamma_max, limits.gamma_max);
  r.climb_clamped = climb != r.demanded_climb;

  const double mean = 0.5 * (state.climb + climb);
  const double half = 0.5 * (climb - state.climb);
  const double arc_horizontal = v * dt * std::cos(mean) * sinc(half);
  const double kmax = limits.max_curvature(v);
  double curvature = r.demanded_heading_change / arc_horizontal;
  if (std::abs(curvature) > kmax) {
    curvature = std::copysign(kmax, curvature);
    r.turn_clamped = true;
  }
  r.curvature = curvature;
  r.state = propagate_arc(start, curvature, climb, dt, limits);
  r.position = r.state.position;
  return r;
}

std::optional<ArcEdge> connect_arc(const AircraftState& from, const Vec3& to, const KinematicLimits& limits) {
  const Vec3 d = to - from.position;
  const double chord = std::hypot(d.x(), d.y());
  if (chord <= 0.0) return std::nullopt;
  const double alpha = wrap_angle(std::atan2(d.y(), d.x()) - from.heading);
  if (std::abs(alpha) >= 0.5 * kPi) return std::nullopt;

  ArcEdge e;
  e.heading_change = 2.0 * alpha;
  e.curvature = 2.0 * std::sin(alpha) / chord;
  const double arc_horizontal = chord / sinc(alpha);
  if (std::abs(e.curvature) > limits.max_curvature(from.speed) * (1.0 + 1e-12)) return std::nullopt;

  // Linear climb profile: the mean climb angle fixes the slope of the arc.
  const double mean = std::atan2(d.z(), arc_horizontal);
  e.climb_end = 2.0 * mean - from.climb;
  if (std::abs(e.climb_end) > limits.gamma_max) return std::nullopt;
  const double half = 0.5 * (e.climb_end - from.climb);
  e.duration = arc_horizontal / (from.speed * std::cos(mean) * sinc(half));
  if (std::abs(e.climb_end - from.climb) > limits.max_climb_rate(from.speed) * e.duration * (1.0 + 1e-12))
    return std::nullopt;
  return e;
}

double realized_turn_radius(const Vec3& a, const Vec3& b, double heading_change) {
  const double s = std::abs(std::sin(0.5 * wrap_angle(heading_change)));
  if (s == 0.0) return std::numeric_limits<double>::infinity();
  return std::hypot(b.x() - a.x(), b.y() - a.y()) / (2.0 * s);
}

}  // namespace tfta
