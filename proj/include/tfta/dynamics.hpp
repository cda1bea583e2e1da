#pragma once

#include <optional>

#include "tfta/common.hpp"

namespace tfta {

struct AircraftState {
  Vec3 position = Vec3::Zero();
  double speed = 200.0;        // V, m/s
  double climb = 0.0;          // gamma, rad
  double heading = 0.0;        // chi, rad, counter-clockwise from +x
  double roll = 0.0;           // rad

  bool operator==(const AircraftState&) const = default;
};

struct KinematicLimits {
  double gamma_max = deg2rad(25.0);
  double roll_max = deg2rad(45.0);
  double gravity = 9.81;
  double load_factor_max = 3.0;

  /// Largest horizontal path curvature g*tan(roll_max)/V^2.
  double max_curvature(double speed) const { return gravity * std::tan(roll_max) / (speed * speed); }
  double min_turn_radius(double speed) const { return 1.0 / max_curvature(speed); }
  /// Conservative climb-angle rate bound g*(n_max - 1)/V.
  double max_climb_rate(double speed) const { return gravity * (load_factor_max - 1.0) / speed; }

  bool operator==(const KinematicLimits&) const = default;
};

/// Throws Error when the limits are not all positive (load factor must exceed 1).
void validate(const KinematicLimits& limits);

struct HorizontalPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

/// Constant-curvature arc in the horizontal plane: heading advances by
/// curvature*v*dt, the position follows the circle of radius 1/|curvature|.
/// Zero curvature is the straight-line limit.
HorizontalPose horizontal_step(const HorizontalPose& from, double v, double curvature, double dt);

/// Same, rejecting curvatures above the roll-limited maximum with LimitsExceededError.
HorizontalPose horizontal_step(const HorizontalPose& from, double v, double curvature, double dt,
                               const KinematicLimits& limits);

struct LoadFactors {
  double nx = 0.0;
  double ny = 0.0;
  double nz = 1.0;
};

/// d/dt of (x, y, z, V, gamma, chi) for the point-mass model.
using StateDerivative = Eigen::Matrix<double, 6, 1>;
StateDerivative vertical_derivatives(const AircraftState& state, const LoadFactors& n, double gravity);

/// RK4 over dt with `substeps` fixed steps; load factors clamped to
/// +-load_factor_max first.
AircraftState integrate_vertical(const AircraftState& state, const LoadFactors& controls, double dt,
                                 const KinematicLimits& limits, int substeps = 4);

/// Constant horizontal curvature and a climb angle moving linearly from the
/// state's climb to climb_end over dt at constant speed. Integrated in closed
/// form, so the end climb is exact.
AircraftState propagate_arc(const AircraftState& state, double curvature, double climb_end, double dt,
                            const KinematicLimits& limits);

struct CorrectionResult {
  Vec3 position;
  AircraftState state;
  double demanded_heading_change = 0.0;
  double demanded_climb = 0.0;
  double curvature = 0.0;
  bool turn_clamped = false;
  bool climb_clamped = false;
  bool degenerate = false;  // p_unrestricted == p_now, heading and climb held
};

/// Turns a field-proposed waypoint into a flyable one: demanded heading change
/// and climb are taken from the direction p_now -> p_unrestricted, clamped to
/// the roll and climb limits (including the climb-rate bound), and the state is
/// propagated forward along the resulting arc for dt.
CorrectionResult kinematic_correct(const Vec3& p_now, const Vec3& p_unrestricted, const AircraftState& state,
                                   const KinematicLimits& limits, double dt);

/// An arc (as in propagate_arc) that starts at `from` and passes exactly
/// through `to`; nullopt when it would violate the limits or needs more than a
/// half turn.
struct ArcEdge {
  double curvature = 0.0;
  double climb_end = 0.0;
  double duration = 0.0;
  double heading_change = 0.0;
};
std::optional<ArcEdge> connect_arc(const AircraftState& from, const Vec3& to, const KinematicLimits& limits);

/// Horizontal turn radius of the arc from a to b given the heading change
/// between them (infinity for a straight segment).
double realized_turn_radius(const Vec3& a, const Vec3& b, double heading_change);

}  // namespace tfta
