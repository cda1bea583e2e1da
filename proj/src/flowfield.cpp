#include "tfta/flowfield.hpp"

#include <algorithm>

namespace tfta {

Vec3 free_stream(const Vec3& p, const Vec3& goal, double cruise_speed) {
  const Vec3 d = goal - p;
  const double n = d.norm();
  if (n == 0.0) throw DegenerateError("free stream undefined at the goal");
  return cruise_speed * (d / n);
}

TangentialTerm tangential_term(double f_value, const Vec3& normal, double sigma, double theta) {
  TangentialTerm out;
  out.matrix = tangential_matrix<double>(f_value, normal, sigma, theta, &out.degenerate_basis);
  return out;
}

Vec3 ground_velocity(double agl, double beta, double height_safe, double cruise_speed) {
  if (!(agl > 0.0)) throw CrashError("agent at or below ground level");
  return {0.0, 0.0, cruise_speed * beta * std::log(height_safe / agl + 1.0)};
}

Vec3 ground_velocity(double agl, double beta, const FieldConfig& config) {
  Vec3 v = ground_velocity(agl, beta, config.height_safe, config.cruise_speed);
  const double ceiling = config.effective_ground_ceiling();
  const double knee = 0.5 * ceiling;
  if (agl >= ceiling) return Vec3::Zero();
  if (agl > knee) {
    const double s = (agl - knee) / (ceiling - knee);
    v *= 1.0 - s * s * (3.0 - 2.0 * s);
  }
  return v;
}

std::vector<double> obstacle_weights(std::span<const double> f_values) {
  for (double f : f_values)
    if (!(f > 1.0)) throw InsideThreatError("obstacle weight undefined on or inside a threat surface");
  const std::size_t n = f_values.size();
  std::vector<double> w(n, 1.0);
  if (n <= 1) return w;
  for (std::size_t k = 0; k < n; ++k) {
    const double ek = f_values[k] - 1.0;
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      const double ei = f_values[i] - 1.0;
      prod *= ei / (ei + ek);
    }
    w[k] = prod;
  }
  return w;
}

Vec3 flow_velocity(const Vec3& p, const Vec3& goal, const FieldAction& action, std::span<const Threat> threats,
                   std::span<const Observation> observations, double terrain_agl, const FieldConfig& config,
                   double t, FieldTelemetry* telemetry) {
  if (!(terrain_agl > 0.0)) throw CrashError("agent at or below ground level");
  const Vec3 u = free_stream(p, goal, config.cruise_speed);

  struct Participant {
    double f;
    Vec3 normal;
    Vec3 velocity;
    double lambda;
  };
  std::vector<Participant> active;
  active.reserve(observations.size());
  for (const Observation& obs : observations) {
    if (!obs.visible() || obs.contact->distance >= config.r_conf) continue;
    const Threat& threat = threats[obs.threat_index];
    const Vec3 center = position_at(threat.motion, threat.center0, t).first;
    const double f = superquadric_value<double>(threat.semi_axes, threat.exponents, center, p);
    if (!(f > 1.0)) throw InsideThreatError("agent on or inside a threat surface");
    const Vec3 grad = superquadric_gradient<double>(threat.semi_axes, threat.exponents, center, p);
    active.push_back({f, grad, obs.contact->threat_velocity, threat.lambda});
  }

  FieldTelemetry local;
  local.participating = static_cast<int>(active.size());

  Mat3 m_bar = Mat3::Identity();
  Vec3 feedthrough = Vec3::Zero();
  if (!active.empty()) {
    std::vector<double> fs;
    fs.reserve(active.size());
    for (const auto& a : active) fs.push_back(a.f);
    const std::vector<double> w = obstacle_weights(fs);
    m_bar.setZero();
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto& a = active[k];
      bool fallback = false;
      const Mat3 m_k = Mat3::Identity() + repulsive_matrix<double>(a.f, a.normal, action.rho) +
                       tangential_matrix<double>(a.f, a.normal, action.sigma, action.theta, &fallback);
      local.tangent_fallback = local.tangent_fallback || fallback;
      m_bar += w[k] * m_k;
      feedthrough += w[k] * std::exp(-(a.f - 1.0) / a.lambda) * a.velocity;
    }
  }

  Vec3 velocity;
  if (config.ground_mode == GroundMode::kLiteral) {
    const double scale = action.beta * std::log(terrain_agl / config.height_safe + 1.0);
    velocity = (m_bar + scale * Mat3::Identity()) * (u - feedthrough) + feedthrough;
  } else {
    velocity = m_bar * (u - feedthrough) + feedthrough + ground_velocity(terrain_agl, action.beta, config);
  }
  if (telemetry) *telemetry = local;
  return velocity;
}

}  // namespace tfta
