#include "epo/trajectory.hpp"

#include <cmath>
#include <sstream>

#include "epo/common.hpp"

namespace epo::traj {

void Trajectory::quantize_f32() {
  for (auto& wp : waypoints) {
    wp.x = epo::quantize_f32(wp.x);
    wp.y = epo::quantize_f32(wp.y);
    wp.heading = epo::quantize_f32(wp.heading);
  }
}

std::array<double, kWaypointCount> waypoint_speeds(const Trajectory& t) {
  std::array<double, kWaypointCount> v{};
  for (int k = 0; k + 1 < kWaypointCount; ++k) {
    v[k] = (t.waypoints[k + 1].position() - t.waypoints[k].position()).norm() /
           kTickSeconds;
  }
  v[kWaypointCount - 1] = v[kWaypointCount - 2];
  return v;
}

KinematicProfile compute_profile(const Trajectory& t) {
  KinematicProfile p{};
  p.speed = waypoint_speeds(t);
  const double dt = kTickSeconds;

  for (int k = 1; k < kWaypointCount; ++k) {
    p.accel[k] = (p.speed[k] - p.speed[k - 1]) / dt;
  }
  p.accel[0] = p.accel[1];

  for (int k = 2; k < kWaypointCount; ++k) {
    p.jerk[k] = (p.accel[k] - p.accel[k - 1]) / dt;
  }
  p.jerk[0] = p.jerk[1] = p.jerk[2];

  // Heading history before the plan is flat, so yaw rate at waypoint 0 is the
  // heading itself over one tick (zero for rolled-out actions).
  p.yaw_rate[0] = geom::wrap_angle(t.waypoints[0].heading) / dt;
  for (int k = 1; k < kWaypointCount; ++k) {
    p.yaw_rate[k] =
        geom::wrap_angle(t.waypoints[k].heading - t.waypoints[k - 1].heading) /
        dt;
  }

  for (int k = 1; k < kWaypointCount; ++k) {
    p.yaw_accel[k] = (p.yaw_rate[k] - p.yaw_rate[k - 1]) / dt;
  }
  p.yaw_accel[0] = p.yaw_accel[1];

  for (int k = 0; k < kWaypointCount; ++k) {
    p.lat_accel[k] = p.speed[k] * p.yaw_rate[k];
  }
  return p;
}

double traj_distance(const Trajectory& a, const Trajectory& b) {
  double acc = 0.0;
  for (int k = 0; k < kWaypointCount; ++k) {
    acc += (a.waypoints[k].position() - b.waypoints[k].position()).squared_norm();
  }
  return std::sqrt(acc / kWaypointCount);
}

std::vector<double> flatten_positions(const Trajectory& t) {
  std::vector<double> out;
  out.reserve(2 * kWaypointCount);
  for (const auto& wp : t.waypoints) {
    out.push_back(wp.x);
    out.push_back(wp.y);
  }
  return out;
}

std::uint64_t trajectory_hash(const Trajectory& t) {
  Fnv1a64 h;
  for (const auto& wp : t.waypoints) {
    h.update_value(static_cast<float>(wp.x));
    h.update_value(static_cast<float>(wp.y));
    h.update_value(static_cast<float>(wp.heading));
  }
  return h.digest();
}

std::string check_trajectory(const Trajectory& t, double wheelbase,
                             double max_steer) {
  if (t.waypoints[0].position().norm() > 0.3) {
    return "waypoint 0 is more than 0.3 m from the origin";
  }
  const auto v = waypoint_speeds(t);
  const double tan_max = std::tan(max_steer);
  for (int k = 1; k < kWaypointCount; ++k) {
    const double dh = std::abs(geom::wrap_angle(t.waypoints[k].heading -
                                                t.waypoints[k - 1].heading));
    // Heading change over one tick at the speed entering the step, plus a
    // small allowance for f32 quantization.
    const double bound =
        v[k - 1] / wheelbase * tan_max * kTickSeconds + 1e-6;
    if (dh > bound) {
      std::ostringstream os;
      os << "heading change " << dh << " at waypoint " << k
         << " exceeds feasible bound " << bound;
      return os.str();
    }
  }
  return {};
}

}  // namespace epo::traj
