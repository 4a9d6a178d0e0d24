#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "epo/geom.hpp"

namespace epo::traj {

inline constexpr int kWaypointCount = 40;
inline constexpr double kTickSeconds = 0.1;

/// A 4-second ego motion plan: 40 poses at 10 Hz in the ego frame (waypoint 0
/// sits at the origin, t = 0.0 .. 3.9 s). The atomic action.
struct Trajectory {
  std::array<geom::Pose2, kWaypointCount> waypoints;

  bool operator==(const Trajectory& o) const = default;

  /// Rounds every waypoint through f32 so the value survives serialization
  /// bit-exactly.
  void quantize_f32();
};

/// Per-waypoint speed derived from consecutive displacements (forward
/// differences; the last entry repeats the one before it).
std::array<double, kWaypointCount> waypoint_speeds(const Trajectory& t);

/// Backward-difference kinematics of a standalone trajectory. Entries before
/// `*_valid_from` repeat the first valid value; comparisons must skip them.
struct KinematicProfile {
  std::array<double, kWaypointCount> speed;      // valid from 0
  std::array<double, kWaypointCount> accel;      // valid from 1
  std::array<double, kWaypointCount> jerk;       // valid from 2
  std::array<double, kWaypointCount> yaw_rate;   // valid from 0 (zero history)
  std::array<double, kWaypointCount> yaw_accel;  // valid from 1
  std::array<double, kWaypointCount> lat_accel;  // valid from 0

  static constexpr int kAccelValidFrom = 1;
  static constexpr int kJerkValidFrom = 2;
  static constexpr int kYawAccelValidFrom = 1;
};

KinematicProfile compute_profile(const Trajectory& t);

/// Root-mean-square of per-waypoint (x, y) Euclidean distances; the
/// vocabulary metric (heading deliberately ignored).
double traj_distance(const Trajectory& a, const Trajectory& b);

/// Waypoint positions flattened to (x0, y0, x1, y1, ...), length 80.
std::vector<double> flatten_positions(const Trajectory& t);

/// 64-bit content hash over the f32 bit patterns of (x, y, heading) rows.
std::uint64_t trajectory_hash(const Trajectory& t);

/// Checks the trajectory invariants; returns an explanation or empty string.
/// `wheelbase`/`max_steer` bound the per-tick heading change.
std::string check_trajectory(const Trajectory& t, double wheelbase,
                             double max_steer);

}  // namespace epo::traj
