#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epo/geom.hpp"
#include "epo/trajectory.hpp"

namespace epo::world {

/// Frames within a clip are spaced by the replan interval.
inline constexpr double kReplanSeconds = 0.5;
inline constexpr int kReplanTicks = 5;

struct EgoParams {
  double half_length = 2.4;
  double half_width = 1.0;
  double wheelbase = 3.0;
  double max_steer = 0.6;   // rad
  double max_accel = 3.0;   // m/s^2
  double max_brake = 4.0;   // m/s^2, magnitude
  double max_speed = 15.0;  // m/s, sampling envelope
};

struct EgoState {
  geom::Pose2 pose;
  double speed = 0.0;  // m/s, non-negative
};

struct Control {
  double accel = 0.0;  // m/s^2
  double steer = 0.0;  // rad
};

/// Kinematic bicycle step. Controls are clamped to the params bounds and the
/// speed is floored at zero; dt must be positive.
EgoState step_ego(const EgoState& state, const Control& control, double dt,
                  const EgoParams& params);

/// Inverts the bicycle model over the first `k_steps` waypoints of an
/// ego-frame trajectory: accel from consecutive speed differences, steer from
/// the heading rate (speed floored at 0.1 m/s for the division). Outputs are
/// clamped to the params bounds.
std::vector<Control> trajectory_to_controls(const traj::Trajectory& t,
                                            const EgoState& state,
                                            const EgoParams& params,
                                            int k_steps);

struct Lane {
  geom::Polyline centerline;
  double width = 3.5;
};

struct TimeInterval {
  double begin = 0.0;
  double end = 0.0;
};

struct StopLine {
  double route_s = 0.0;  // arc-length position on the route
  std::vector<TimeInterval> red_intervals;

  bool red_at(double t) const {
    for (const auto& iv : red_intervals) {
      if (t >= iv.begin && t < iv.end) return true;
    }
    return false;
  }
};

struct MapModel {
  std::vector<Lane> lanes;
  geom::Polygon drivable;
  geom::Polyline route;
  std::vector<StopLine> stop_lines;
};

struct AgentState {
  geom::Pose2 pose;
  double speed = 0.0;
};

/// Scripted agent motion at 10 Hz covering the full clip plus the planning
/// horizon.
struct AgentTrack {
  double half_length = 2.3;
  double half_width = 0.95;
  std::vector<AgentState> states;

  const AgentState& at_tick(int tick) const;
  geom::OrientedBox box_at(int tick) const;
};

/// One replanning state: the ego status plus an index into the clip's shared
/// agent tracks (the agent slice for this frame starts at `tick`).
struct Frame {
  geom::Pose2 ego_pose;
  double ego_speed = 0.0;
  double ego_accel = 0.0;
  double timestamp = 0.0;
  int tick = 0;
};

enum class Family {
  kStraight,
  kCurve,
  kIntersectionLight,
  kLeadBrake,
  kOncomingOvertake,
  kParkedObstruction,
};

const char* family_name(Family f);
std::optional<Family> family_from_name(const std::string& name);

struct ScenarioClip {
  std::string id;
  Family family = Family::kStraight;
  std::uint64_t rng_seed = 0;
  MapModel map;
  std::vector<AgentTrack> agents;
  std::vector<Frame> frames;

  int last_scripted_tick() const;
};

struct Dataset {
  std::vector<ScenarioClip> clips;
};

// ---------------------------------------------------------------------------
// Generation

struct FamilyConfig {
  int count = 0;
  double speed_min = 5.0;  // logged-ego and agent cruise speeds, m/s
  double speed_max = 11.0;
};

struct GeneratorConfig {
  int frames_per_clip = 4;
  double lane_width_min = 3.4;
  double lane_width_max = 3.9;
  double route_length_min = 100.0;
  double route_length_max = 140.0;
  double curve_radius_min = 30.0;
  double curve_radius_max = 60.0;
  double lead_gap_min = 14.0;
  double lead_gap_max = 26.0;
  /// Total scripted agent coverage; 0 means "clip span plus horizon".
  double track_seconds = 0.0;
  EgoParams ego;
  FamilyConfig straight;
  FamilyConfig curve;
  FamilyConfig intersection_light;
  FamilyConfig lead_brake;
  FamilyConfig oncoming_overtake;
  FamilyConfig parked_obstruction;

  FamilyConfig& family(Family f);
  const FamilyConfig& family(Family f) const;
};

/// Deterministic per (config, seed); clips are seeded independently so
/// generation may be distributed without changing the output.
Dataset generate_dataset(const GeneratorConfig& config, std::uint64_t seed);

/// Validates every clip invariant; returns an explanation or empty string.
std::string check_clip(const ScenarioClip& clip, const EgoParams& params);

// ---------------------------------------------------------------------------
// Persistence: line-delimited JSON, one clip per line, schema_version 1.

/// The canonical byte form written by save_dataset; the dataset identity
/// hash is computed over these bytes.
std::string serialize_dataset(const Dataset& dataset);

void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

GeneratorConfig load_generator_config(const std::string& path);
void save_generator_config(const GeneratorConfig& config,
                           const std::string& path);

}  // namespace epo::world
