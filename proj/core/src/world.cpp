#include "epo/world.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "epo/common.hpp"

namespace epo::world {

EgoState step_ego(const EgoState& state, const Control& control, double dt,
                  const EgoParams& params) {
  if (dt <= 0.0) throw ConfigError("step_ego requires dt > 0");
  const double accel = std::clamp(control.accel, -params.max_brake, params.max_accel);
  const double steer = std::clamp(control.steer, -params.max_steer, params.max_steer);

  EgoState next;
  const geom::Vec2 advance = state.pose.forward() * (state.speed * dt);
  const double heading_rate = state.speed / params.wheelbase * std::tan(steer);
  next.pose = geom::Pose2(state.pose.x + advance.x, state.pose.y + advance.y,
                          state.pose.heading + heading_rate * dt);
  next.speed = std::max(0.0, state.speed + accel * dt);
  return next;
}

std::vector<Control> trajectory_to_controls(const traj::Trajectory& t,
                                            const EgoState& /*state*/,
                                            const EgoParams& params,
                                            int k_steps) {
  if (k_steps < 1 || k_steps >= traj::kWaypointCount) {
    throw ConfigError("trajectory_to_controls: k_steps out of range");
  }
  const auto v = traj::waypoint_speeds(t);
  std::vector<Control> controls(static_cast<std::size_t>(k_steps));
  for (int i = 0; i < k_steps; ++i) {
    const double accel = (v[i + 1] - v[i]) / traj::kTickSeconds;
    const double heading_rate =
        geom::wrap_angle(t.waypoints[i + 1].heading - t.waypoints[i].heading) /
        traj::kTickSeconds;
    const double speed = std::max(v[i], 0.1);
    const double steer = std::atan(params.wheelbase * heading_rate / speed);
    controls[i].accel = std::clamp(accel, -params.max_brake, params.max_accel);
    controls[i].steer = std::clamp(steer, -params.max_steer, params.max_steer);
  }
  return controls;
}

const AgentState& AgentTrack::at_tick(int tick) const {
  const int last = static_cast<int>(states.size()) - 1;
  const int k = std::clamp(tick, 0, last);
  return states[static_cast<std::size_t>(k)];
}

geom::OrientedBox AgentTrack::box_at(int tick) const {
  return {at_tick(tick).pose, half_length, half_width};
}

const char* family_name(Family f) {
  switch (f) {
    case Family::kStraight: return "straight";
    case Family::kCurve: return "curve";
    case Family::kIntersectionLight: return "intersection_light";
    case Family::kLeadBrake: return "lead_brake";
    case Family::kOncomingOvertake: return "oncoming_overtake";
    case Family::kParkedObstruction: return "parked_obstruction";
  }
  return "unknown";
}

std::optional<Family> family_from_name(const std::string& name) {
  for (Family f : {Family::kStraight, Family::kCurve, Family::kIntersectionLight,
                   Family::kLeadBrake, Family::kOncomingOvertake,
                   Family::kParkedObstruction}) {
    if (name == family_name(f)) return f;
  }
  return std::nullopt;
}

int ScenarioClip::last_scripted_tick() const {
  int last = 0;
  for (const auto& agent : agents) {
    last = std::max(last, static_cast<int>(agent.states.size()) - 1);
  }
  return last;
}

FamilyConfig& GeneratorConfig::family(Family f) {
  switch (f) {
    case Family::kStraight: return straight;
    case Family::kCurve: return curve;
    case Family::kIntersectionLight: return intersection_light;
    case Family::kLeadBrake: return lead_brake;
    case Family::kOncomingOvertake: return oncoming_overtake;
    case Family::kParkedObstruction: return parked_obstruction;
  }
  return straight;
}

const FamilyConfig& GeneratorConfig::family(Family f) const {
  return const_cast<GeneratorConfig*>(this)->family(f);
}

std::string check_clip(const ScenarioClip& clip, const EgoParams& params) {
  std::ostringstream os;
  if (clip.frames.size() < 2) {
    return "clip has fewer than 2 frames";
  }
  for (const auto& lane : clip.map.lanes) {
    if (lane.width <= 2.0 * params.half_width) {
      os << "lane width " << lane.width << " does not fit the vehicle";
      return os.str();
    }
  }
  for (const geom::Vec2& p : clip.map.route.points()) {
    if (!clip.map.drivable.contains(p)) {
      os << "route vertex (" << p.x << ", " << p.y << ") leaves the drivable area";
      return os.str();
    }
  }
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    const Frame& f = clip.frames[i];
    if (!clip.map.drivable.contains(f.ego_pose.position())) {
      os << "frame " << i << ": ego pose outside drivable area";
      return os.str();
    }
    if (i > 0) {
      const double dt = f.timestamp - clip.frames[i - 1].timestamp;
      if (std::abs(dt - kReplanSeconds) > 1e-9) {
        os << "frame " << i << ": timestamp step " << dt
           << " != replan interval " << kReplanSeconds;
        return os.str();
      }
    }
  }
  for (std::size_t a = 0; a < clip.agents.size(); ++a) {
    const auto& track = clip.agents[a];
    if (track.states.empty()) {
      os << "agent " << a << " has an empty track";
      return os.str();
    }
    for (std::size_t k = 1; k < track.states.size(); ++k) {
      const double step = (track.states[k].pose.position() -
                           track.states[k - 1].pose.position())
                              .norm();
      const double bound = track.states[k - 1].speed * 0.1 + 0.5;
      if (step > bound) {
        os << "agent " << a << " tick " << k << ": displacement " << step
           << " exceeds kinematic bound " << bound;
        return os.str();
      }
    }
  }
  return {};
}

}  // namespace epo::world
