#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "epo/common.hpp"
#include "epo/world.hpp"

namespace epo::world {

namespace {

constexpr double kTick = 0.1;
constexpr double kCenterlineStep = 2.0;  // m between road sample points

struct RoadBuild {
  geom::Polyline centerline;
  std::vector<double> headings;  // per centerline point
};

RoadBuild straight_road(double length) {
  RoadBuild road;
  std::vector<geom::Vec2> pts;
  const int n = static_cast<int>(std::ceil(length / kCenterlineStep));
  for (int i = 0; i <= n; ++i) {
    const double s = std::min(length, i * kCenterlineStep);
    pts.push_back({s, 0.0});
    road.headings.push_back(0.0);
  }
  road.centerline = geom::Polyline(std::move(pts));
  return road;
}

RoadBuild arc_road(double radius, double arc_length, int turn_sign) {
  RoadBuild road;
  std::vector<geom::Vec2> pts;
  const int n = static_cast<int>(std::ceil(arc_length / kCenterlineStep));
  for (int i = 0; i <= n; ++i) {
    const double s = std::min(arc_length, i * kCenterlineStep);
    const double phi = s / radius;
    pts.push_back({radius * std::sin(phi),
                   turn_sign * radius * (1.0 - std::cos(phi))});
    road.headings.push_back(turn_sign * phi);
  }
  road.centerline = geom::Polyline(std::move(pts));
  return road;
}

geom::Polygon band_polygon(const RoadBuild& road, double right_extent,
                           double left_extent) {
  const auto& pts = road.centerline.points();
  std::vector<geom::Vec2> ring;
  ring.reserve(2 * pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double h = road.headings[i];
    const geom::Vec2 left_normal{-std::sin(h), std::cos(h)};
    ring.push_back(pts[i] - left_normal * right_extent);
  }
  for (std::size_t i = pts.size(); i-- > 0;) {
    const double h = road.headings[i];
    const geom::Vec2 left_normal{-std::sin(h), std::cos(h)};
    ring.push_back(pts[i] + left_normal * left_extent);
  }
  return geom::Polygon(std::move(ring));
}

/// Pose on the route at arc length s, offset laterally (positive left).
geom::Pose2 route_pose(const geom::Polyline& route, double s, double lateral,
                       bool reversed = false) {
  const geom::Vec2 p = route.point_at(s);
  const double h = route.heading_at(s);
  const geom::Vec2 left_normal{-std::sin(h), std::cos(h)};
  const geom::Vec2 q = p + left_normal * lateral;
  return geom::Pose2(q.x, q.y, reversed ? h + 3.141592653589793 : h);
}

/// Integrates a speed profile into an agent track that follows the route at a
/// fixed lateral offset.
AgentTrack track_along_route(const geom::Polyline& route, double start_s,
                             double lateral,
                             const std::function<double(double)>& speed_at,
                             int ticks, bool reversed, double half_length,
                             double half_width) {
  AgentTrack track;
  track.half_length = half_length;
  track.half_width = half_width;
  track.states.reserve(static_cast<std::size_t>(ticks) + 1);
  double s = start_s;
  for (int k = 0; k <= ticks; ++k) {
    const double t = k * kTick;
    const double v = std::max(0.0, speed_at(t));
    track.states.push_back({route_pose(route, s, lateral, reversed), v});
    s += (reversed ? -v : v) * kTick;
    s = std::clamp(s, 0.0, route.length());
  }
  return track;
}

struct EgoProfile {
  std::function<double(double)> speed_at;
  double start_s = 5.0;
};

std::vector<Frame> build_frames(const geom::Polyline& route,
                                const EgoProfile& ego, int frames) {
  std::vector<Frame> out;
  out.reserve(static_cast<std::size_t>(frames));
  // Integrate the logged ego at tick resolution so frame poses line up with
  // what an agent following the same profile would do.
  std::vector<double> s_at_tick;
  double s = ego.start_s;
  const int total_ticks = (frames - 1) * kReplanTicks;
  for (int k = 0; k <= total_ticks; ++k) {
    s_at_tick.push_back(s);
    s += std::max(0.0, ego.speed_at(k * kTick)) * kTick;
  }
  for (int f = 0; f < frames; ++f) {
    const int tick = f * kReplanTicks;
    const double t = tick * kTick;
    Frame frame;
    frame.timestamp = t;
    frame.tick = tick;
    frame.ego_pose = route_pose(route, s_at_tick[static_cast<std::size_t>(tick)], 0.0);
    frame.ego_speed = std::max(0.0, ego.speed_at(t));
    frame.ego_accel =
        (std::max(0.0, ego.speed_at(t + kTick)) - frame.ego_speed) / kTick;
    out.push_back(frame);
  }
  return out;
}

int scripted_ticks(const GeneratorConfig& config) {
  const int span = (config.frames_per_clip - 1) * kReplanTicks;
  const int needed = span + traj::kWaypointCount + 1;
  const int requested = static_cast<int>(std::ceil(config.track_seconds / kTick));
  return std::max(needed, requested);
}

ScenarioClip generate_clip(const GeneratorConfig& config, Family family,
                           std::uint64_t clip_seed, int global_index) {
  Rng rng(clip_seed);
  const FamilyConfig& fam = config.family(family);
  const double lane_width = rng.uniform(config.lane_width_min, config.lane_width_max);
  const double route_length =
      rng.uniform(config.route_length_min, config.route_length_max);
  const double cruise = rng.uniform(fam.speed_min, fam.speed_max);
  const int ticks = scripted_ticks(config);

  ScenarioClip clip;
  clip.family = family;
  clip.rng_seed = clip_seed;
  {
    std::ostringstream os;
    os << family_name(family) << "-" << global_index;
    clip.id = os.str();
  }

  RoadBuild road;
  double margin_left = 0.6;
  const double margin_right = 0.6;
  EgoProfile ego{[cruise](double) { return cruise; }, 5.0};

  switch (family) {
    case Family::kStraight: {
      road = straight_road(route_length);
      break;
    }
    case Family::kCurve: {
      const double radius = rng.uniform(config.curve_radius_min, config.curve_radius_max);
      const int turn = rng.uniform01() < 0.5 ? 1 : -1;
      road = arc_road(radius, route_length, turn);
      // Keep the logged speed lateral-comfortable on the arc.
      const double v = std::min(cruise, 0.85 * std::sqrt(4.89 * radius));
      ego.speed_at = [v](double) { return v; };
      break;
    }
    case Family::kIntersectionLight: {
      road = straight_road(route_length);
      break;
    }
    case Family::kLeadBrake: {
      road = straight_road(route_length);
      break;
    }
    case Family::kOncomingOvertake: {
      road = straight_road(route_length);
      margin_left = lane_width;  // room to pass on the left
      const double v = std::max(2.0, cruise - 3.0);
      ego.speed_at = [cruise, v](double t) {
        return std::max(v, cruise - 1.5 * t);
      };
      break;
    }
    case Family::kParkedObstruction: {
      road = straight_road(route_length);
      margin_left = 0.8 * lane_width;
      break;
    }
  }

  clip.map.lanes.push_back({road.centerline, lane_width});
  clip.map.route = road.centerline;
  clip.map.drivable =
      band_polygon(road, lane_width / 2 + margin_right, lane_width / 2 + margin_left);

  const geom::Polyline& route = clip.map.route;

  switch (family) {
    case Family::kStraight:
    case Family::kCurve:
      break;
    case Family::kIntersectionLight: {
      StopLine line;
      line.route_s = ego.start_s + rng.uniform(22.0, 38.0);
      const double red_until = rng.uniform(3.0, 8.0);
      line.red_intervals.push_back({0.0, red_until});
      clip.map.stop_lines.push_back(line);
      // Logged ego brakes to hold 3 m short of the line.
      const double stop_distance = line.route_s - 3.0 - ego.start_s;
      const double v0 =
          std::min(cruise, std::sqrt(2.0 * 0.7 * config.ego.max_brake * stop_distance));
      const double decel = v0 * v0 / (2.0 * stop_distance);
      ego.speed_at = [v0, decel](double t) { return v0 - decel * t; };
      break;
    }
    case Family::kLeadBrake: {
      const double gap = rng.uniform(config.lead_gap_min, config.lead_gap_max);
      const double brake_start = rng.uniform(0.2, 0.8);
      const double brake_rate = rng.uniform(2.8, 4.0);
      clip.agents.push_back(track_along_route(
          route, ego.start_s + gap, 0.0,
          [cruise, brake_start, brake_rate](double t) {
            return cruise - brake_rate * std::max(0.0, t - brake_start);
          },
          ticks, false, rng.uniform(2.1, 2.5), rng.uniform(0.9, 1.05)));
      ego.speed_at = [cruise, brake_start](double t) {
        return cruise - 2.0 * std::max(0.0, t - brake_start - 0.3);
      };
      break;
    }
    case Family::kOncomingOvertake: {
      const double parked_s = ego.start_s + rng.uniform(17.0, 27.0);
      AgentTrack parked = track_along_route(
          route, parked_s, 0.0, [](double) { return 0.0; }, ticks, false,
          rng.uniform(2.1, 2.5), rng.uniform(0.9, 1.05));
      clip.agents.push_back(std::move(parked));
      const double oncoming_s = ego.start_s + rng.uniform(50.0, 70.0);
      const double oncoming_v = rng.uniform(4.0, 8.0);
      clip.agents.push_back(track_along_route(
          route, oncoming_s, 0.8 * lane_width,
          [oncoming_v](double) { return oncoming_v; }, ticks, true,
          rng.uniform(2.1, 2.5), rng.uniform(0.9, 1.05)));
      break;
    }
    case Family::kParkedObstruction: {
      const double parked_s = ego.start_s + rng.uniform(15.0, 30.0);
      const double offset = rng.uniform(0.25, 0.45) * lane_width;
      clip.agents.push_back(track_along_route(
          route, parked_s, -offset, [](double) { return 0.0; }, ticks, false,
          rng.uniform(2.1, 2.5), rng.uniform(0.9, 1.05)));
      break;
    }
  }

  clip.frames = build_frames(route, ego, config.frames_per_clip);

  const std::string problem = check_clip(clip, config.ego);
  if (!problem.empty()) {
    std::ostringstream os;
    os << "generator config cannot realize family '" << family_name(family)
       << "': " << problem;
    throw ConfigError(os.str());
  }
  return clip;
}

}  // namespace

Dataset generate_dataset(const GeneratorConfig& config, std::uint64_t seed) {
  if (config.frames_per_clip < 2) {
    throw ConfigError("frames_per_clip must be at least 2");
  }
  if (config.lane_width_min > config.lane_width_max ||
      config.lane_width_min <= 0.0) {
    throw ConfigError("invalid lane width range");
  }
  Dataset dataset;
  int global_index = 0;
  for (Family family :
       {Family::kStraight, Family::kCurve, Family::kIntersectionLight,
        Family::kLeadBrake, Family::kOncomingOvertake,
        Family::kParkedObstruction}) {
    const int count = config.family(family).count;
    for (int i = 0; i < count; ++i, ++global_index) {
      const std::uint64_t clip_seed =
          split_seed(seed, static_cast<std::uint64_t>(global_index));
      dataset.clips.push_back(
          generate_clip(config, family, clip_seed, global_index));
    }
  }
  return dataset;
}

}  // namespace epo::world
