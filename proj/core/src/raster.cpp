#include <algorithm>
#include <cmath>

#include "epo/model.hpp"

namespace epo::model {

namespace {
constexpr double kCell = kRasterMeters / kRasterSize;  // 1 m
constexpr double kRouteHalfWidth = 1.0;
constexpr double kStopLineHalfWidth = 0.5;
constexpr double kStopLineHalfSpan = 2.5;  // along the line, perpendicular to route
}  // namespace

geom::Vec2 raster_cell_center(int row, int col) {
  // Grid covers x in [forward - 32, forward + 32), y in [-32, 32) around the
  // ego; rows advance along +x, columns along +y.
  const double x0 = kRasterForward - kRasterMeters / 2;
  const double y0 = -kRasterMeters / 2;
  return {x0 + (row + 0.5) * kCell, y0 + (col + 0.5) * kCell};
}

RasterScene rasterize(const world::ScenarioClip& clip, int frame_index) {
  const world::Frame& frame =
      clip.frames.at(static_cast<std::size_t>(frame_index));
  const world::MapModel& map = clip.map;
  RasterScene scene;

  const float speed_cell = static_cast<float>(
      std::clamp(frame.ego_speed / kSpeedNorm, 0.0, 1.0));

  // Red-stop-line segments active at the frame time, in world coordinates.
  std::vector<std::pair<geom::Vec2, geom::Vec2>> red_lines;
  for (const auto& line : map.stop_lines) {
    if (!line.red_at(frame.timestamp)) continue;
    const geom::Vec2 p = map.route.point_at(line.route_s);
    const double h = map.route.heading_at(line.route_s);
    const geom::Vec2 left{-std::sin(h), std::cos(h)};
    red_lines.emplace_back(p + left * kStopLineHalfSpan,
                           p - left * kStopLineHalfSpan);
  }

  for (int row = 0; row < kRasterSize; ++row) {
    for (int col = 0; col < kRasterSize; ++col) {
      const geom::Vec2 world_pt =
          frame.ego_pose.transform_point(raster_cell_center(row, col));

      if (map.drivable.contains(world_pt)) scene.at(0, row, col) = 1.0f;
      if (map.route.distance(world_pt) <= kRouteHalfWidth) {
        scene.at(1, row, col) = 1.0f;
      }
      for (const auto& agent : clip.agents) {
        const auto now = agent.box_at(frame.tick);
        const geom::Vec2 local_now =
            now.center.inverse_transform_point(world_pt);
        if (std::abs(local_now.x) <= now.half_length &&
            std::abs(local_now.y) <= now.half_width) {
          scene.at(2, row, col) = 1.0f;
        }
        // Constant-velocity position one second ahead.
        const world::AgentState& st = agent.at_tick(frame.tick);
        const geom::Vec2 adv = st.pose.forward() * st.speed;
        const geom::Pose2 future(st.pose.x + adv.x, st.pose.y + adv.y,
                                 st.pose.heading);
        const geom::Vec2 local_future = future.inverse_transform_point(world_pt);
        if (std::abs(local_future.x) <= agent.half_length &&
            std::abs(local_future.y) <= agent.half_width) {
          scene.at(3, row, col) = 1.0f;
        }
      }
      for (const auto& [a, b] : red_lines) {
        if (geom::point_segment_distance(world_pt, a, b) <= kStopLineHalfWidth) {
          scene.at(4, row, col) = 1.0f;
        }
      }
      scene.at(5, row, col) = speed_cell;
    }
  }
  return scene;
}

std::array<double, kDescriptorDim> tokenize_trajectory(const traj::Trajectory& t) {
  std::array<double, kDescriptorDim> out{};
  int f = 0;
  for (int k = 4; k < traj::kWaypointCount; k += 5) {
    const geom::Pose2& wp = t.waypoints[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(f++)] = wp.x / 32.0;
    out[static_cast<std::size_t>(f++)] = wp.y / 32.0;
    out[static_cast<std::size_t>(f++)] = std::cos(wp.heading);
    out[static_cast<std::size_t>(f++)] = std::sin(wp.heading);
  }
  return out;
}

}  // namespace epo::model
