#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace epo::geom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Planar pose; heading is kept in (-pi, pi] by every constructor and
/// composition.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Pose2() = default;
  Pose2(double x_in, double y_in, double heading_in)
      : x(x_in), y(y_in), heading(wrap_angle(heading_in)) {}

  Vec2 position() const { return {x, y}; }
  Vec2 forward() const { return {std::cos(heading), std::sin(heading)}; }

  /// Maps a point from this pose's local frame into the parent frame.
  Vec2 transform_point(Vec2 local) const {
    const double c = std::cos(heading), s = std::sin(heading);
    return {x + c * local.x - s * local.y, y + s * local.x + c * local.y};
  }

  /// Maps a point from the parent frame into this pose's local frame.
  Vec2 inverse_transform_point(Vec2 world) const {
    const double c = std::cos(heading), s = std::sin(heading);
    const double dx = world.x - x, dy = world.y - y;
    return {c * dx + s * dy, -s * dx + c * dy};
  }

  /// this ∘ local: interprets `local` in this pose's frame.
  Pose2 compose(const Pose2& local) const {
    const Vec2 p = transform_point({local.x, local.y});
    return Pose2(p.x, p.y, heading + local.heading);
  }
};

/// Axis-aligned-in-its-own-frame rectangle, used for vehicle footprints.
struct OrientedBox {
  Pose2 center;
  double half_length = 0.0;
  double half_width = 0.0;

  /// Corners in counter-clockwise order, starting front-left.
  std::array<Vec2, 4> corners() const;
  double area() const { return 4.0 * half_length * half_width; }
};

/// True iff the two rectangles overlap or touch (separating-axis test).
bool boxes_intersect(const OrientedBox& a, const OrientedBox& b);

struct PolylineProjection {
  double s = 0.0;              // arc length of the closest point
  double lateral = 0.0;        // signed, positive left of travel direction
  double tangent_heading = 0.0;
  double distance = 0.0;       // unsigned distance to the closest point
};

/// Ordered point chain with precomputed cumulative arc length.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points);

  const std::vector<Vec2>& points() const { return points_; }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

  /// Point at arc length s, clamped to [0, length()].
  Vec2 point_at(double s) const;
  /// Tangent heading at arc length s (heading of the containing segment).
  double heading_at(double s) const;

  /// Closest-point projection. Ties across segments resolve to the smallest
  /// arc length.
  PolylineProjection project(Vec2 p) const;

  /// Unsigned distance from p to the polyline.
  double distance(Vec2 p) const;

 private:
  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
};

/// Simple counter-clockwise polygon. Boundary points count as inside.
class Polygon {
 public:
  Polygon() = default;
  explicit Polygon(std::vector<Vec2> ring);

  const std::vector<Vec2>& ring() const { return ring_; }
  double signed_area() const;
  bool contains(Vec2 p) const;

  /// O(n^2) self-intersection scan, used by validators and tests.
  bool is_simple() const;

 private:
  std::vector<Vec2> ring_;
};

bool point_in_polygon(Vec2 p, const Polygon& poly);
PolylineProjection project_to_polyline(Vec2 p, const Polyline& line);

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

}  // namespace epo::geom
