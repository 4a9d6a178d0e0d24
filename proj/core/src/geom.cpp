#include "epo/geom.hpp"

#include <algorithm>
#include <limits>

#include "epo/common.hpp"

namespace epo::geom {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kBoundaryEps = 1e-9;
}  // namespace

double wrap_angle(double a) {
  if (a > -kPi && a <= kPi) return a;
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

std::array<Vec2, 4> OrientedBox::corners() const {
  const double hl = half_length, hw = half_width;
  return {center.transform_point({hl, hw}), center.transform_point({-hl, hw}),
          center.transform_point({-hl, -hw}), center.transform_point({hl, -hw})};
}

namespace {

// Projects both corner sets onto `axis` and reports whether the intervals are
// disjoint (strictly separated; touching intervals are not).
bool axis_separates(Vec2 axis, const std::array<Vec2, 4>& a,
                    const std::array<Vec2, 4>& b) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (const Vec2& c : a) {
    const double t = axis.dot(c);
    amin = std::min(amin, t);
    amax = std::max(amax, t);
  }
  for (const Vec2& c : b) {
    const double t = axis.dot(c);
    bmin = std::min(bmin, t);
    bmax = std::max(bmax, t);
  }
  return amax < bmin || bmax < amin;
}

}  // namespace

bool boxes_intersect(const OrientedBox& a, const OrientedBox& b) {
  // Cheap circumscribed-circle reject before the axis tests.
  const double ra = std::hypot(a.half_length, a.half_width);
  const double rb = std::hypot(b.half_length, b.half_width);
  const Vec2 d = b.center.position() - a.center.position();
  const double rr = ra + rb;
  if (d.squared_norm() > rr * rr) return false;

  const auto ca = a.corners();
  const auto cb = b.corners();
  const Vec2 fa = a.center.forward();
  const Vec2 fb = b.center.forward();
  const std::array<Vec2, 4> axes = {fa, Vec2{-fa.y, fa.x}, fb, Vec2{-fb.y, fb.x}};
  for (const Vec2& axis : axes) {
    if (axis_separates(axis, ca, cb)) return false;
  }
  return true;
}

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw ConfigError("polyline needs at least 2 points");
  cumulative_.resize(points_.size());
  cumulative_[0] = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    cumulative_[i] = cumulative_[i - 1] + (points_[i] - points_[i - 1]).norm();
  }
}

Vec2 Polyline::point_at(double s) const {
  s = std::clamp(s, 0.0, length());
  const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t i = static_cast<std::size_t>(it - cumulative_.begin());
  if (i == 0) return points_.front();
  if (i >= points_.size()) return points_.back();
  const double seg = cumulative_[i] - cumulative_[i - 1];
  if (seg <= 0.0) return points_[i];
  const double t = (s - cumulative_[i - 1]) / seg;
  return points_[i - 1] + (points_[i] - points_[i - 1]) * t;
}

double Polyline::heading_at(double s) const {
  s = std::clamp(s, 0.0, length());
  std::size_t i = 1;
  while (i + 1 < points_.size() && cumulative_[i] < s) ++i;
  const Vec2 d = points_[i] - points_[i - 1];
  return std::atan2(d.y, d.x);
}

PolylineProjection Polyline::project(Vec2 p) const {
  PolylineProjection best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Vec2 a = points_[i];
    const Vec2 b = points_[i + 1];
    const Vec2 ab = b - a;
    const double len2 = ab.squared_norm();
    if (len2 <= 0.0) continue;
    const double seg_len = cumulative_[i + 1] - cumulative_[i];
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    const Vec2 foot = a + ab * t;
    const double d2 = (p - foot).squared_norm();
    // Strict comparison: on ties the earlier segment (smaller s) wins.
    if (d2 < best_d2) {
      best_d2 = d2;
      const Vec2 tangent = ab * (1.0 / std::sqrt(len2));
      best.s = cumulative_[i] + t * seg_len;
      best.lateral = tangent.cross(p - foot);
      best.tangent_heading = std::atan2(ab.y, ab.x);
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

double Polyline::distance(Vec2 p) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    best = std::min(best, point_segment_distance(p, points_[i], points_[i + 1]));
  }
  return best;
}

Polygon::Polygon(std::vector<Vec2> ring) : ring_(std::move(ring)) {
  if (ring_.size() < 3) throw ConfigError("polygon ring needs at least 3 points");
  if (signed_area() <= 0.0) {
    throw ConfigError("polygon ring must be counter-clockwise");
  }
}

double Polygon::signed_area() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < ring_.size(); ++i) {
    const Vec2 a = ring_[i];
    const Vec2 b = ring_[(i + 1) % ring_.size()];
    acc += a.cross(b);
  }
  return 0.5 * acc;
}

bool Polygon::contains(Vec2 p) const {
  const std::size_t n = ring_.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = ring_[i];
    const Vec2 b = ring_[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < x_cross) inside = !inside;
    }
  }
  if (inside) return true;
  // Boundary points count as inside; the crossing test does not decide them
  // consistently, so points it rejects get a proximity pass.
  for (std::size_t i = 0; i < n; ++i) {
    if (point_segment_distance(p, ring_[i], ring_[(i + 1) % n]) <= kBoundaryEps) {
      return true;
    }
  }
  return false;
}

bool Polygon::is_simple() const {
  const std::size_t n = ring_.size();
  auto segments_cross = [](Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    const double d1 = (b - a).cross(c - a);
    const double d2 = (b - a).cross(d - a);
    const double d3 = (d - c).cross(a - c);
    const double d4 = (d - c).cross(b - c);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Adjacent edges share an endpoint and never "cross" strictly.
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_cross(ring_[i], ring_[(i + 1) % n], ring_[j],
                         ring_[(j + 1) % n])) {
        return false;
      }
    }
  }
  return true;
}

bool point_in_polygon(Vec2 p, const Polygon& poly) { return poly.contains(p); }

PolylineProjection project_to_polyline(Vec2 p, const Polyline& line) {
  return line.project(p);
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squared_norm();
  if (len2 <= 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

}  // namespace epo::geom
