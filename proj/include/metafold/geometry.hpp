#pragma once

// Point-cloud and planar geometry primitives shared by the metrics, the fold
// planner and contact synthesis. Everything here is a pure function.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "metafold/error.hpp"

namespace metafold {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// N x 3 snapshot of the garment, meters. `id` orders frames within an episode.
struct PointCloudFrame {
  std::vector<Vec3> points;
  std::uint64_t id = 0;

  std::size_t size() const { return points.size(); }
  const Vec3& operator[](std::size_t i) const { return points[i]; }
};

/// Per-point displacement between two index-corresponded frames.
struct FlowField {
  std::vector<Vec3> displacements;
  std::uint64_t source_id = 0;
  std::uint64_t target_id = 0;

  std::size_t size() const { return displacements.size(); }
};

inline Vec2 ground(const Vec3& p) { return {p.x(), p.y()}; }

inline std::vector<Vec2> ground_projection(std::span<const Vec3> points) {
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(ground(p));
  return out;
}

inline Vec3 centroid(std::span<const Vec3> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "centroid of empty set");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points) sum += p;
  return sum / static_cast<double>(points.size());
}

/// Farthest point sampling. The first pick is the point nearest the centroid;
/// every later pick maximizes the distance to the already chosen set. Ties go
/// to the lowest index, so `seed` never changes the result; it is kept in the
/// signature so callers can record it alongside dataset settings.
inline std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points, std::size_t k,
                                                      std::uint64_t seed = 0) {
  (void)seed;
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "farthest_point_sample on empty cloud");
  if (k < 1 || k > points.size()) {
    throw Error(ErrorCode::BadK, "k=" + std::to_string(k) + " outside [1, " +
                                     std::to_string(points.size()) + "]");
  }
  const Vec3 c = centroid(points);
  std::size_t first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (points[i] - c).squaredNorm();
    if (d < best) {
      best = d;
      first = i;
    }
  }

  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  chosen.push_back(first);
  std::vector<double> min_dist(points.size(), std::numeric_limits<double>::infinity());
  std::vector<char> taken(points.size(), 0);
  taken[first] = 1;
  std::size_t last = first;
  while (chosen.size() < k) {
    std::size_t arg = points.size();
    double arg_val = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (taken[i]) continue;
      const double d = (points[i] - points[last]).squaredNorm();
      if (d < min_dist[i]) min_dist[i] = d;
      if (min_dist[i] > arg_val) {
        arg_val = min_dist[i];
        arg = i;
      }
    }
    taken[arg] = 1;
    chosen.push_back(arg);
    last = arg;
  }
  return chosen;
}

enum class HullKind { Empty, Point, Segment, Polygon };

struct Hull2 {
  HullKind kind = HullKind::Empty;
  /// Counter-clockwise, no repeated or collinear vertices. For a Segment the
  /// two endpoints, for a Point the single location.
  std::vector<Vec2> vertices;

  bool degenerate() const { return kind != HullKind::Polygon; }
};

inline double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

/// Andrew's monotone chain.
inline Hull2 convex_hull_2d(std::span<const Vec2> input) {
  Hull2 hull;
  if (input.empty()) return hull;
  std::vector<Vec2> pts(input.begin(), input.end());
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a == b; }),
            pts.end());
  if (pts.size() == 1) {
    hull.kind = HullKind::Point;
    hull.vertices = pts;
    return hull;
  }

  // Collinearity tolerance scales with the extent of the input.
  double extent = 0.0;
  for (const auto& p : pts) extent = std::max(extent, (p - pts.front()).norm());
  const double tol = 1e-12 * extent * extent;

  std::vector<Vec2> h(2 * pts.size());
  std::size_t n = 0;
  for (const auto& p : pts) {
    while (n >= 2 && cross2(h[n - 2], h[n - 1], p) <= tol) --n;
    h[n++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = n + 1; i-- > 0;) {
    const auto& p = pts[i];
    while (n >= lower && cross2(h[n - 2], h[n - 1], p) <= tol) --n;
    h[n++] = p;
  }
  h.resize(n - 1);
  if (h.size() < 3) {
    hull.kind = HullKind::Segment;
    hull.vertices = {pts.front(), pts.back()};
    return hull;
  }
  hull.kind = HullKind::Polygon;
  hull.vertices = std::move(h);
  return hull;
}

inline double polygon_area(std::span<const Vec2> poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

struct OrientedRect {
  double area = 0.0;
  /// Direction of the first side, radians in [0, pi/2).
  double angle = 0.0;
  /// Side lengths along `angle` and perpendicular to it.
  Vec2 extents = Vec2::Zero();
  Vec2 center = Vec2::Zero();
};

/// Minimum-area enclosing rectangle of a convex polygon by rotating calipers.
/// One side of the optimum is flush with a hull edge; edges are visited in
/// order and the first minimum wins.
inline OrientedRect min_area_rect(const Hull2& hull) {
  if (hull.degenerate()) throw Error(ErrorCode::Degenerate, "min_area_rect needs a polygon hull");
  const auto& v = hull.vertices;
  const std::size_t n = v.size();
  auto next = [n](std::size_t i) { return (i + 1) % n; };

  auto edge_dir = [&](std::size_t i) -> Vec2 { return (v[next(i)] - v[i]).normalized(); };

  Vec2 u = edge_dir(0);
  Vec2 w(-u.y(), u.x());
  std::size_t right = 0, top = 0, left = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (u.dot(v[i]) > u.dot(v[right])) right = i;
    if (w.dot(v[i]) > w.dot(v[top])) top = i;
    if (u.dot(v[i]) < u.dot(v[left])) left = i;
  }

  OrientedRect best;
  best.area = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < n; ++e) {
    u = edge_dir(e);
    w = Vec2(-u.y(), u.x());
    // Supporting points only ever move forward around a convex polygon.
    for (std::size_t s = 0; s < n && u.dot(v[next(right)]) >= u.dot(v[right]); ++s) right = next(right);
    for (std::size_t s = 0; s < n && w.dot(v[next(top)]) >= w.dot(v[top]); ++s) top = next(top);
    for (std::size_t s = 0; s < n && u.dot(v[next(left)]) <= u.dot(v[left]); ++s) left = next(left);

    const double lo_u = u.dot(v[left]);
    const double hi_u = u.dot(v[right]);
    const double lo_w = w.dot(v[e]);
    const double hi_w = w.dot(v[top]);
    const double width = hi_u - lo_u;
    const double height = hi_w - lo_w;
    const double area = width * height;
    if (area < best.area) {
      best.area = area;
      best.center = u * (0.5 * (lo_u + hi_u)) + w * (0.5 * (lo_w + hi_w));
      // Fold the edge direction into [0, pi/2); an odd quarter turn swaps the sides.
      const double quarter = std::numbers::pi / 2;
      const double raw = std::atan2(u.y(), u.x());
      const double turns = std::floor(raw / quarter);
      best.angle = std::clamp(raw - turns * quarter, 0.0, std::nextafter(quarter, 0.0));
      const bool odd = static_cast<long long>(turns) % 2 != 0;
      best.extents = odd ? Vec2(height, width) : Vec2(width, height);
    }
  }
  return best;
}

inline OrientedRect min_area_rect(std::span<const Vec2> points) {
  return min_area_rect(convex_hull_2d(points));
}

/// Symmetric Chamfer distance: mean nearest-neighbour distance from a to b and
/// from b to a, averaged.
inline double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "chamfer_distance on empty cloud");
  auto one_way = [](std::span<const Vec3> from, std::span<const Vec3> to) {
    double sum = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).squaredNorm());
      sum += std::sqrt(best);
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

inline double chamfer_distance(const PointCloudFrame& a, const PointCloudFrame& b) {
  return chamfer_distance(std::span<const Vec3>(a.points), std::span<const Vec3>(b.points));
}

inline FlowField compute_flow(const PointCloudFrame& from, const PointCloudFrame& to) {
  if (from.size() != to.size()) {
    throw Error(ErrorCode::SizeMismatch, "flow between frames of " + std::to_string(from.size()) +
                                             " and " + std::to_string(to.size()) + " points");
  }
  FlowField flow;
  flow.source_id = from.id;
  flow.target_id = to.id;
  flow.displacements.resize(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) flow.displacements[i] = to.points[i] - from.points[i];
  return flow;
}

/// Rotation about the vertical axis through the origin.
inline Vec3 rotate_z(const Vec3& p, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * p.x() - s * p.y(), s * p.x() + c * p.y(), p.z()};
}

}  // namespace metafold
