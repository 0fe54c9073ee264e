#pragma once

// Fold-quality metrics: projected area, rectangularity, area ratio, success.

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "metafold/error.hpp"
#include "metafold/garment.hpp"
#include "metafold/geometry.hpp"

namespace metafold {

struct MetricThresholds {
  double min_rectangularity = 0.75;
  double max_area_ratio = 0.55;

  void validate() const {
    if (!(min_rectangularity > 0.0 && min_rectangularity <= 1.0)) {
      throw Error(ErrorCode::BadConfig, "rectangularity threshold must lie in (0, 1]");
    }
    if (!(max_area_ratio > 0.0 && max_area_ratio <= 1.0)) {
      throw Error(ErrorCode::BadConfig, "area-ratio threshold must lie in (0, 1]");
    }
  }
};

struct FoldReport {
  double rectangularity = 0.0;
  double area_ratio = 0.0;
  bool success = false;
  double chamfer_to_goal = 0.0;
  double initial_area = 0.0;
  double final_area = 0.0;
};

namespace detail {

// Positive-area overlap between a triangle and an axis-aligned cell, by the
// separating axis test with touching treated as separated.
inline bool triangle_overlaps_cell(const Vec2 (&t)[3], double x0, double y0, double x1, double y1) {
  const double tx0 = std::min({t[0].x(), t[1].x(), t[2].x()});
  const double tx1 = std::max({t[0].x(), t[1].x(), t[2].x()});
  const double ty0 = std::min({t[0].y(), t[1].y(), t[2].y()});
  const double ty1 = std::max({t[0].y(), t[1].y(), t[2].y()});
  if (tx1 <= x0 || tx0 >= x1 || ty1 <= y0 || ty0 >= y1) return false;
  const Vec2 corners[4] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  for (int k = 0; k < 3; ++k) {
    const Vec2 e = t[(k + 1) % 3] - t[k];
    const Vec2 n(-e.y(), e.x());
    const double a = n.dot(t[k]);
    const double b = n.dot(t[(k + 2) % 3]);
    const double lo = std::min(a, b), hi = std::max(a, b);
    double clo = std::numeric_limits<double>::infinity(), chi = -clo;
    for (const auto& c : corners) {
      const double v = n.dot(c);
      clo = std::min(clo, v);
      chi = std::max(chi, v);
    }
    if (chi <= lo || clo >= hi) return false;
  }
  return true;
}

}  // namespace detail

/// Area of the union of the triangles projected onto the table. The bounding
/// box is rasterized with cells of max(1 mm, diagonal / 512); a cell counts
/// once if any triangle overlaps it, so stacked layers are not double counted.
inline double projected_area(std::span<const Vec3> positions, std::span<const Triangle> triangles) {
  if (positions.empty() || triangles.empty()) throw Error(ErrorCode::Degenerate, "empty mesh");
  Vec2 lo(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  for (const auto& t : triangles) {
    for (auto v : t) {
      lo = lo.cwiseMin(ground(positions[v]));
      hi = hi.cwiseMax(ground(positions[v]));
    }
  }
  const double diag = (hi - lo).norm();
  const double cell = std::max(1e-3, diag / 512.0);
  const auto nx = static_cast<std::size_t>(std::ceil((hi.x() - lo.x()) / cell)) + 1;
  const auto ny = static_cast<std::size_t>(std::ceil((hi.y() - lo.y()) / cell)) + 1;
  std::vector<char> covered(nx * ny, 0);
  std::size_t count = 0;
  for (const auto& t : triangles) {
    const Vec2 tri[3] = {ground(positions[t[0]]), ground(positions[t[1]]), ground(positions[t[2]])};
    if (std::abs(cross2(tri[0], tri[1], tri[2])) < 1e-18) continue;
    const double bx0 = std::min({tri[0].x(), tri[1].x(), tri[2].x()});
    const double bx1 = std::max({tri[0].x(), tri[1].x(), tri[2].x()});
    const double by0 = std::min({tri[0].y(), tri[1].y(), tri[2].y()});
    const double by1 = std::max({tri[0].y(), tri[1].y(), tri[2].y()});
    const auto i0 = static_cast<std::size_t>(std::floor((bx0 - lo.x()) / cell));
    const auto i1 = std::min(nx - 1, static_cast<std::size_t>(std::floor((bx1 - lo.x()) / cell)));
    const auto j0 = static_cast<std::size_t>(std::floor((by0 - lo.y()) / cell));
    const auto j1 = std::min(ny - 1, static_cast<std::size_t>(std::floor((by1 - lo.y()) / cell)));
    for (std::size_t j = j0; j <= j1; ++j) {
      for (std::size_t i = i0; i <= i1; ++i) {
        char& c = covered[j * nx + i];
        if (c) continue;
        const double x0 = lo.x() + i * cell, y0 = lo.y() + j * cell;
        if (detail::triangle_overlaps_cell(tri, x0, y0, x0 + cell, y0 + cell)) {
          c = 1;
          ++count;
        }
      }
    }
  }
  if (count == 0) throw Error(ErrorCode::Degenerate, "projection has zero area");
  return static_cast<double>(count) * cell * cell;
}

/// Projected area over the area of the minimum bounding rectangle of the
/// projected vertices.
inline double rectangularity(std::span<const Vec3> positions, std::span<const Triangle> triangles) {
  const double area = projected_area(positions, triangles);
  const auto rect = min_area_rect(convex_hull_2d(ground_projection(positions)));
  return area / rect.area;
}

inline double area_ratio(std::span<const Vec3> final_positions, std::span<const Vec3> initial_positions,
                         std::span<const Triangle> triangles) {
  const double initial = projected_area(initial_positions, triangles);
  return projected_area(final_positions, triangles) / initial;
}

inline bool judge(const FoldReport& r, const MetricThresholds& th) {
  return r.rectangularity >= th.min_rectangularity && r.area_ratio <= th.max_area_ratio;
}

inline FoldReport evaluate_fold(std::span<const Vec3> initial_positions, std::span<const Vec3> final_positions,
                                std::span<const Triangle> triangles, const MetricThresholds& th,
                                double chamfer_to_goal = 0.0) {
  FoldReport r;
  r.initial_area = projected_area(initial_positions, triangles);
  r.final_area = projected_area(final_positions, triangles);
  r.area_ratio = r.final_area / r.initial_area;
  const auto rect = min_area_rect(convex_hull_2d(ground_projection(final_positions)));
  r.rectangularity = r.final_area / rect.area;
  r.chamfer_to_goal = chamfer_to_goal;
  r.success = judge(r, th);
  return r;
}

/// key=value lines.
inline void write_report(std::ostream& os, const FoldReport& r) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "rectangularity=" << r.rectangularity << '\n'
     << "area_ratio=" << r.area_ratio << '\n'
     << "success=" << (r.success ? "true" : "false") << '\n'
     << "chamfer_to_goal=" << r.chamfer_to_goal << '\n'
     << "initial_area=" << r.initial_area << '\n'
     << "final_area=" << r.final_area << '\n';
  os << ss.str();
}

inline FoldReport read_report(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "expected key=value: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto num = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::ParseError, std::string("missing ") + key);
    return std::stod(it->second);
  };
  FoldReport r;
  r.rectangularity = num("rectangularity");
  r.area_ratio = num("area_ratio");
  r.chamfer_to_goal = num("chamfer_to_goal");
  r.initial_area = num("initial_area");
  r.final_area = num("final_area");
  r.success = kv["success"] == "true";
  return r;
}

struct MetricSummary {
  double rectangularity = 0.0;
  double area_ratio = 0.0;
  double success_rate = 0.0;
  std::size_t count = 0;
};

inline MetricSummary summarize(std::span<const FoldReport> reports) {
  MetricSummary s;
  s.count = reports.size();
  if (reports.empty()) return s;
  for (const auto& r : reports) {
    s.rectangularity += r.rectangularity;
    s.area_ratio += r.area_ratio;
    s.success_rate += r.success ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(reports.size());
  s.rectangularity /= n;
  s.area_ratio /= n;
  s.success_rate /= n;
  return s;
}

/// Metric rows by column, laid out like a results table:
/// `metric,<col1>,<col2>,...` then one row per metric.
inline void write_summary_csv(std::ostream& os, const std::vector<std::pair<std::string, MetricSummary>>& columns) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(4);
  ss << "metric";
  for (const auto& [name, _] : columns) ss << ',' << name;
  ss << "\nrectangularity";
  for (const auto& [_, s] : columns) ss << ',' << s.rectangularity;
  ss << "\narea_ratio";
  for (const auto& [_, s] : columns) ss << ',' << s.area_ratio;
  ss << "\nsuccess_rate";
  for (const auto& [_, s] : columns) ss << ',' << s.success_rate;
  ss << "\nepisodes";
  for (const auto& [_, s] : columns) ss << ',' << s.count;
  ss << '\n';
  os << ss.str();
}

}  // namespace metafold
