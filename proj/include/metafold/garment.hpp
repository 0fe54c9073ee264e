#pragma once

// Parametric garment templates laid flat on the table. Axis convention: the
// body axis is +y (collar toward +y) and the wearer's left is -x as seen from
// above, so the left sleeve occupies -x.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "metafold/error.hpp"
#include "metafold/geometry.hpp"

namespace metafold {

enum class Category { NoSleeve, ShortSleeve, LongSleeve, Pants };

inline constexpr std::array<Category, 4> kAllCategories = {Category::NoSleeve, Category::ShortSleeve,
                                                           Category::LongSleeve, Category::Pants};

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::NoSleeve: return "no-sleeve";
    case Category::ShortSleeve: return "short-sleeve";
    case Category::LongSleeve: return "long-sleeve";
    case Category::Pants: return "pants";
  }
  return "?";
}

inline std::optional<Category> parse_category(std::string_view s) {
  std::string k;
  for (char ch : s) {
    if (ch == '-' || ch == '_' || ch == ' ') continue;
    k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  if (k == "nosleeve" || k == "vest") return Category::NoSleeve;
  if (k == "shortsleeve" || k == "tshirt") return Category::ShortSleeve;
  if (k == "longsleeve") return Category::LongSleeve;
  if (k == "pants" || k == "trousers") return Category::Pants;
  return std::nullopt;
}

enum class StageId { LeftSleeve, RightSleeve, BottomUp, LeftLegOntoRight, RightLegOntoLeft };

inline constexpr std::array<StageId, 5> kAllStages = {StageId::LeftSleeve, StageId::RightSleeve,
                                                      StageId::BottomUp, StageId::LeftLegOntoRight,
                                                      StageId::RightLegOntoLeft};

inline std::string_view to_string(StageId s) {
  switch (s) {
    case StageId::LeftSleeve: return "LeftSleeve";
    case StageId::RightSleeve: return "RightSleeve";
    case StageId::BottomUp: return "BottomUp";
    case StageId::LeftLegOntoRight: return "LeftLegOntoRight";
    case StageId::RightLegOntoLeft: return "RightLegOntoLeft";
  }
  return "?";
}

inline std::optional<StageId> parse_stage_id(std::string_view s) {
  for (StageId id : kAllStages) {
    if (to_string(id) == s) return id;
  }
  return std::nullopt;
}

inline bool stage_valid_for(StageId s, Category c) {
  switch (s) {
    case StageId::LeftSleeve:
    case StageId::RightSleeve: return c == Category::ShortSleeve || c == Category::LongSleeve;
    case StageId::BottomUp: return true;
    case StageId::LeftLegOntoRight:
    case StageId::RightLegOntoLeft: return c == Category::Pants;
  }
  return false;
}

inline std::vector<StageId> default_stage_sequence(Category c) {
  switch (c) {
    case Category::NoSleeve: return {StageId::BottomUp};
    case Category::ShortSleeve:
    case Category::LongSleeve: return {StageId::LeftSleeve, StageId::RightSleeve, StageId::BottomUp};
    case Category::Pants: return {StageId::LeftLegOntoRight, StageId::BottomUp};
  }
  return {};
}

/// Height of the flat rest pose: one default collision thickness plus a
/// half-millimetre drop so the cloth settles onto the table.
inline constexpr double kRestHeight = 0.0025;

struct GarmentSpec {
  Category category = Category::ShortSleeve;
  /// Torso panel; for pants the waist width and hip-band height.
  double body_width = 0.48;
  double body_height = 0.62;
  double sleeve_length = 0.22;
  double sleeve_width = 0.20;
  double leg_length = 0.74;
  /// Width of each pant leg.
  double leg_width = 0.23;
  /// Target edge length of the triangulation.
  double resolution = 0.03;
  std::uint64_t jitter_seed = 0;

  bool has_sleeves() const {
    return category == Category::ShortSleeve || category == Category::LongSleeve;
  }

  static GarmentSpec defaults(Category c) {
    GarmentSpec s;
    s.category = c;
    switch (c) {
      case Category::NoSleeve:
        s.body_width = 0.44;
        s.body_height = 0.60;
        break;
      case Category::ShortSleeve:
        break;
      case Category::LongSleeve:
        s.body_width = 0.48;
        s.body_height = 0.66;
        s.sleeve_length = 0.44;
        s.sleeve_width = 0.22;
        break;
      case Category::Pants:
        s.body_width = 0.50;
        s.body_height = 0.20;
        s.leg_length = 0.74;
        s.leg_width = 0.23;
        break;
    }
    return s;
  }

  /// Scales every dimension by an independent factor in [1 - amount, 1 + amount],
  /// then restores the layout constraints that jitter may break.
  GarmentSpec jittered(std::uint64_t seed, double amount = 0.1) const {
    GarmentSpec s = *this;
    s.jitter_seed = seed;
    std::mt19937_64 rng(seed);
    auto factor = [&] {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      return 1.0 + amount * (2.0 * u - 1.0);
    };
    s.body_width *= factor();
    s.body_height *= factor();
    s.sleeve_length *= factor();
    s.sleeve_width *= factor();
    s.leg_length *= factor();
    s.leg_width *= factor();
    s.sleeve_length = std::min(s.sleeve_length, 0.95 * s.body_width);
    s.sleeve_width = std::min(s.sleeve_width, 0.45 * s.body_height);
    s.leg_width = std::min(s.leg_width, 0.48 * s.body_width);
    return s;
  }

  void validate() const {
    auto require = [](bool ok, const char* field, const char* why) {
      if (!ok) throw Error(ErrorCode::BadSpec, std::string(field) + ": " + why);
    };
    auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
    require(finite_pos(body_width), "body_width", "must be positive");
    require(finite_pos(body_height), "body_height", "must be positive");
    require(finite_pos(resolution), "resolution", "must be positive");
    double smallest = std::min(body_width, body_height);
    if (has_sleeves()) {
      require(finite_pos(sleeve_length), "sleeve_length", "must be positive");
      require(finite_pos(sleeve_width), "sleeve_width", "must be positive");
      require(sleeve_width <= body_height, "sleeve_width", "wider than the body is tall");
      require(sleeve_length < body_width, "sleeve_length",
              "folded sleeve would leave the body panel");
      smallest = std::min({smallest, sleeve_length, sleeve_width});
    }
    if (category == Category::Pants) {
      require(finite_pos(leg_length), "leg_length", "must be positive");
      require(finite_pos(leg_width), "leg_width", "must be positive");
      require(leg_width <= 0.5 * body_width, "leg_width", "legs overlap");
      smallest = std::min({smallest, leg_length, leg_width});
    }
    require(resolution <= smallest / 4.0 + 1e-12, "resolution",
            "must be at most a quarter of the smallest dimension");
  }
};

struct Edge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double rest = 0.0;
};

using Triangle = std::array<std::uint32_t, 3>;

struct GarmentMesh {
  GarmentSpec spec;
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Edge> edges;
  std::map<std::string, std::size_t, std::less<>> keypoints;

  Category category() const { return spec.category; }
  std::size_t vertex_count() const { return vertices.size(); }

  std::size_t keypoint(std::string_view name) const {
    auto it = keypoints.find(name);
    if (it == keypoints.end()) throw Error(ErrorCode::BadSpec, "no keypoint " + std::string(name));
    return it->second;
  }
  const Vec3& keypoint_position(std::string_view name) const { return vertices[keypoint(name)]; }

  double area() const {
    double a = 0.0;
    for (const auto& t : triangles) {
      a += 0.5 * std::abs(cross2(ground(vertices[t[0]]), ground(vertices[t[1]]), ground(vertices[t[2]])));
    }
    return a;
  }

  double min_y() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& v : vertices) m = std::min(m, v.y());
    return m;
  }
  double max_y() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& v : vertices) m = std::max(m, v.y());
    return m;
  }
};

struct Rect2 {
  double x0, y0, x1, y1;
  double area() const { return (x1 - x0) * (y1 - y0); }
  bool contains(const Vec2& p, double tol = 0.0) const {
    return p.x() >= x0 - tol && p.x() <= x1 + tol && p.y() >= y0 - tol && p.y() <= y1 + tol;
  }
};

/// The flat silhouette as disjoint axis-aligned rectangles, symmetric about x = 0.
inline std::vector<Rect2> silhouette(const GarmentSpec& s) {
  const double hw = 0.5 * s.body_width;
  if (s.category == Category::Pants) {
    const double top = 0.5 * (s.body_height + s.leg_length);
    const double crotch = top - s.body_height;
    const double bottom = crotch - s.leg_length;
    return {{-hw, crotch, hw, top},
            {-hw, bottom, -hw + s.leg_width, crotch},
            {hw - s.leg_width, bottom, hw, crotch}};
  }
  const double hh = 0.5 * s.body_height;
  std::vector<Rect2> r = {{-hw, -hh, hw, hh}};
  if (s.has_sleeves()) {
    r.push_back({-hw - s.sleeve_length, hh - s.sleeve_width, -hw, hh});
    r.push_back({hw, hh - s.sleeve_width, hw + s.sleeve_length, hh});
  }
  return r;
}

inline double silhouette_area(const GarmentSpec& s) {
  double a = 0.0;
  for (const auto& r : silhouette(s)) a += r.area();
  return a;
}

inline bool silhouette_contains(const GarmentSpec& s, const Vec2& p, double tol = 1e-9) {
  for (const auto& r : silhouette(s)) {
    if (r.contains(p, tol)) return true;
  }
  return false;
}

namespace detail {

// Grid coordinates: every breakpoint of the silhouette, with each interval split
// into pieces no longer than `res`.
inline std::vector<double> subdivide(std::vector<double> breaks, double res) {
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    const auto n = static_cast<int>(std::max(1.0, std::ceil((b - a) / res - 1e-9)));
    for (int k = 0; k < n; ++k) out.push_back(a + (b - a) * k / n);
  }
  out.push_back(breaks.back());
  return out;
}

// Mirror-exact coordinates: build the x >= 0 half and negate it.
inline std::vector<double> symmetric_axis(const std::vector<Rect2>& rects, double res) {
  std::vector<double> half = {0.0};
  for (const auto& r : rects) {
    for (double x : {r.x0, r.x1}) half.push_back(std::abs(x));
  }
  std::vector<double> pos = subdivide(half, res);
  std::vector<double> xs;
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) {
    if (*it != 0.0) xs.push_back(-*it);
  }
  xs.insert(xs.end(), pos.begin(), pos.end());
  return xs;
}

inline std::size_t nearest_vertex(const std::vector<Vec3>& verts, const Vec2& p) {
  std::size_t best = 0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const double e = (ground(verts[i]) - p).squaredNorm();
    if (e < d) {
      d = e;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

/// Triangulates the silhouette on a grid aligned with its breakpoints, so the
/// mesh covers the silhouette exactly. Cells alternate their diagonal.
inline GarmentMesh build_garment(const GarmentSpec& spec) {
  spec.validate();
  const auto rects = silhouette(spec);
  const std::vector<double> xs = detail::symmetric_axis(rects, spec.resolution);
  std::vector<double> ybreaks;
  for (const auto& r : rects) {
    ybreaks.push_back(r.y0);
    ybreaks.push_back(r.y1);
  }
  const std::vector<double> ys = detail::subdivide(ybreaks, spec.resolution);

  const std::size_t nx = xs.size(), ny = ys.size();
  auto inside_cell = [&](std::size_t i, std::size_t j) {
    const Vec2 c(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]));
    for (const auto& r : rects) {
      if (r.contains(c)) return true;
    }
    return false;
  };

  GarmentMesh mesh;
  mesh.spec = spec;
  std::vector<std::int64_t> node(nx * ny, -1);
  auto node_id = [&](std::size_t i, std::size_t j) -> std::uint32_t {
    auto& slot = node[j * nx + i];
    if (slot < 0) {
      slot = static_cast<std::int64_t>(mesh.vertices.size());
      mesh.vertices.emplace_back(xs[i], ys[j], kRestHeight);
    }
    return static_cast<std::uint32_t>(slot);
  };

  for (std::size_t j = 0; j + 1 < ny; ++j) {
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      if (!inside_cell(i, j)) continue;
      const auto a = node_id(i, j), b = node_id(i + 1, j), c = node_id(i + 1, j + 1), d = node_id(i, j + 1);
      if ((i + j) % 2 == 0) {
        mesh.triangles.push_back({a, b, c});
        mesh.triangles.push_back({a, c, d});
      } else {
        mesh.triangles.push_back({a, b, d});
        mesh.triangles.push_back({b, c, d});
      }
    }
  }

  std::map<std::pair<std::uint32_t, std::uint32_t>, bool> seen;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      auto a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      if (seen.emplace(std::make_pair(a, b), true).second) {
        mesh.edges.push_back({a, b, (mesh.vertices[a] - mesh.vertices[b]).norm()});
      }
    }
  }

  auto put = [&](const std::string& name, double x, double y) {
    mesh.keypoints[name] = detail::nearest_vertex(mesh.vertices, Vec2(x, y));
  };
  const double hw = 0.5 * spec.body_width;
  if (spec.category == Category::Pants) {
    const auto& hip = rects[0];
    const auto& lleg = rects[1];
    const auto& rleg = rects[2];
    put("left_waist", -hw, hip.y1);
    put("right_waist", hw, hip.y1);
    put("waist_mid", 0.0, hip.y1);
    put("left_cuff", 0.5 * (lleg.x0 + lleg.x1), lleg.y0);
    put("right_cuff", 0.5 * (rleg.x0 + rleg.x1), rleg.y0);
    put("left_cuff_outer", lleg.x0, lleg.y0);
    put("right_cuff_outer", rleg.x1, rleg.y0);
  } else {
    const double hh = 0.5 * spec.body_height;
    put("left_hem", -hw, -hh);
    put("right_hem", hw, -hh);
    put("hem_mid", 0.0, -hh);
    put("collar_mid", 0.0, hh);
    put("left_shoulder", -hw, hh);
    put("right_shoulder", hw, hh);
    if (spec.has_sleeves()) {
      const double tip_y = hh - 0.5 * spec.sleeve_width;
      put("left_sleeve_tip", -hw - spec.sleeve_length, tip_y);
      put("right_sleeve_tip", hw + spec.sleeve_length, tip_y);
      put("left_sleeve_target", -hw + spec.sleeve_length, tip_y);
      put("right_sleeve_target", hw - spec.sleeve_length, tip_y);
    }
  }
  if (spec.category == Category::Pants) {
    const double mid = 0.5 * (mesh.min_y() + mesh.max_y());
    const auto& l = mesh.keypoint_position("left_cuff");
    const auto& r = mesh.keypoint_position("right_cuff");
    put("left_cuff_target", l.x(), 2.0 * mid - l.y());
    put("right_cuff_target", r.x(), 2.0 * mid - r.y());
  }
  return mesh;
}

/// Reflection across x = 0 with left/right labels exchanged.
inline GarmentMesh mirrored(const GarmentMesh& mesh) {
  GarmentMesh out = mesh;
  for (auto& v : out.vertices) v.x() = -v.x();
  for (auto& t : out.triangles) std::swap(t[1], t[2]);
  out.keypoints.clear();
  for (const auto& [name, idx] : mesh.keypoints) {
    std::string n = name;
    if (n.starts_with("left_")) {
      n = "right_" + n.substr(5);
    } else if (n.starts_with("right_")) {
      n = "left_" + n.substr(6);
    }
    out.keypoints[n] = idx;
  }
  return out;
}

/// A single fold subtask: points on the moving side of the ground-plane line
/// rotate over it onto the fixed side.
struct FoldStage {
  StageId id = StageId::BottomUp;
  Vec2 line_point = Vec2::Zero();
  /// Unit length.
  Vec2 line_direction = Vec2(1.0, 0.0);
  /// +1 when the moving region lies on the left normal of `line_direction`.
  int moving_side = 1;
  std::string grasp_keypoint;
  std::string target_keypoint;

  Vec2 normal() const { return {-line_direction.y(), line_direction.x()}; }

  /// Signed distance to the fold line, positive on the moving side.
  double offset(const Vec2& q) const { return moving_side * normal().dot(q - line_point); }

  Vec2 reflect(const Vec2& q) const {
    const Vec2 n = normal();
    return q - 2.0 * n.dot(q - line_point) * n;
  }

  FoldStage rotated(double theta) const {
    FoldStage s = *this;
    const Vec3 p = rotate_z(Vec3(line_point.x(), line_point.y(), 0.0), theta);
    const Vec3 d = rotate_z(Vec3(line_direction.x(), line_direction.y(), 0.0), theta);
    s.line_point = ground(p);
    s.line_direction = ground(d).normalized();
    return s;
  }
};

inline FoldStage make_stage(StageId id, const GarmentMesh& mesh) {
  if (!stage_valid_for(id, mesh.category())) {
    throw Error(ErrorCode::CategoryMismatch, std::string(to_string(id)) + " does not apply to " +
                                                 std::string(to_string(mesh.category())));
  }
  FoldStage s;
  s.id = id;
  const Vec2 up(0.0, 1.0);
  switch (id) {
    case StageId::LeftSleeve:
      s.line_point = ground(mesh.keypoint_position("left_shoulder"));
      s.line_direction = up;
      s.moving_side = 1;
      s.grasp_keypoint = "left_sleeve_tip";
      s.target_keypoint = "left_sleeve_target";
      break;
    case StageId::RightSleeve:
      s.line_point = ground(mesh.keypoint_position("right_shoulder"));
      s.line_direction = up;
      s.moving_side = -1;
      s.grasp_keypoint = "right_sleeve_tip";
      s.target_keypoint = "right_sleeve_target";
      break;
    case StageId::BottomUp: {
      s.line_point = Vec2(0.0, 0.5 * (mesh.min_y() + mesh.max_y()));
      s.line_direction = Vec2(1.0, 0.0);
      s.moving_side = -1;
      if (mesh.category() == Category::Pants) {
        s.grasp_keypoint = "left_cuff";
        s.target_keypoint = "left_cuff_target";
      } else {
        s.grasp_keypoint = "hem_mid";
        s.target_keypoint = "collar_mid";
      }
      break;
    }
    case StageId::LeftLegOntoRight:
      s.line_point = Vec2::Zero();
      s.line_direction = up;
      s.moving_side = 1;
      s.grasp_keypoint = "left_cuff";
      s.target_keypoint = "right_cuff";
      break;
    case StageId::RightLegOntoLeft:
      s.line_point = Vec2::Zero();
      s.line_direction = up;
      s.moving_side = -1;
      s.grasp_keypoint = "right_cuff";
      s.target_keypoint = "left_cuff";
      break;
  }
  return s;
}

inline std::vector<FoldStage> default_stages(const GarmentMesh& mesh) {
  std::vector<FoldStage> out;
  for (StageId id : default_stage_sequence(mesh.category())) out.push_back(make_stage(id, mesh));
  return out;
}

/// ASCII OBJ with v/f records.
inline void write_obj(std::ostream& os, std::span<const Vec3> vertices, std::span<const Triangle> triangles) {
  os.precision(9);
  for (const auto& v : vertices) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : triangles) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

struct ObjMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
};

/// Reads v and triangular f records; texture/normal suffixes ("1/2/3") are
/// ignored and other record types skipped.
inline ObjMesh read_obj(std::istream& is) {
  ObjMesh m;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    auto bad = [&](const char* why) { throw Error(ErrorCode::ParseError, "OBJ line " + std::to_string(n) + ": " + why); };
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z())) bad("expected three coordinates");
      m.vertices.push_back(v);
    } else if (tag == "f") {
      Triangle t{};
      std::string tok;
      int k = 0;
      while (ss >> tok) {
        if (k == 3) bad("only triangles are supported");
        const long idx = std::strtol(tok.c_str(), nullptr, 10);
        if (idx < 1 || static_cast<std::size_t>(idx) > m.vertices.size()) bad("face index out of range");
        t[k++] = static_cast<std::uint32_t>(idx - 1);
      }
      if (k != 3) bad("face needs three vertices");
      m.triangles.push_back(t);
    }
  }
  return m;
}

}  // namespace metafold
