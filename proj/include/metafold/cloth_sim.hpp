#pragma once

// Deterministic XPBD cloth on a table: stretch and bend distance constraints,
// kinematic single-vertex grasps, ground contact with friction. No self-collision.

#include <bit>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "metafold/error.hpp"
#include "metafold/garment.hpp"
#include "metafold/geometry.hpp"

namespace metafold {

struct SimParams {
  double dt = 1.0 / 60.0;
  int substeps = 10;
  int iterations = 10;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  /// XPBD compliance, m/N. Zero makes edges inextensible.
  double stretch_compliance = 0.0;
  double bend_compliance = 1.0;
  /// Linear velocity damping, 1/s.
  double damping = 0.5;
  /// Ground friction factor in [0, 1].
  double friction = 0.6;
  double thickness = 0.002;
  /// Fabric mass per area, kg/m^2.
  double areal_density = 0.2;
  bool ground = true;
  /// Caps each vertex's distance to a grasped vertex at their geodesic rest
  /// distance, which keeps hanging cloth from stretching under a single pin.
  bool tethers = true;

  void validate() const {
    auto bad = [](const char* what) { throw Error(ErrorCode::BadConfig, what); };
    if (!(dt > 0.0)) bad("dt must be positive");
    if (substeps < 1) bad("substeps must be >= 1");
    if (iterations < 1) bad("iterations must be >= 1");
    if (!(friction >= 0.0 && friction <= 1.0)) bad("friction must lie in [0, 1]");
    if (!(stretch_compliance >= 0.0) || !(bend_compliance >= 0.0)) bad("compliance must be >= 0");
    if (!(damping >= 0.0)) bad("damping must be >= 0");
    if (!(thickness >= 0.0)) bad("thickness must be >= 0");
    if (!(areal_density > 0.0)) bad("areal_density must be positive");
  }
};

struct SimState {
  std::vector<Vec3> positions;
  std::vector<Vec3> previous;
  std::vector<Vec3> velocities;
  /// Grasped vertex -> kinematic target.
  std::map<std::size_t, Vec3> pinned;
  /// Grasped vertex -> per-vertex tether length; empty for untethered pins.
  std::map<std::size_t, std::vector<double>> tethers;
  double time = 0.0;

  std::size_t size() const { return positions.size(); }
};

inline SimState rest_state(const GarmentMesh& mesh) {
  SimState s;
  s.positions = mesh.vertices;
  s.previous = mesh.vertices;
  s.velocities.assign(mesh.vertices.size(), Vec3::Zero());
  return s;
}

struct DistanceConstraint {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double rest = 0.0;
};

/// Constraint topology and masses derived once from a mesh.
struct ClothModel {
  std::vector<DistanceConstraint> stretch;
  std::vector<DistanceConstraint> bend;
  std::vector<double> mass;
  std::vector<double> inv_mass;

  static ClothModel from_mesh(const GarmentMesh& mesh, double areal_density) {
    ClothModel m;
    for (const auto& e : mesh.edges) m.stretch.push_back({e.a, e.b, e.rest});

    // Bending: distance between the two vertices opposite each interior edge.
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> opposite;
    for (const auto& t : mesh.triangles) {
      for (int k = 0; k < 3; ++k) {
        auto a = t[k], b = t[(k + 1) % 3];
        const auto c = t[(k + 2) % 3];
        if (a > b) std::swap(a, b);
        auto [it, fresh] = opposite.emplace(std::make_pair(a, b), c);
        if (!fresh) {
          const auto d = it->second;
          m.bend.push_back({c, d, (mesh.vertices[c] - mesh.vertices[d]).norm()});
        }
      }
    }

    m.mass.assign(mesh.vertices.size(), 0.0);
    for (const auto& t : mesh.triangles) {
      const double area = 0.5 * std::abs(cross2(ground(mesh.vertices[t[0]]), ground(mesh.vertices[t[1]]),
                                                ground(mesh.vertices[t[2]])));
      for (auto v : t) m.mass[v] += areal_density * area / 3.0;
    }
    m.inv_mass.resize(m.mass.size());
    for (std::size_t i = 0; i < m.mass.size(); ++i) m.inv_mass[i] = m.mass[i] > 0.0 ? 1.0 / m.mass[i] : 0.0;
    return m;
  }

  /// Shortest rest-length path from `source` to every vertex along stretch edges.
  std::vector<double> geodesic_from(std::size_t source) const {
    std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(mass.size());
    for (const auto& c : stretch) {
      adj[c.a].emplace_back(c.b, c.rest);
      adj[c.b].emplace_back(c.a, c.rest);
    }
    std::vector<double> dist(mass.size(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[source] = 0.0;
    queue.emplace(0.0, source);
    while (!queue.empty()) {
      const auto [d, v] = queue.top();
      queue.pop();
      if (d > dist[v]) continue;
      for (const auto& [u, len] : adj[v]) {
        if (d + len < dist[u]) {
          dist[u] = d + len;
          queue.emplace(dist[u], u);
        }
      }
    }
    return dist;
  }
};

namespace detail {

inline void project(std::vector<Vec3>& x, const std::vector<double>& w, const DistanceConstraint& c,
                    double alpha_tilde, double& lambda) {
  const double wa = w[c.a], wb = w[c.b];
  const double wsum = wa + wb;
  if (wsum == 0.0) return;
  const Vec3 d = x[c.a] - x[c.b];
  const double len = d.norm();
  if (len < 1e-12) return;
  const double C = len - c.rest;
  const double dlambda = (-C - alpha_tilde * lambda) / (wsum + alpha_tilde);
  lambda += dlambda;
  const Vec3 corr = (dlambda / len) * d;
  x[c.a] += wa * corr;
  x[c.b] -= wb * corr;
}

}  // namespace detail

/// Advances one frame of `params.dt`.
///
/// Positions are predicted with the exact constant-acceleration update, so an
/// unconstrained particle follows the ballistic parabola without truncation
/// error. Constraint corrections feed back into velocity as corr / h. Vertices
/// touching the table lose their into-table velocity and keep (1 - mu) of the
/// tangential part. Grasped vertices are moved linearly to their target over
/// the substeps and end the frame exactly on it.
inline void step(SimState& s, const ClothModel& model, const SimParams& params) {
  const std::size_t n = s.positions.size();
  const int S = params.substeps;
  const double h = params.dt / S;
  const Vec3 g = params.gravity;
  const double keep = std::max(0.0, 1.0 - params.damping * h);

  std::vector<double> w = model.inv_mass;
  std::vector<std::pair<std::size_t, Vec3>> pin_from;
  pin_from.reserve(s.pinned.size());
  for (const auto& [v, target] : s.pinned) {
    w[v] = 0.0;
    pin_from.emplace_back(v, s.positions[v]);
  }

  std::vector<Vec3> predicted(n);
  std::vector<Vec3> vpred(n);
  std::vector<double> lambda_stretch(model.stretch.size());
  std::vector<double> lambda_bend(model.bend.size());
  std::vector<char> contact(n);
  const double a_stretch = params.stretch_compliance / (h * h);
  const double a_bend = params.bend_compliance / (h * h);

  for (int sub = 0; sub < S; ++sub) {
    for (std::size_t i = 0; i < n; ++i) {
      s.previous[i] = s.positions[i];
      if (w[i] == 0.0) continue;
      s.velocities[i] *= keep;
      s.positions[i] += h * s.velocities[i] + (0.5 * h * h) * g;
      vpred[i] = s.velocities[i] + h * g;
      predicted[i] = s.positions[i];
    }
    const double frac = static_cast<double>(sub + 1) / S;
    for (const auto& [v, from] : pin_from) {
      const Vec3& to = s.pinned.at(v);
      s.positions[v] = sub + 1 == S ? to : Vec3(from + frac * (to - from));
    }

    std::fill(lambda_stretch.begin(), lambda_stretch.end(), 0.0);
    std::fill(lambda_bend.begin(), lambda_bend.end(), 0.0);
    for (int it = 0; it < params.iterations; ++it) {
      for (std::size_t c = 0; c < model.stretch.size(); ++c) {
        detail::project(s.positions, w, model.stretch[c], a_stretch, lambda_stretch[c]);
      }
      for (std::size_t c = 0; c < model.bend.size(); ++c) {
        detail::project(s.positions, w, model.bend[c], a_bend, lambda_bend[c]);
      }
      for (const auto& [v, lengths] : s.tethers) {
        if (!s.pinned.contains(v)) continue;
        const Vec3 anchor = s.positions[v];
        for (std::size_t i = 0; i < n; ++i) {
          if (w[i] == 0.0) continue;
          const Vec3 d = s.positions[i] - anchor;
          const double len = d.norm();
          if (len > lengths[i]) s.positions[i] = anchor + (lengths[i] / len) * d;
        }
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      contact[i] = 0;
      if (w[i] == 0.0) continue;
      if (params.ground && s.positions[i].z() < params.thickness) {
        s.positions[i].z() = params.thickness;
        contact[i] = 1;
        // Friction on the substep displacement, which is what velocity is here.
        const double slip = 1.0 - params.friction;
        s.positions[i].x() = s.previous[i].x() + slip * (s.positions[i].x() - s.previous[i].x());
        s.positions[i].y() = s.previous[i].y() + slip * (s.positions[i].y() - s.previous[i].y());
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (w[i] == 0.0) {
        s.velocities[i] = (s.positions[i] - s.previous[i]) / h;
        continue;
      }
      Vec3 v = vpred[i] + (s.positions[i] - predicted[i]) / h;
      if (contact[i]) {
        v.z() = std::max(0.0, v.z());
      }
      s.velocities[i] = v;
    }
  }
  s.time += params.dt;

  for (const auto& p : s.positions) {
    if (!p.allFinite() || p.cwiseAbs().maxCoeff() > 1e3) {
      throw Error(ErrorCode::NumericalBlowup, "vertex left the workspace at t=" + std::to_string(s.time));
    }
  }
}

/// Binary little-endian PLY with float32 x/y/z vertex records.
inline void write_ply(std::ostream& os, std::span<const Vec3> points) {
  os << "ply\nformat binary_little_endian 1.0\nelement vertex " << points.size()
     << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (const auto& p : points) {
    for (int k = 0; k < 3; ++k) {
      const float f = static_cast<float>(p[k]);
      unsigned char b[4];
      std::memcpy(b, &f, 4);
      if constexpr (std::endian::native == std::endian::big) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
      os.write(reinterpret_cast<const char*>(b), 4);
    }
  }
}

inline std::vector<Vec3> read_ply(std::istream& is) {
  std::string line;
  std::size_t count = 0;
  bool binary = false;
  while (std::getline(is, line)) {
    if (line.rfind("format binary_little_endian", 0) == 0) binary = true;
    if (line.rfind("element vertex ", 0) == 0) count = std::stoul(line.substr(15));
    if (line == "end_header") break;
  }
  if (!binary) throw Error(ErrorCode::ParseError, "only binary little-endian PLY is supported");
  std::vector<Vec3> pts(count);
  for (auto& p : pts) {
    for (int k = 0; k < 3; ++k) {
      unsigned char b[4];
      if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::ParseError, "truncated PLY payload");
      if constexpr (std::endian::native == std::endian::big) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
      float f;
      std::memcpy(&f, b, 4);
      p[k] = f;
    }
  }
  return pts;
}

/// A garment on the table plus the grasp interface and the observation cache.
class ClothSim {
 public:
  explicit ClothSim(GarmentMesh mesh, SimParams params = {})
      : mesh_(std::move(mesh)), params_(params), state_(rest_state(mesh_)) {
    params_.validate();
    model_ = ClothModel::from_mesh(mesh_, params_.areal_density);
  }

  const GarmentMesh& mesh() const { return mesh_; }
  const SimParams& params() const { return params_; }
  const ClothModel& model() const { return model_; }
  const SimState& state() const { return state_; }
  const std::vector<Vec3>& positions() const { return state_.positions; }

  void step() { metafold::step(state_, model_, params_); }

  void advance(double seconds) {
    const auto frames = static_cast<long>(std::llround(seconds / params_.dt));
    for (long i = 0; i < frames; ++i) step();
  }

  /// Steps until every vertex is slower than `speed` or `max_seconds` elapse.
  /// Returns the simulated time spent.
  double settle(double max_seconds = 3.0, double speed = 1e-3) {
    const double t0 = state_.time;
    while (state_.time - t0 < max_seconds - 1e-12) {
      step();
      if (max_speed() < speed) break;
    }
    return state_.time - t0;
  }

  void grasp(std::size_t v) {
    check_vertex(v);
    state_.pinned[v] = state_.positions[v];
    if (params_.tethers && !state_.tethers.contains(v)) state_.tethers[v] = model_.geodesic_from(v);
  }

  /// Moves the kinematic target of a grasped vertex; the vertex reaches it at
  /// the end of the next step. Targets are kept on or above the table surface.
  void move_grasp(std::size_t v, const Vec3& target) {
    auto it = state_.pinned.find(v);
    if (it == state_.pinned.end()) throw Error(ErrorCode::NotGrasped, "vertex " + std::to_string(v));
    Vec3 t = target;
    if (params_.ground) t.z() = std::max(t.z(), params_.thickness);
    it->second = t;
  }

  /// Single-gripper form: moves the only grasped vertex.
  void move_grasp(const Vec3& target) {
    if (state_.pinned.size() != 1) throw Error(ErrorCode::NotGrasped, "no unique grasped vertex");
    move_grasp(state_.pinned.begin()->first, target);
  }

  void release(std::size_t v) {
    if (state_.pinned.erase(v) == 0) throw Error(ErrorCode::NotGrasped, "vertex " + std::to_string(v));
    state_.tethers.erase(v);
  }

  void release_all() {
    state_.pinned.clear();
    state_.tethers.clear();
  }

  std::optional<std::size_t> held() const {
    if (state_.pinned.empty()) return std::nullopt;
    return state_.pinned.begin()->first;
  }

  /// Downsampled vertex positions. The vertex subset is chosen by farthest
  /// point sampling on the first call for a given size and reused afterwards,
  /// so successive frames correspond index by index.
  PointCloudFrame observe(std::size_t n_points) {
    const auto& idx = observation_indices(n_points);
    PointCloudFrame f;
    f.id = next_frame_id_++;
    f.points.reserve(idx.size());
    for (auto i : idx) f.points.push_back(state_.positions[i]);
    return f;
  }

  const std::vector<std::size_t>& observation_indices(std::size_t n_points) {
    auto it = observation_cache_.find(n_points);
    if (it != observation_cache_.end()) return it->second;
    if (n_points < 1 || n_points > state_.size()) {
      throw Error(ErrorCode::BadK, "cannot observe " + std::to_string(n_points) + " of " +
                                       std::to_string(state_.size()) + " vertices");
    }
    std::vector<std::size_t> idx;
    if (n_points == state_.size()) {
      idx.resize(n_points);
      for (std::size_t i = 0; i < n_points; ++i) idx[i] = i;
    } else {
      idx = farthest_point_sample(state_.positions, n_points);
    }
    return observation_cache_.emplace(n_points, std::move(idx)).first->second;
  }

  double max_strain() const {
    double m = 0.0;
    for (const auto& c : model_.stretch) {
      const double len = (state_.positions[c.a] - state_.positions[c.b]).norm();
      m = std::max(m, std::abs(len - c.rest) / c.rest);
    }
    return m;
  }

  double max_speed() const {
    double m = 0.0;
    for (const auto& v : state_.velocities) m = std::max(m, v.norm());
    return m;
  }

  /// Kinetic plus gravitational energy, J, with the table as zero height.
  double energy() const {
    double e = 0.0;
    const double g = -params_.gravity.z();
    for (std::size_t i = 0; i < state_.size(); ++i) {
      e += model_.mass[i] * (0.5 * state_.velocities[i].squaredNorm() + g * state_.positions[i].z());
    }
    return e;
  }

 private:
  void check_vertex(std::size_t v) const {
    if (v >= state_.size()) throw Error(ErrorCode::BadK, "vertex " + std::to_string(v) + " out of range");
  }

  GarmentMesh mesh_;
  SimParams params_;
  ClothModel model_;
  SimState state_;
  std::map<std::size_t, std::vector<std::size_t>> observation_cache_;
  std::uint64_t next_frame_id_ = 0;
};

}  // namespace metafold
