#pragma once

// Planar meshes with known areas and a Monte-Carlo union-area oracle, shared
// by the metric unit tests and the acceptance suite.

#include <numbers>
#include <random>
#include <vector>

#include "metafold/garment.hpp"
#include "metafold/geometry.hpp"

namespace fixtures {

using metafold::Triangle;
using metafold::Vec2;
using metafold::Vec3;

struct Mesh {
  std::vector<Vec3> v;
  std::vector<Triangle> t;
};

/// w x h rectangle on z = 0, split into nx x ny cells of two triangles.
inline Mesh rectangle(double w, double h, int nx = 20, int ny = 20) {
  Mesh m;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.v.emplace_back(w * i / nx - 0.5 * w, h * j / ny - 0.5 * h, 0.0);
  auto id = [nx](int i, int j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      m.t.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.t.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

inline Mesh equilateral(double side) {
  Mesh m;
  m.v = {{0, 0, 0}, {side, 0, 0}, {0.5 * side, 0.5 * std::sqrt(3.0) * side, 0}};
  m.t = {{0, 1, 2}};
  return m;
}

/// Three unit cells of a 2 x 2 block: the top-right cell is missing.
inline Mesh l_shape() {
  Mesh m;
  for (int j = 0; j <= 2; ++j)
    for (int i = 0; i <= 2; ++i) m.v.emplace_back(i, j, 0.0);
  auto id = [](int i, int j) { return static_cast<std::uint32_t>(j * 3 + i); };
  for (auto [i, j] : {std::pair{0, 0}, std::pair{1, 0}, std::pair{0, 1}}) {
    m.t.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
    m.t.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
  }
  return m;
}

/// Random planar mesh: a jittered grid of random size and orientation whose
/// left strip is folded back over itself, so part of the cloth is two layers.
inline Mesh random_planar(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double w = 0.2 + 0.4 * u(rng), h = 0.2 + 0.4 * u(rng);
  const int nx = 8 + static_cast<int>(8 * u(rng)), ny = 8 + static_cast<int>(8 * u(rng));
  Mesh m = rectangle(w, h, nx, ny);
  const double jx = 0.3 * w / nx, jy = 0.3 * h / ny;
  for (int j = 1; j < ny; ++j)
    for (int i = 1; i < nx; ++i) m.v[j * (nx + 1) + i] += Vec3(jx * (2 * u(rng) - 1), jy * (2 * u(rng) - 1), 0.0);
  const double line = -0.5 * w + (0.1 + 0.3 * u(rng)) * w;
  for (auto& p : m.v) {
    if (p.x() < line) p = Vec3(2 * line - p.x(), p.y(), p.z() + 0.002);
  }
  const double theta = 2.0 * std::numbers::pi * u(rng);
  for (auto& p : m.v) p = metafold::rotate_z(p, theta);
  return m;
}

inline bool in_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double d1 = metafold::cross2(a, b, p), d2 = metafold::cross2(b, c, p), d3 = metafold::cross2(c, a, p);
  const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
  return !(neg && pos);
}

/// Union area by uniform sampling of the bounding box.
inline double monte_carlo_area(const Mesh& m, std::size_t samples, std::uint64_t seed) {
  Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
  for (const auto& p : m.v) {
    lo = lo.cwiseMin(metafold::ground(p));
    hi = hi.cwiseMax(metafold::ground(p));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y());
  std::size_t hits = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const Vec2 p(ux(rng), uy(rng));
    for (const auto& t : m.t) {
      if (in_triangle(p, metafold::ground(m.v[t[0]]), metafold::ground(m.v[t[1]]), metafold::ground(m.v[t[2]]))) {
        ++hits;
        break;
      }
    }
  }
  return (hi - lo).prod() * static_cast<double>(hits) / static_cast<double>(samples);
}

/// Folds the y < 0 half of a mesh exactly onto the y > 0 half.
inline Mesh half_folded(Mesh m) {
  for (auto& p : m.v) {
    if (p.y() < 0.0) p = Vec3(p.x(), -p.y(), p.z() + 0.002);
  }
  return m;
}

}  // namespace fixtures
