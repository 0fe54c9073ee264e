#pragma once

// Contact synthesis: turns a pair of corresponded frames into a single
// end-effector action (contact point p, unit motion direction s, magnitude).
// A seeded proposal picks a point from the high-flow region; the ensemble
// groups many proposals and returns a representative of the modal group.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "metafold/error.hpp"
#include "metafold/geometry.hpp"
#include "metafold/planner.hpp"

namespace metafold {

struct ContactAction {
  Vec3 p = Vec3::Zero();
  /// Unit length.
  Vec3 s = Vec3::UnitX();
  double magnitude = 0.0;
  /// Index of p in the source frame.
  std::size_t index = 0;
};

struct EnsembleConfig {
  std::size_t seeds = 160;
  /// Grouping radius, m.
  double epsilon = 0.03;
  /// Candidates are points whose flow is at least beta times the largest flow.
  double beta = 0.8;

  void validate() const {
    if (seeds < 1) throw Error(ErrorCode::BadConfig, "ensemble needs at least one seed");
    if (!(epsilon > 0.0)) throw Error(ErrorCode::BadConfig, "epsilon must be positive");
    if (!(beta > 0.0 && beta <= 1.0)) throw Error(ErrorCode::BadConfig, "beta must lie in (0, 1]");
  }
};

namespace detail {

struct FlowCandidates {
  std::vector<std::size_t> indices;
  std::vector<Vec3> flow;
};

inline FlowCandidates flow_candidates(const PointCloudFrame& a, const PointCloudFrame& b, double beta) {
  const FlowField f = compute_flow(a, b);
  if (f.size() == 0) throw Error(ErrorCode::EmptyInput, "empty frames");
  double max_norm = 0.0;
  for (const auto& d : f.displacements) max_norm = std::max(max_norm, d.norm());
  if (max_norm < 1e-6) throw Error(ErrorCode::NoMotion, "largest flow below 1e-6 m");
  FlowCandidates c;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.displacements[i].norm() >= beta * max_norm) c.indices.push_back(i);
  }
  c.flow = f.displacements;
  return c;
}

inline ContactAction pick(const PointCloudFrame& a, const FlowCandidates& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t i = c.indices[rng() % c.indices.size()];
  const Vec3& d = c.flow[i];
  const double mag = d.norm();
  return {a[i], d / mag, mag, i};
}

}  // namespace detail

/// One proposal: a uniformly drawn point among those whose flow reaches
/// beta times the maximum, with its normalized flow.
inline ContactAction propose(const PointCloudFrame& a, const PointCloudFrame& b, std::uint64_t seed,
                             double beta = 0.8) {
  return detail::pick(a, detail::flow_candidates(a, b, beta), seed);
}

/// Proposals for seeds 0..seeds-1 are grouped in seed order: each joins the
/// first group whose running mean position lies within epsilon, or founds a
/// new one. The largest group wins (earliest founded on ties) and the member
/// nearest its mean position is returned.
inline ContactAction synthesize(const PointCloudFrame& a, const PointCloudFrame& b, const EnsembleConfig& cfg = {}) {
  cfg.validate();
  const auto cand = detail::flow_candidates(a, b, cfg.beta);

  struct Group {
    Vec3 sum = Vec3::Zero();
    std::vector<ContactAction> members;
    Vec3 mean() const { return sum / static_cast<double>(members.size()); }
  };
  std::vector<Group> groups;
  for (std::uint64_t seed = 0; seed < cfg.seeds; ++seed) {
    ContactAction prop = detail::pick(a, cand, seed);
    Group* home = nullptr;
    for (auto& g : groups) {
      if ((g.mean() - prop.p).norm() < cfg.epsilon) {
        home = &g;
        break;
      }
    }
    if (home == nullptr) home = &groups.emplace_back();
    home->sum += prop.p;
    home->members.push_back(prop);
  }

  const Group* modal = &groups.front();
  for (const auto& g : groups) {
    if (g.members.size() > modal->members.size()) modal = &g;
  }
  const Vec3 mean = modal->mean();
  const ContactAction* best = &modal->members.front();
  for (const auto& m : modal->members) {
    if ((m.p - mean).squaredNorm() < (best->p - mean).squaredNorm()) best = &m;
  }
  return *best;
}

/// Frame pairs (t, min(t + K, M - 1)) for t = 0, K, 2K, ... while t < M - 1.
inline std::vector<std::pair<std::size_t, std::size_t>> slice_pairs(std::size_t frame_count, std::size_t cadence) {
  if (cadence < 1) throw Error(ErrorCode::BadK, "cadence must be >= 1");
  if (frame_count < cadence + 1) {
    throw Error(ErrorCode::TooShort, std::to_string(frame_count) + " frames cannot hold a slice of " +
                                         std::to_string(cadence));
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t t = 0; t + 1 < frame_count; t += cadence) out.emplace_back(t, std::min(t + cadence, frame_count - 1));
  return out;
}

inline std::vector<ContactAction> slice_actions(const Trajectory& traj, std::size_t cadence,
                                                const EnsembleConfig& cfg = {}) {
  std::vector<ContactAction> out;
  for (auto [t0, t1] : slice_pairs(traj.frame_count(), cadence)) {
    out.push_back(synthesize(traj.frames[t0], traj.frames[t1], cfg));
  }
  return out;
}

}  // namespace metafold
