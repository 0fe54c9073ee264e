#pragma once

// Point-cloud trajectory generation for one fold stage: an analytic hinge
// predictor that can resume from any intermediate observation, and a
// simulator rollout that produces ground-truth trajectories.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "metafold/cloth_sim.hpp"
#include "metafold/error.hpp"
#include "metafold/garment.hpp"
#include "metafold/geometry.hpp"

namespace metafold {

struct Trajectory {
  std::vector<PointCloudFrame> frames;
  StageId stage = StageId::BottomUp;
  /// Seconds between frames.
  double frame_period = 0.1;
  /// Set when the observation already satisfies the stage.
  bool converged = false;
  /// Longest arc still ahead of any moving point over the longest full arc,
  /// in [0, 1].
  double remaining_fraction = 1.0;

  std::size_t frame_count() const { return frames.size(); }
  std::size_t point_count() const { return frames.empty() ? 0 : frames.front().size(); }
  const PointCloudFrame& final_frame() const { return frames.back(); }
};

struct GraspPlan {
  Vec3 grasp = Vec3::Zero();
  Vec3 target = Vec3::Zero();
  std::vector<Vec3> samples;
  double arc_height_ratio = 0.5;
};

/// Cosine easing on [0, 1]: zero slope at both ends.
inline double ease(double u) { return 0.5 * (1.0 - std::cos(std::numbers::pi * u)); }

/// Half-ellipse from grasp to target in the vertical plane through both. The
/// horizontal position (and any height difference) follows cosine easing; the
/// bulge is alpha * |target - grasp| * sin(pi u).
inline GraspPlan plan_arc(const Vec3& grasp, const Vec3& target, std::size_t samples, double alpha = 0.5) {
  const double dist = (target - grasp).norm();
  if (dist < 1e-3) throw Error(ErrorCode::DegenerateSegment, "grasp and target closer than 1 mm");
  if (samples < 2) throw Error(ErrorCode::TooShort, "an arc needs at least two samples");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::BadConfig, "arc height ratio must be >= 0");
  GraspPlan plan;
  plan.grasp = grasp;
  plan.target = target;
  plan.arc_height_ratio = alpha;
  plan.samples.resize(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    const double u = static_cast<double>(k) / static_cast<double>(samples - 1);
    Vec3 p = grasp + ease(u) * (target - grasp);
    p.z() += alpha * dist * std::sin(std::numbers::pi * u);
    plan.samples[k] = p;
  }
  plan.samples.front() = grasp;
  plan.samples.back() = target;
  return plan;
}

/// Moving region of a stage as seen in one observation: points more than
/// `side_tolerance` past the fold line.
inline std::vector<std::uint8_t> moving_mask(const PointCloudFrame& observation, const FoldStage& stage,
                                             double side_tolerance = 0.005) {
  std::vector<std::uint8_t> mask(observation.size());
  for (std::size_t i = 0; i < observation.size(); ++i) {
    mask[i] = stage.offset(ground(observation[i])) > side_tolerance ? 1 : 0;
  }
  return mask;
}

struct HingeParams {
  /// Height added to the folded layer so it rests on the fixed layer.
  double layer_thickness = 0.002;
  /// Points further than this past the fold line belong to the moving region.
  double side_tolerance = 0.005;
  /// Points this far above the lowest observed point are mid-fold.
  double lift_tolerance = 0.01;
};

namespace detail {

struct HingePoint {
  std::size_t index;
  Vec2 foot;    // projection onto the fold line
  double radius;
  double angle;  // 0 = flat on the moving side, pi = folded over
};

}  // namespace detail

/// Analytic fold of the moving region about the stage's fold line.
///
/// Each moving point keeps its distance r to the hinge axis (the fold line at
/// the height of the lowest observed point) and rotates from its current angle
/// to pi, i.e. onto its reflection, while the folded layer is raised by one
/// layer thickness. Angles follow cosine easing over the M frames. Points on
/// the fixed side stay put and frame 0 is the observation itself.
///
/// A point is moving when it lies more than `side_tolerance` past the line or
/// is lifted more than `lift_tolerance`. A non-empty `moving_mask` replaces
/// that test, which lets a caller pin the moving region to the one seen at the
/// start of the stage so that creases left by earlier folds stay put. With no
/// moving point left the result is a converged trajectory if a folded layer is
/// visible and NothingToFold otherwise.
inline Trajectory predict_hinge_trajectory(const PointCloudFrame& observation, const FoldStage& stage,
                                           std::size_t frame_count, const HingeParams& params = {},
                                           std::span<const std::uint8_t> moving_mask = {}) {
  if (observation.points.empty()) throw Error(ErrorCode::EmptyInput, "empty observation");
  if (frame_count < 2) throw Error(ErrorCode::TooShort, "a trajectory needs at least two frames");
  if (!moving_mask.empty() && moving_mask.size() != observation.size()) {
    throw Error(ErrorCode::SizeMismatch, "moving mask does not match the observation");
  }

  double z_base = std::numeric_limits<double>::infinity();
  for (const auto& p : observation.points) z_base = std::min(z_base, p.z());

  const Vec2 toward_moving = stage.moving_side * stage.normal();
  std::vector<detail::HingePoint> moving;
  bool folded_layer = false;
  for (std::size_t i = 0; i < observation.size(); ++i) {
    const Vec3& p = observation[i];
    const Vec2 q = ground(p);
    const double d = stage.offset(q);
    const double elev = p.z() - z_base;
    if (elev >= 0.5 * params.layer_thickness) folded_layer = true;
    const bool moves = moving_mask.empty() ? (d > params.side_tolerance || elev > params.lift_tolerance)
                                           : moving_mask[i] != 0;
    if (moves) {
      moving.push_back({i, q - d * toward_moving, std::hypot(d, elev), std::atan2(elev, d)});
    }
  }

  Trajectory traj;
  traj.stage = stage.id;
  traj.frames.assign(frame_count, observation);
  for (std::size_t m = 0; m < frame_count; ++m) traj.frames[m].id = observation.id + m;

  if (moving.empty()) {
    if (!folded_layer) throw Error(ErrorCode::NothingToFold, "no point lies on the moving side");
    traj.converged = true;
    traj.remaining_fraction = 0.0;
    return traj;
  }

  double ahead = 0.0, total = 0.0;
  for (const auto& hp : moving) {
    ahead = std::max(ahead, hp.radius * (std::numbers::pi - hp.angle));
    total = std::max(total, hp.radius * std::numbers::pi);
  }
  traj.remaining_fraction = total > 0.0 ? std::clamp(ahead / total, 0.0, 1.0) : 0.0;

  double max_travel = 0.0;
  for (std::size_t m = 1; m < frame_count; ++m) {
    const double e = ease(static_cast<double>(m) / static_cast<double>(frame_count - 1));
    for (const auto& hp : moving) {
      const double phi = hp.angle + (std::numbers::pi - hp.angle) * e;
      const Vec2 xy = hp.foot + hp.radius * std::cos(phi) * toward_moving;
      const double z = z_base + hp.radius * std::sin(phi) + e * params.layer_thickness;
      traj.frames[m].points[hp.index] = Vec3(xy.x(), xy.y(), z);
    }
  }
  for (const auto& hp : moving) {
    max_travel = std::max(max_travel, (traj.frames.back()[hp.index] - observation[hp.index]).norm());
  }
  // Only crease points remain: every mover is within a crease width of its target.
  if (max_travel < 2.0 * params.side_tolerance + params.layer_thickness) {
    traj.frames.assign(frame_count, observation);
    for (std::size_t m = 0; m < frame_count; ++m) traj.frames[m].id = observation.id + m;
    traj.converged = true;
    traj.remaining_fraction = 0.0;
  }
  return traj;
}

struct RolloutParams {
  /// Observation size, capped at the vertex count.
  std::size_t points = 512;
  double arc_height_ratio = 0.5;
  /// Grasp speed along the arc, m/s.
  double speed = 0.2;
  /// Time after release before the final frame, s.
  double settle_time = 0.5;
};

/// Folds the stage in the simulator by dragging its grasp keypoint along a
/// plan_arc to the reflection of its current position, then releasing. The
/// observed frames, evenly spaced over move and settle, form the trajectory.
inline Trajectory rollout_oracle_trajectory(ClothSim& sim, const FoldStage& stage, std::size_t frame_count,
                                            const RolloutParams& params = {}) {
  if (frame_count < 2) throw Error(ErrorCode::TooShort, "a trajectory needs at least two frames");
  const std::size_t v = sim.mesh().keypoint(stage.grasp_keypoint);
  const std::size_t n_obs = std::min(params.points, sim.state().size());
  const Vec3 start = sim.positions()[v];
  const Vec2 reflected = stage.reflect(ground(start));
  const Vec3 target(reflected.x(), reflected.y(), start.z());

  const double dt = sim.params().dt;
  const double dist = (target - start).norm();
  // Half-ellipse perimeter (Ramanujan) for the duration estimate.
  const double a = 0.5 * dist, b = params.arc_height_ratio * dist;
  const double arc_len = 0.5 * std::numbers::pi * (3.0 * (a + b) - std::sqrt((3.0 * a + b) * (a + 3.0 * b)));
  const auto move_steps = static_cast<std::size_t>(std::max(1.0, std::ceil(arc_len / params.speed / dt)));
  const auto settle_steps = static_cast<std::size_t>(std::llround(params.settle_time / dt));
  const GraspPlan plan = plan_arc(start, target, move_steps + 1, params.arc_height_ratio);
  const std::size_t total = move_steps + settle_steps;

  Trajectory traj;
  traj.stage = stage.id;
  traj.frame_period = static_cast<double>(total) * dt / static_cast<double>(frame_count - 1);
  traj.frames.reserve(frame_count);
  traj.frames.push_back(sim.observe(n_obs));

  sim.grasp(v);
  std::size_t next_frame = 1;
  for (std::size_t s = 1; s <= total; ++s) {
    if (s <= move_steps) {
      sim.move_grasp(v, plan.samples[s]);
    }
    sim.step();
    if (s == move_steps) sim.release(v);
    while (next_frame < frame_count &&
           s == static_cast<std::size_t>(std::llround(static_cast<double>(next_frame * total) /
                                                      static_cast<double>(frame_count - 1)))) {
      traj.frames.push_back(sim.observe(n_obs));
      ++next_frame;
    }
  }
  while (traj.frames.size() < frame_count) traj.frames.push_back(sim.observe(n_obs));
  return traj;
}

}  // namespace metafold
