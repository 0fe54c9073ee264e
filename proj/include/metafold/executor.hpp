#pragma once

// Closed-loop fold execution: observe, plan a stage trajectory, slice it,
// synthesize one contact action, execute it in the simulator, repeat. The
// open-loop and next-step modes reuse the same pieces for ablations.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "metafold/cloth_sim.hpp"
#include "metafold/contact.hpp"
#include "metafold/error.hpp"
#include "metafold/garment.hpp"
#include "metafold/geometry.hpp"
#include "metafold/instruction.hpp"
#include "metafold/metrics.hpp"
#include "metafold/planner.hpp"

namespace metafold {

enum class Mode { ClosedLoop, OpenLoop, NextStep };
enum class PlannerBackend { Hinge, Rollout };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::ClosedLoop: return "closed-loop";
    case Mode::OpenLoop: return "open-loop";
    case Mode::NextStep: return "next-step";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "closed-loop" || s == "closed") return Mode::ClosedLoop;
  if (s == "open-loop" || s == "open") return Mode::OpenLoop;
  if (s == "next-step") return Mode::NextStep;
  return std::nullopt;
}

inline std::string_view to_string(PlannerBackend b) { return b == PlannerBackend::Hinge ? "hinge" : "rollout"; }

inline std::optional<PlannerBackend> parse_backend(std::string_view s) {
  if (s == "hinge") return PlannerBackend::Hinge;
  if (s == "rollout") return PlannerBackend::Rollout;
  return std::nullopt;
}

struct EpisodeConfig {
  Mode mode = Mode::ClosedLoop;
  /// Trajectory frames executed per action.
  std::size_t cadence = 10;
  /// Chamfer distance to the stage goal that ends a stage, m.
  double delta = 0.005;
  /// Actions allowed per stage.
  std::size_t budget = 12;
  EnsembleConfig ensemble;
  PlannerBackend backend = PlannerBackend::Hinge;
  /// Frames per planned stage trajectory.
  std::size_t frames = 30;
  /// Observation size, capped at the vertex count.
  std::size_t points = 256;
  /// Longest single grasp displacement, m.
  double max_step = 0.3;
  /// Bulge of the executed micro-arc relative to its chord.
  double arc_height_ratio = 0.2;
  /// Time represented by one trajectory frame, s.
  double frame_period = 0.1;
  /// Upper bound on grasp speed, m/s.
  double max_speed = 0.25;
  /// Time allowed for the cloth to come to rest after the final release, s.
  double settle_time = 1.0;
  /// Initial settle of a freshly built garment, s.
  double initial_settle = 1.0;
  /// Keep pulling the held vertex while its planned flow is at least
  /// `sticky_ratio` of the slice's largest flow.
  bool sticky_grasp = true;
  double sticky_ratio = 0.3;
  /// Replanned trajectories get frames in proportion to the fold angle still
  /// remaining, so a slice of K frames keeps covering the same angle.
  bool paced_replan = true;
  /// Keep the gripper closed between consecutive actions.
  bool hold_grasp = true;
  /// Five constraint iterations instead of the simulator default of ten keep
  /// a template suite within a few minutes on one core.
  SimParams sim = [] {
    SimParams p;
    p.iterations = 5;
    return p;
  }();
  HingeParams hinge;
  MetricThresholds thresholds;

  void validate() const {
    if (cadence < 1) throw Error(ErrorCode::BadConfig, "cadence must be >= 1");
    if (!(delta > 0.0)) throw Error(ErrorCode::BadConfig, "delta must be positive");
    if (budget < 1) throw Error(ErrorCode::BadConfig, "budget must be >= 1");
    if (frames < 2) throw Error(ErrorCode::BadConfig, "frames must be >= 2");
    if (points < 1) throw Error(ErrorCode::BadConfig, "points must be >= 1");
    if (!(max_step > 0.0) || !(max_speed > 0.0) || !(frame_period > 0.0)) {
      throw Error(ErrorCode::BadConfig, "max_step, max_speed and frame_period must be positive");
    }
    if (!(arc_height_ratio >= 0.0)) throw Error(ErrorCode::BadConfig, "arc_height_ratio must be >= 0");
    ensemble.validate();
    sim.validate();
    thresholds.validate();
  }
};

struct ActionRecord {
  StageId stage = StageId::BottomUp;
  std::size_t index = 0;
  std::uint64_t observation_hash = 0;
  ContactAction action;
  std::size_t contact_vertex = 0;
  /// Position of the grasped vertex when the action started.
  Vec3 grasp_position = Vec3::Zero();
  double chamfer_before = 0.0;
  double chamfer_after = 0.0;
};

struct StageOutcome {
  StageId stage = StageId::BottomUp;
  bool converged = false;
  std::size_t actions = 0;
  double chamfer = 0.0;
  std::optional<ErrorCode> error;
};

struct EpisodeLog {
  std::vector<ActionRecord> actions;
  std::vector<StageOutcome> stages;
  std::optional<FoldReport> report;
};

/// FNV-1a over the raw coordinate bytes.
inline std::uint64_t hash_frame(const PointCloudFrame& f) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : f.points) {
    for (int k = 0; k < 3; ++k) {
      unsigned char b[sizeof(double)];
      const double v = p[k];
      std::memcpy(b, &v, sizeof v);
      for (unsigned char c : b) {
        h ^= c;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

namespace detail {

inline nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline std::size_t observation_size(ClothSim& sim, const EpisodeConfig& cfg) {
  return std::min(cfg.points, sim.state().size());
}

/// Moves grasped vertex `v` from where it is to `target` along a micro-arc,
/// taking at least `min_duration` and never exceeding the speed limit.
inline void move_along_arc(ClothSim& sim, std::size_t v, const Vec3& target, double min_duration,
                           const EpisodeConfig& cfg) {
  const Vec3 start = sim.positions()[v];
  Vec3 goal = target;
  goal.z() = std::max(goal.z(), sim.params().thickness);
  const double dist = (goal - start).norm();
  if (dist < 1e-3) return;
  const double dt = sim.params().dt;
  const double length = dist * (1.0 + 2.0 * cfg.arc_height_ratio);
  const double duration = std::max(min_duration, length / cfg.max_speed);
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(duration / dt - 1e-9)));
  const GraspPlan plan = plan_arc(start, goal, steps + 1, cfg.arc_height_ratio);
  for (std::size_t s = 1; s <= steps; ++s) {
    sim.move_grasp(v, plan.samples[s]);
    sim.step();
  }
}

inline void release_and_settle(ClothSim& sim, double seconds) {
  sim.release_all();
  sim.settle(seconds, 5e-3);
}

inline Trajectory plan_stage(ClothSim& sim, const PointCloudFrame& obs, const FoldStage& stage,
                             std::size_t frames, const EpisodeConfig& cfg, std::span<const std::uint8_t> mask) {
  if (cfg.backend == PlannerBackend::Rollout) {
    ClothSim scratch = sim;
    scratch.release_all();
    RolloutParams rp;
    rp.points = obs.size();
    Trajectory t = rollout_oracle_trajectory(scratch, stage, frames, rp);
    t.frames.front() = obs;
    return t;
  }
  return predict_hinge_trajectory(obs, stage, frames, cfg.hinge, mask);
}

}  // namespace detail

/// Stage goal: the analytic folded pose of the given observation.
inline PointCloudFrame stage_goal(const PointCloudFrame& obs, const FoldStage& stage, const HingeParams& hinge = {}) {
  try {
    return predict_hinge_trajectory(obs, stage, 2, hinge).final_frame();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NothingToFold) return obs;
    throw;
  }
}

/// Runs one fold stage on a settled simulator and appends its actions to the
/// log. Exhausting the action budget marks the stage as failed with
/// BudgetExhausted; numerical blow-up propagates.
inline StageOutcome run_stage(ClothSim& sim, const FoldStage& stage, const EpisodeConfig& cfg, EpisodeLog& log) {
  cfg.validate();
  StageOutcome out;
  out.stage = stage.id;
  const std::size_t n = detail::observation_size(sim, cfg);
  const auto& obs_index = sim.observation_indices(n);
  PointCloudFrame obs = sim.observe(n);
  const PointCloudFrame goal = stage_goal(obs, stage, cfg.hinge);
  const std::vector<std::uint8_t> mask = moving_mask(obs, stage, cfg.hinge.side_tolerance);
  const double step_time = static_cast<double>(cfg.cadence) * cfg.frame_period;
  const double hold_radius = 2.0 * cfg.ensemble.epsilon;

  // Keeps the current grasp when the new contact lies within 2 epsilon of it,
  // otherwise lets go and takes the vertex under p.
  auto take_grasp = [&](std::size_t vertex, const Vec3& p) -> std::size_t {
    if (auto held = sim.held(); held && (sim.positions()[*held] - p).norm() <= hold_radius) return *held;
    if (sim.held()) detail::release_and_settle(sim, 0.5);
    sim.grasp(vertex);
    return vertex;
  };

  auto record = [&](const ContactAction& a, std::size_t vertex, const Vec3& at, double before) {
    ActionRecord r;
    r.stage = stage.id;
    r.index = out.actions;
    r.observation_hash = hash_frame(obs);
    r.action = a;
    r.contact_vertex = vertex;
    r.grasp_position = at;
    r.chamfer_before = before;
    obs = sim.observe(n);
    r.chamfer_after = chamfer_distance(obs, goal);
    log.actions.push_back(r);
    ++out.actions;
  };

  if (cfg.mode == Mode::OpenLoop) {
    Trajectory traj;
    try {
      traj = detail::plan_stage(sim, obs, stage, cfg.frames, cfg, mask);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NothingToFold) throw;
      traj.converged = true;
    }
    if (!traj.converged) {
      const double before = chamfer_distance(obs, goal);
      for (const auto& a : slice_actions(traj, std::min(cfg.cadence, cfg.frames - 1), cfg.ensemble)) {
        if (out.actions >= cfg.budget) break;
        // No re-observation: the contact and its goal come from the plan alone.
        const std::size_t v = take_grasp(obs_index[a.index], a.p);
        const Vec3 at = sim.positions()[v];
        detail::move_along_arc(sim, v, a.p + std::min(a.magnitude, cfg.max_step) * a.s, step_time, cfg);
        record(a, v, at, before);
      }
    }
    detail::release_and_settle(sim, cfg.settle_time);
    obs = sim.observe(n);
    out.chamfer = chamfer_distance(obs, goal);
    out.converged = out.chamfer < cfg.delta;
    if (!out.converged) out.error = ErrorCode::BudgetExhausted;
    return out;
  }

  const std::size_t frames = cfg.mode == Mode::NextStep ? 2 : cfg.frames;
  const std::size_t cadence = std::min(cfg.cadence, frames - 1);
  double chamfer = chamfer_distance(obs, goal);
  while (true) {
    Trajectory traj;
    try {
      traj = detail::plan_stage(sim, obs, stage, frames, cfg, mask);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NothingToFold) throw;
      traj.converged = true;
    }
    if (traj.converged || chamfer_distance(obs, traj.final_frame()) < cfg.delta) {
      if (sim.held()) {
        // Judge convergence on the resting cloth, not while it hangs from the gripper.
        detail::release_and_settle(sim, 0.5);
        obs = sim.observe(n);
        continue;
      }
      out.converged = true;
      break;
    }
    if (cfg.paced_replan && cfg.mode == Mode::ClosedLoop) {
      const auto m = static_cast<std::size_t>(std::ceil(static_cast<double>(frames - 1) * traj.remaining_fraction - 1e-9)) + 1;
      if (m < frames) traj = detail::plan_stage(sim, obs, stage, std::max<std::size_t>(m, 2), cfg, mask);
    }
    const std::size_t kk = std::min(cadence, traj.frame_count() - 1);
    if (out.actions >= cfg.budget) break;
    ContactAction a;
    try {
      a = synthesize(traj.frames[0], traj.frames[kk], cfg.ensemble);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoMotion) throw;
      out.converged = true;
      break;
    }
    if (cfg.sticky_grasp && sim.held()) {
      const auto cand = detail::flow_candidates(traj.frames[0], traj.frames[kk], cfg.sticky_ratio);
      for (auto i : cand.indices) {
        if (obs_index[i] == *sim.held()) {
          a = {traj.frames[0][i], cand.flow[i].normalized(), cand.flow[i].norm(), i};
          break;
        }
      }
    }
    if (auto held = sim.held(); held && (!cfg.hold_grasp || (sim.positions()[*held] - a.p).norm() > hold_radius)) {
      // Letting go moves the cloth, so the action is replanned from a fresh observation.
      detail::release_and_settle(sim, 0.5);
      obs = sim.observe(n);
      chamfer = chamfer_distance(obs, goal);
      continue;
    }
    const std::size_t v = take_grasp(obs_index[a.index], a.p);
    const Vec3 at = sim.positions()[v];
    detail::move_along_arc(sim, v, at + std::min(a.magnitude, cfg.max_step) * a.s, step_time, cfg);
    record(a, v, at, chamfer);
    chamfer = log.actions.back().chamfer_after;
  }
  detail::release_and_settle(sim, cfg.settle_time);
  obs = sim.observe(n);
  out.chamfer = chamfer_distance(obs, goal);
  if (!out.converged) out.error = ErrorCode::BudgetExhausted;
  return out;
}

struct EpisodeResult {
  FoldReport report;
  EpisodeLog log;
  std::vector<StageId> stages;
  std::vector<Vec3> initial_positions;
  std::vector<Vec3> final_positions;
  /// Set when the episode aborted; the report then reflects the last state.
  std::optional<ErrorCode> error;
};

/// Composed analytic goal of every stage, applied to the full vertex set.
inline std::vector<Vec3> episode_goal(const std::vector<Vec3>& positions, const GarmentMesh& mesh,
                                      const std::vector<StageId>& stages, const HingeParams& hinge = {}) {
  PointCloudFrame f{positions, 0};
  for (StageId id : stages) f = stage_goal(f, make_stage(id, mesh), hinge);
  return f.points;
}

/// Builds and settles the garment, runs each stage in order and scores the
/// result. Instructions are parsed before the simulator is created.
inline EpisodeResult run_episode(const GarmentSpec& spec, const std::vector<StageId>& stages,
                                 const EpisodeConfig& cfg) {
  cfg.validate();
  GarmentMesh mesh = build_garment(spec);
  for (StageId id : stages) make_stage(id, mesh);
  ClothSim sim(mesh, cfg.sim);
  sim.settle(cfg.initial_settle);

  EpisodeResult res;
  res.stages = stages;
  res.initial_positions = sim.positions();
  const std::vector<Vec3> goal = episode_goal(res.initial_positions, mesh, stages, cfg.hinge);
  try {
    for (StageId id : stages) res.log.stages.push_back(run_stage(sim, make_stage(id, mesh), cfg, res.log));
  } catch (const Error& e) {
    res.error = e.code();
  }
  res.final_positions = sim.positions();

  const auto& idx = sim.observation_indices(detail::observation_size(sim, cfg));
  std::vector<Vec3> final_obs, goal_obs;
  for (auto i : idx) {
    final_obs.push_back(res.final_positions[i]);
    goal_obs.push_back(goal[i]);
  }
  res.report = evaluate_fold(res.initial_positions, res.final_positions, mesh.triangles, cfg.thresholds,
                             chamfer_distance(final_obs, goal_obs));
  if (res.error) res.report.success = false;
  res.log.report = res.report;
  return res;
}

inline EpisodeResult run_episode(const GarmentSpec& spec, std::string_view instruction, const Lexicon& lexicon,
                                 const EpisodeConfig& cfg) {
  const Instruction parsed = parse(instruction, spec.category, lexicon);
  return run_episode(spec, parsed.stages, cfg);
}

/// One JSON object per line: an "action" record per executed action, a
/// "stage" record per stage and a closing "report" record.
inline void write_log_jsonl(std::ostream& os, const EpisodeLog& log) {
  for (const auto& r : log.actions) {
    nlohmann::json j = {{"type", "action"},
                        {"stage", std::string(to_string(r.stage))},
                        {"index", r.index},
                        {"observation_hash", r.observation_hash},
                        {"p", detail::vec_json(r.action.p)},
                        {"s", detail::vec_json(r.action.s)},
                        {"magnitude", r.action.magnitude},
                        {"contact_vertex", r.contact_vertex},
                        {"grasp_position", detail::vec_json(r.grasp_position)},
                        {"chamfer_before", r.chamfer_before},
                        {"chamfer_after", r.chamfer_after}};
    os << j.dump() << '\n';
  }
  for (const auto& s : log.stages) {
    nlohmann::json j = {{"type", "stage"},
                        {"stage", std::string(to_string(s.stage))},
                        {"converged", s.converged},
                        {"actions", s.actions},
                        {"chamfer", s.chamfer},
                        {"error", s.error ? std::string(to_string(*s.error)) : std::string()}};
    os << j.dump() << '\n';
  }
  if (log.report) {
    const auto& r = *log.report;
    nlohmann::json j = {{"type", "report"},
                        {"rectangularity", r.rectangularity},
                        {"area_ratio", r.area_ratio},
                        {"success", r.success},
                        {"chamfer_to_goal", r.chamfer_to_goal},
                        {"initial_area", r.initial_area},
                        {"final_area", r.final_area}};
    os << j.dump() << '\n';
  }
}

/// Reads the closing report record of a JSONL episode log.
inline FoldReport read_log_report(std::istream& is) {
  std::string line;
  std::optional<FoldReport> found;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "log line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.value("type", "") != "report") continue;
    FoldReport r;
    r.rectangularity = j.at("rectangularity").get<double>();
    r.area_ratio = j.at("area_ratio").get<double>();
    r.success = j.at("success").get<bool>();
    r.chamfer_to_goal = j.at("chamfer_to_goal").get<double>();
    r.initial_area = j.at("initial_area").get<double>();
    r.final_area = j.at("final_area").get<double>();
    found = r;
  }
  if (!found) throw Error(ErrorCode::ParseError, "log has no report record");
  return *found;
}

struct EpisodeTask {
  GarmentSpec spec;
  std::vector<StageId> stages;
  EpisodeConfig config;
};

/// Runs independent episodes on `threads` workers; results keep task order.
inline std::vector<EpisodeResult> run_batch(const std::vector<EpisodeTask>& tasks, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, tasks.size())));
  std::vector<EpisodeResult> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        results[i] = run_episode(tasks[i].spec, tasks[i].stages, tasks[i].config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace metafold
