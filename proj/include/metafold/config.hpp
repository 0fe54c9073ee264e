#pragma once

// Plain key=value configuration for the simulator, ensemble, thresholds and
// episode settings. Blank lines and lines starting with '#' are ignored.
//
//   sim.bend_compliance = 1.0
//   ensemble.seeds = 160
//   episode.mode = closed-loop
//   output_dir = runs/today

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>

#include "metafold/dataset.hpp"
#include "metafold/error.hpp"
#include "metafold/executor.hpp"

namespace metafold {

inline constexpr const char* kOutDirEnv = "METAFOLD_OUT_DIR";

struct Config {
  std::map<std::string, std::string> values;

  std::optional<std::string> get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    return it->second;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw Error(ErrorCode::BadConfig, key + ": not a number: " + v);
  }
  return out;
}

inline long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw Error(ErrorCode::BadConfig, key + ": not an integer: " + v);
  return out;
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
  const long long n = to_int(key, v);
  if (n < 0) throw Error(ErrorCode::BadConfig, key + ": must be >= 0");
  return static_cast<std::size_t>(n);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::BadConfig, key + ": not a boolean: " + v);
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

inline std::map<std::string, Setter> sim_setters(SimParams& p, const std::string& prefix = "sim.") {
  return {
      {prefix + "dt", [&p](auto& k, auto& v) { p.dt = to_double(k, v); }},
      {prefix + "substeps", [&p](auto& k, auto& v) { p.substeps = static_cast<int>(to_int(k, v)); }},
      {prefix + "iterations", [&p](auto& k, auto& v) { p.iterations = static_cast<int>(to_int(k, v)); }},
      {prefix + "stretch_compliance", [&p](auto& k, auto& v) { p.stretch_compliance = to_double(k, v); }},
      {prefix + "bend_compliance", [&p](auto& k, auto& v) { p.bend_compliance = to_double(k, v); }},
      {prefix + "damping", [&p](auto& k, auto& v) { p.damping = to_double(k, v); }},
      {prefix + "friction", [&p](auto& k, auto& v) { p.friction = to_double(k, v); }},
      {prefix + "thickness", [&p](auto& k, auto& v) { p.thickness = to_double(k, v); }},
      {prefix + "areal_density", [&p](auto& k, auto& v) { p.areal_density = to_double(k, v); }},
      {prefix + "tethers", [&p](auto& k, auto& v) { p.tethers = to_bool(k, v); }},
      {prefix + "ground", [&p](auto& k, auto& v) { p.ground = to_bool(k, v); }},
      {prefix + "gravity_z", [&p](auto& k, auto& v) { p.gravity.z() = to_double(k, v); }},
  };
}

}  // namespace detail

/// Reads key=value lines. Malformed lines raise ParseError with the line number.
inline Config read_config(std::istream& is) {
  Config cfg;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "line " + std::to_string(n) + ": expected key=value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::ParseError, "line " + std::to_string(n) + ": empty key");
    cfg.values[key] = detail::trim(std::string_view(t).substr(eq + 1));
  }
  return cfg;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_config(is);
}

/// Applies every `sim.*`, `ensemble.*`, `thresholds.*` and `episode.*` key.
/// Keys outside those groups are left for other consumers; unknown keys
/// inside them raise BadConfig.
inline void apply_config(const Config& cfg, EpisodeConfig& ep) {
  using namespace detail;
  auto setters = sim_setters(ep.sim);
  auto& e = ep;
  setters["ensemble.seeds"] = [&e](auto& k, auto& v) { e.ensemble.seeds = to_count(k, v); };
  setters["ensemble.epsilon"] = [&e](auto& k, auto& v) { e.ensemble.epsilon = to_double(k, v); };
  setters["ensemble.beta"] = [&e](auto& k, auto& v) { e.ensemble.beta = to_double(k, v); };
  setters["thresholds.min_rectangularity"] = [&e](auto& k, auto& v) { e.thresholds.min_rectangularity = to_double(k, v); };
  setters["thresholds.max_area_ratio"] = [&e](auto& k, auto& v) { e.thresholds.max_area_ratio = to_double(k, v); };
  setters["episode.mode"] = [&e](auto& k, auto& v) {
    auto m = parse_mode(v);
    if (!m) throw Error(ErrorCode::BadConfig, k + ": unknown mode " + v);
    e.mode = *m;
  };
  setters["episode.backend"] = [&e](auto& k, auto& v) {
    auto b = parse_backend(v);
    if (!b) throw Error(ErrorCode::BadConfig, k + ": unknown backend " + v);
    e.backend = *b;
  };
  setters["episode.cadence"] = [&e](auto& k, auto& v) { e.cadence = to_count(k, v); };
  setters["episode.delta"] = [&e](auto& k, auto& v) { e.delta = to_double(k, v); };
  setters["episode.budget"] = [&e](auto& k, auto& v) { e.budget = to_count(k, v); };
  setters["episode.frames"] = [&e](auto& k, auto& v) { e.frames = to_count(k, v); };
  setters["episode.points"] = [&e](auto& k, auto& v) { e.points = to_count(k, v); };
  setters["episode.max_step"] = [&e](auto& k, auto& v) { e.max_step = to_double(k, v); };
  setters["episode.arc_height_ratio"] = [&e](auto& k, auto& v) { e.arc_height_ratio = to_double(k, v); };
  setters["episode.frame_period"] = [&e](auto& k, auto& v) { e.frame_period = to_double(k, v); };
  setters["episode.max_speed"] = [&e](auto& k, auto& v) { e.max_speed = to_double(k, v); };
  setters["episode.settle_time"] = [&e](auto& k, auto& v) { e.settle_time = to_double(k, v); };
  setters["episode.initial_settle"] = [&e](auto& k, auto& v) { e.initial_settle = to_double(k, v); };
  setters["episode.sticky_grasp"] = [&e](auto& k, auto& v) { e.sticky_grasp = to_bool(k, v); };
  setters["episode.sticky_ratio"] = [&e](auto& k, auto& v) { e.sticky_ratio = to_double(k, v); };
  setters["episode.paced_replan"] = [&e](auto& k, auto& v) { e.paced_replan = to_bool(k, v); };
  setters["episode.hold_grasp"] = [&e](auto& k, auto& v) { e.hold_grasp = to_bool(k, v); };
  setters["hinge.layer_thickness"] = [&e](auto& k, auto& v) { e.hinge.layer_thickness = to_double(k, v); };
  setters["hinge.side_tolerance"] = [&e](auto& k, auto& v) { e.hinge.side_tolerance = to_double(k, v); };
  setters["hinge.lift_tolerance"] = [&e](auto& k, auto& v) { e.hinge.lift_tolerance = to_double(k, v); };

  for (const auto& [key, value] : cfg.values) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    const std::string group = key.substr(0, dot);
    if (group != "sim" && group != "ensemble" && group != "thresholds" && group != "episode" && group != "hinge") continue;
    auto it = setters.find(key);
    if (it == setters.end()) throw Error(ErrorCode::BadConfig, "unknown key " + key);
    it->second(key, value);
  }
  ep.validate();
}

/// Applies `sim.*` and `dataset.*` keys to a dataset recipe.
inline void apply_config(const Config& cfg, DatasetRecipe& r) {
  using namespace detail;
  auto setters = sim_setters(r.sim);
  setters["dataset.name"] = [&r](auto&, auto& v) { r.name = v; };
  setters["dataset.garments_per_category"] = [&r](auto& k, auto& v) { r.garments_per_category = to_count(k, v); };
  setters["dataset.seed"] = [&r](auto& k, auto& v) { r.seed = static_cast<std::uint64_t>(to_count(k, v)); };
  setters["dataset.jitter"] = [&r](auto& k, auto& v) { r.jitter = to_double(k, v); };
  setters["dataset.resolution"] = [&r](auto& k, auto& v) { r.resolution = to_double(k, v); };
  setters["dataset.points"] = [&r](auto& k, auto& v) { r.points = to_count(k, v); };
  setters["dataset.frames"] = [&r](auto& k, auto& v) { r.frames = to_count(k, v); };
  setters["dataset.annotations_per_stage"] = [&r](auto& k, auto& v) { r.annotations_per_stage = to_count(k, v); };
  setters["dataset.arc_height_ratio"] = [&r](auto& k, auto& v) { r.rollout.arc_height_ratio = to_double(k, v); };
  setters["dataset.speed"] = [&r](auto& k, auto& v) { r.rollout.speed = to_double(k, v); };
  setters["dataset.threads"] = [&r](auto& k, auto& v) { r.threads = static_cast<unsigned>(to_count(k, v)); };
  for (const auto& [key, value] : cfg.values) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    const std::string group = key.substr(0, dot);
    if (group != "sim" && group != "dataset") continue;
    auto it = setters.find(key);
    if (it == setters.end()) throw Error(ErrorCode::BadConfig, "unknown key " + key);
    it->second(key, value);
  }
  r.validate();
}

/// Output directory: an explicit value wins, then $METAFOLD_OUT_DIR, then the
/// config file's `output_dir`, then `fallback`.
inline std::filesystem::path resolve_output_dir(const std::optional<std::string>& explicit_dir, const Config& cfg,
                                                const std::filesystem::path& fallback) {
  if (explicit_dir && !explicit_dir->empty()) return *explicit_dir;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
  if (auto v = cfg.get("output_dir"); v && !v->empty()) return *v;
  return fallback;
}

}  // namespace metafold
