#pragma once

// Evaluation suites: jittered template garments per category and the
// closed-loop ablation grid over modes and cadences.

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "metafold/dataset.hpp"
#include "metafold/executor.hpp"
#include "metafold/metrics.hpp"

namespace metafold {

/// `count` jittered copies of the category template. Seeds follow the dataset
/// scheme under a separate base so suites never reuse training garments.
inline std::vector<GarmentSpec> template_garments(Category c, std::size_t count, std::uint64_t seed = 0x5eed,
                                                  double jitter = 0.1) {
  std::vector<GarmentSpec> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(GarmentSpec::defaults(c).jittered(garment_seed(seed, c, i), jitter));
  }
  return out;
}

inline std::vector<FoldReport> run_suite(const std::vector<GarmentSpec>& garments, const EpisodeConfig& cfg,
                                         unsigned threads = 0) {
  std::vector<EpisodeTask> tasks;
  for (const auto& g : garments) tasks.push_back({g, default_stage_sequence(g.category), cfg});
  std::vector<FoldReport> reports;
  for (const auto& r : run_batch(tasks, threads)) reports.push_back(r.report);
  return reports;
}

struct AblationVariant {
  std::string name;
  EpisodeConfig config;
};

/// The full method and its ablations: other cadences, single-step
/// prediction, and no re-observation.
inline std::vector<AblationVariant> ablation_variants(const EpisodeConfig& base = {}) {
  std::vector<AblationVariant> v;
  auto add = [&](std::string name, Mode mode, std::size_t cadence) {
    EpisodeConfig c = base;
    c.mode = mode;
    c.cadence = cadence;
    v.push_back({std::move(name), c});
  };
  add("Ours", Mode::ClosedLoop, 10);
  add("5f", Mode::ClosedLoop, 5);
  add("15f", Mode::ClosedLoop, 15);
  add("NextStep", Mode::NextStep, 1);
  add("w-o-CL", Mode::OpenLoop, 10);
  return v;
}

struct AblationRow {
  std::string variant;
  MetricSummary summary;
};

inline std::vector<AblationRow> run_ablation(const std::vector<GarmentSpec>& garments,
                                             const std::vector<AblationVariant>& variants, unsigned threads = 0,
                                             std::ostream* progress = nullptr) {
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    const auto reports = run_suite(garments, v.config, threads);
    rows.push_back({v.name, summarize(reports)});
    if (progress) *progress << v.name << ": success " << rows.back().summary.success_rate << '\n';
  }
  return rows;
}

/// One row per variant: variant,rectangularity,area_ratio,success_rate,episodes.
inline void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(4);
  ss << "variant,rectangularity,area_ratio,success_rate,episodes\n";
  for (const auto& r : rows) {
    ss << r.variant << ',' << r.summary.rectangularity << ',' << r.summary.area_ratio << ','
       << r.summary.success_rate << ',' << r.summary.count << '\n';
  }
  os << ss.str();
}

}  // namespace metafold
