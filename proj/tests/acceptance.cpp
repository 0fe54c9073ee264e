// Acceptance suite: `acceptance N` checks criterion N and prints one
// PASS/FAIL line for it; without an argument every criterion runs in order.
// Detail lines are indented. Exit status is 0 only if everything checked passed.

#include <bit>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "metafold/metafold.hpp"

using namespace metafold;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void detail(const char* fmt, auto... args) {
  std::printf("  ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

// ---------------------------------------------------------------- criterion 1

bool folding_quality() {
  const EpisodeConfig cfg;
  const auto t0 = Clock::now();
  bool ok = true;
  for (Category c : kAllCategories) {
    const auto t = Clock::now();
    const auto s = summarize(run_suite(template_garments(c, 20), cfg));
    const double area_max = c == Category::Pants || c == Category::LongSleeve ? 0.35 : 0.50;
    const bool pass = s.rectangularity >= 0.80 && s.area_ratio <= area_max;
    ok = ok && pass;
    detail("%-12s rectangularity %.3f (>= 0.80)  area ratio %.3f (<= %.2f)  success %.2f  %.0f s  %s",
           std::string(to_string(c)).c_str(), s.rectangularity, s.area_ratio, area_max, s.success_rate,
           seconds_since(t), pass ? "ok" : "miss");
  }
  const double total = seconds_since(t0);
  detail("runtime %.0f s (<= 600 s)", total);
  return ok && total <= 600.0;
}

// ---------------------------------------------------------------- criterion 2

bool ablation_ordering() {
  const auto rows = run_ablation(template_garments(Category::ShortSleeve, 20), ablation_variants());
  std::map<std::string, double> sr;
  for (const auto& r : rows) {
    sr[r.variant] = r.summary.success_rate;
    detail("%-9s success %.2f  rectangularity %.3f  area ratio %.3f", r.variant.c_str(), r.summary.success_rate,
           r.summary.rectangularity, r.summary.area_ratio);
  }
  const double ours = sr["Ours"], k15 = sr["15f"], k5 = sr["5f"], next = sr["NextStep"], open = sr["w-o-CL"];
  const bool order = ours > k15 && k15 > k5 && k15 > next && k5 > open && next > open;
  detail("Ours > 15f > {5f, NextStep} > w-o-CL: %s;  w-o-CL <= 0.3: %s", order ? "yes" : "no",
         open <= 0.3 ? "yes" : "no");
  return order && open <= 0.3;
}

// ---------------------------------------------------------------- criterion 3

// Two tight blobs one metre apart with identical flow; the one at the origin
// holds three quarters of the points, so it gets three quarters of the proposals.
std::pair<PointCloudFrame, PointCloudFrame> three_to_one(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.004, 0.004);
  PointCloudFrame a;
  for (int i = 0; i < 120; ++i) a.points.emplace_back(u(rng), u(rng), 0.0);
  for (int i = 0; i < 40; ++i) a.points.emplace_back(1.0 + u(rng), u(rng), 0.0);
  std::shuffle(a.points.begin(), a.points.end(), rng);
  PointCloudFrame b = a;
  for (auto& p : b.points) p += Vec3(0.0, 0.1, 0.05);
  return {a, b};
}

bool ensemble_contract() {
  bool ok = true;
  for (std::size_t seeds : {1, 40, 160}) {
    for (double eps : {0.01, 0.03}) {
      EnsembleConfig cfg;
      cfg.seeds = seeds;
      cfg.epsilon = eps;
      std::mt19937_64 rng(1000 * seeds + static_cast<std::uint64_t>(eps * 1000));
      int majority = 0;
      for (int run = 0; run < 100; ++run) {
        const auto [a, b] = three_to_one(rng);
        majority += synthesize(a, b, cfg).p.x() < 0.5 ? 1 : 0;
      }
      detail("seeds %3zu  epsilon %.2f  majority %d/100", seeds, eps, majority);
      ok = ok && majority == 100;
    }
  }
  const bool default_seeds = EnsembleConfig{}.seeds == 160;
  detail("default seeds 160: %s", default_seeds ? "yes" : "no");
  return ok && default_seeds;
}

// ---------------------------------------------------------------- criterion 4

bool metric_oracles() {
  const auto rect = fixtures::rectangle(0.4, 0.6);
  const double r_rect = rectangularity(rect.v, rect.t);
  const auto folded = fixtures::half_folded(rect);
  const double half = area_ratio(folded.v, rect.v, rect.t);
  const auto tri = fixtures::equilateral(0.5);
  const double r_tri = rectangularity(tri.v, tri.t);
  const double target = 1.0 / std::sqrt(3.0);
  bool ok = std::abs(r_rect - 1.0) <= 0.02 && std::abs(half - 0.5) <= 0.03;
  detail("rectangle rectangularity %.4f (1.0 +- 0.02)", r_rect);
  detail("half-fold area ratio %.4f (0.5 +- 0.03)", half);
  const bool tri_ok = std::abs(r_tri - target) <= 0.02;
  detail("equilateral rectangularity %.4f (%.4f +- 0.02) %s", r_tri, target, tri_ok ? "ok" : "miss");
  ok = ok && tri_ok;
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const auto m = fixtures::random_planar(rng);
    const double mc = fixtures::monte_carlo_area(m, 1'000'000, 500 + k);
    worst = std::max(worst, std::abs(projected_area(m.v, m.t) / mc - 1.0));
  }
  detail("projected area vs Monte-Carlo, worst relative error over 10 meshes %.4f (<= 0.02)", worst);
  return ok && worst <= 0.02;
}

// ---------------------------------------------------------------- criterion 5

GarmentMesh coarse(Category c) {
  GarmentSpec s = GarmentSpec::defaults(c);
  s.resolution = 0.04;
  return build_garment(s);
}

bool simulator_invariants() {
  bool ok = true;
  double strain = 0.0;
  for (Category c : kAllCategories) {
    ClothSim sim(build_garment(GarmentSpec::defaults(c)));
    sim.settle(2.0);
    strain = std::max(strain, sim.max_strain());
  }
  detail("settled strain, worst category %.4f (<= 0.02)", strain);
  ok = ok && strain <= 0.02;

  SimParams free_fall;
  free_fall.ground = false;
  free_fall.damping = 0.0;
  ClothSim ball(coarse(Category::NoSleeve), free_fall);
  const Vec3 c0 = centroid(ball.positions());
  ball.step();
  const Vec3 d = centroid(ball.positions()) - c0;
  const double err = (d - Vec3(0, 0, -0.5 * 9.81 * free_fall.dt * free_fall.dt)).norm();
  detail("ballistic step error %.2e (<= 1e-9)", err);
  ok = ok && err <= 1e-9;

  // 10,000 random grasp commands; the second run must match bit for bit.
  auto random_run = [](double& lowest) {
    ClothSim sim(coarse(Category::ShortSleeve));
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> vert(0, sim.state().size() - 1);
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    lowest = 1e300;
    for (int k = 0; k < 10'000; ++k) {
      if (k % 100 == 0) {
        sim.release_all();
        sim.grasp(vert(rng));
      }
      const auto v = *sim.held();
      sim.move_grasp(v, sim.positions()[v] + Vec3(u(rng), u(rng), u(rng)));
      sim.step();
      for (const auto& p : sim.positions()) lowest = std::min(lowest, p.z());
    }
    return sim.positions();
  };
  double low_a = 0.0, low_b = 0.0;
  const auto a = random_run(low_a), b = random_run(low_b);
  bool same = a.size() == b.size();
  for (std::size_t i = 0; same && i < a.size(); ++i) {
    for (int k = 0; k < 3; ++k) same = same && std::bit_cast<std::uint64_t>(a[i][k]) == std::bit_cast<std::uint64_t>(b[i][k]);
  }
  const double floor = SimParams{}.thickness - 1e-6;
  detail("repeat run bit-identical: %s", same ? "yes" : "no");
  detail("lowest vertex over 10000 random steps %.6f m (>= %.6f)", low_a, floor);
  return ok && same && low_a >= floor;
}

// ---------------------------------------------------------------- criterion 6

double box_area_at(const std::vector<Vec2>& p, double theta) {
  const Vec2 u(std::cos(theta), std::sin(theta)), w(-u.y(), u.x());
  double lu = 1e300, hu = -1e300, lw = 1e300, hw = -1e300;
  for (const auto& q : p) {
    lu = std::min(lu, u.dot(q));
    hu = std::max(hu, u.dot(q));
    lw = std::min(lw, w.dot(q));
    hw = std::max(hw, w.dot(q));
  }
  return (hu - lu) * (hw - lw);
}

// 1e-4 rad sweep over a quarter turn, tightened by ternary search.
double sweep_min_area(const std::vector<Vec2>& p) {
  const double step = 1e-4;
  double best = 1e300, best_t = 0.0;
  for (double t = 0.0; t < std::numbers::pi / 2; t += step) {
    const double a = box_area_at(p, t);
    if (a < best) best = a, best_t = t;
  }
  double lo = best_t - step, hi = best_t + step;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (box_area_at(p, m1) < box_area_at(p, m2)) hi = m2; else lo = m1;
  }
  return std::min(best, box_area_at(p, 0.5 * (lo + hi)));
}

bool geometry_oracles() {
  std::mt19937_64 rng(66);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> stretch(0.1, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double s = stretch(rng);
    std::vector<Vec2> pts;
    for (int i = 0; i < 40; ++i) pts.emplace_back(g(rng), s * g(rng));
    const double calipers = min_area_rect(convex_hull_2d(pts)).area;
    worst = std::max(worst, std::abs(calipers / sweep_min_area(pts) - 1.0));
  }
  detail("min_area_rect vs sweep, worst relative error over 100 hulls %.2e (<= 1e-6)", worst);

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> size(1, 64);
  auto cloud = [&](int n) {
    std::vector<Vec3> c;
    for (int i = 0; i < n; ++i) c.emplace_back(u(rng), u(rng), u(rng));
    return c;
  };
  int symmetric = 0, identity = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = cloud(size(rng)), b = cloud(size(rng));
    symmetric += chamfer_distance(a, b) == chamfer_distance(b, a) ? 1 : 0;
    identity += chamfer_distance(a, a) == 0.0 ? 1 : 0;
  }
  detail("chamfer symmetric %d/1000, zero on identical clouds %d/1000", symmetric, identity);
  return worst <= 1e-6 && symmetric == 1000 && identity == 1000;
}

// ---------------------------------------------------------------- criterion 7

struct Paraphrase {
  Category category;
  const char* text;
  std::vector<StageId> expected;
};

// Synonym substitutions of the lexicon's descriptions; none of these strings
// appears in the lexicon.
std::vector<Paraphrase> held_out_paraphrases() {
  using enum StageId;
  using enum Category;
  return {
      {ShortSleeve, "tuck the left arm in", {LeftSleeve}},
      {ShortSleeve, "fold the right arm toward the middle", {RightSleeve}},
      {ShortSleeve, "bring the left arm over the body", {LeftSleeve}},
      {ShortSleeve, "put the right sleeve across the shirt", {RightSleeve}},
      {ShortSleeve, "lift the hem up to the neck", {BottomUp}},
      {ShortSleeve, "fold the lower half up", {BottomUp}},
      {ShortSleeve, "turn the base up toward the top", {BottomUp}},
      {ShortSleeve, "fold the left arm in, then the right arm, then bring the hem up", {LeftSleeve, RightSleeve, BottomUp}},
      {ShortSleeve, "first the right arm, afterwards the left arm, finally the lower part", {RightSleeve, LeftSleeve, BottomUp}},
      {ShortSleeve, "please fold the tee in half", {BottomUp}},
      {LongSleeve, "fold the left sleeves to the centre", {LeftSleeve}},
      {LongSleeve, "move the right arm onto the body", {RightSleeve}},
      {LongSleeve, "fold the left arm, next the right arm, lastly the hem", {LeftSleeve, RightSleeve, BottomUp}},
      {Pants, "fold the left trouser leg onto the right one", {LeftLegOntoRight}},
      {Pants, "place the right pant leg over the left", {RightLegOntoLeft}},
      {Pants, "fold the left leg over, then fold the trousers in half", {LeftLegOntoRight, BottomUp}},
      {Pants, "flip the right leg onto the left leg", {RightLegOntoLeft}},
      {Pants, "bring the lower part of the jeans up", {BottomUp}},
      {NoSleeve, "fold the vest in half", {BottomUp}},
      {NoSleeve, "lift the lower half of the tank top up to the collar", {BottomUp}},
  };
}

bool language_generalization() {
  const Lexicon lex = Lexicon::defaults();
  int canon_ok = 0, canon_total = 0;
  for (const auto& [text, id] : lex.descriptions()) {
    ++canon_total;
    const Category c = id == StageId::LeftLegOntoRight || id == StageId::RightLegOntoLeft ? Category::Pants
                                                                                           : Category::ShortSleeve;
    try {
      canon_ok += parse(text, c, lex).stages == std::vector<StageId>{id} ? 1 : 0;
    } catch (const Error& e) {
      detail("canonical '%s': %s", text.c_str(), e.what());
    }
  }
  detail("canonical descriptions %d/%d", canon_ok, canon_total);

  const auto list = held_out_paraphrases();
  int para_ok = 0;
  for (const auto& p : list) {
    bool good = false;
    try {
      good = parse(p.text, p.category, lex).stages == p.expected;
    } catch (const Error& e) {
      detail("paraphrase '%s': %s", p.text, e.what());
    }
    if (!good) detail("paraphrase '%s' misparsed", p.text);
    para_ok += good ? 1 : 0;
  }
  const double frac = static_cast<double>(para_ok) / static_cast<double>(list.size());
  detail("held-out paraphrases %d/%zu = %.2f (>= 0.90)", para_ok, list.size(), frac);

  const EpisodeConfig cfg;
  const auto res = run_episode(GarmentSpec::defaults(Category::ShortSleeve),
                               "fold the bottom up, then the left sleeve, then the right sleeve", lex, cfg);
  std::string order;
  for (StageId s : res.stages) order += std::string(order.empty() ? "" : " ") + std::string(to_string(s));
  const bool episode_ok = res.stages == std::vector<StageId>{StageId::BottomUp, StageId::LeftSleeve,
                                                             StageId::RightSleeve} &&
                          !res.error && res.report.success;
  detail("bottom-left-right episode [%s]: rectangularity %.3f  area ratio %.3f  success %s", order.c_str(),
         res.report.rectangularity, res.report.area_ratio, res.report.success ? "yes" : "no");
  return canon_ok == canon_total && frac >= 0.90 && episode_ok;
}

// ---------------------------------------------------------------- criterion 8

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

bool dataset_pipeline() {
  const fs::path root = fs::temp_directory_path() / "metafold_acceptance_dataset";
  fs::remove_all(root);
  bool ok = true;

  DatasetRecipe small;
  small.garments_per_category = 1;
  small.points = 128;
  small.frames = 10;
  const Manifest a = generate_dataset(small, root / "a");
  generate_dataset(small, root / "b");
  bool same = slurp(root / "a" / "manifest.json") == slurp(root / "b" / "manifest.json");
  bool round_trip = true;
  for (const auto& e : a.records) {
    const std::string bytes = slurp(root / "a" / e.file);
    same = same && bytes == slurp(root / "b" / e.file);
    std::istringstream is(bytes);
    std::ostringstream os;
    write_record(os, read_record(is));
    round_trip = round_trip && os.str() == bytes;
  }
  detail("same seed, %zu records: byte-identical %s, write(read(file)) == file %s", a.records.size(),
         same ? "yes" : "no", round_trip ? "yes" : "no");
  ok = same && round_trip;

  const DatasetRecipe full;
  const auto t0 = Clock::now();
  const Manifest m = generate_dataset(full, root / "full");
  const double secs = seconds_since(t0);
  const auto problems = verify_dataset(root / "full");
  std::size_t expected = 0;
  for (Category c : full.categories) expected += full.garments_per_category * default_stage_sequence(c).size();
  const bool counts = m.records.size() == expected && m.skipped.empty() &&
                      m.count(Split::Train) + m.count(Split::Test) == m.records.size() && problems.empty();
  detail("%zu garments: %zu records (expected %zu; %zu train, %zu test, %zu skipped), %zu problems, %.0f s (<= 900 s)",
         full.garments_per_category * full.categories.size(), m.records.size(), expected, m.count(Split::Train),
         m.count(Split::Test), m.skipped.size(), problems.size(), secs);
  for (const auto& p : problems) detail("%s", p.c_str());
  fs::remove_all(root);
  return ok && counts && secs <= 900.0;
}

const std::vector<std::pair<const char*, std::function<bool()>>>& criteria() {
  static const std::vector<std::pair<const char*, std::function<bool()>>> list{
      {"template-suite folding quality", folding_quality},
      {"ablation ordering", ablation_ordering},
      {"ensemble majority contract", ensemble_contract},
      {"metric oracles", metric_oracles},
      {"simulator invariants", simulator_invariants},
      {"geometry oracles", geometry_oracles},
      {"language generalization", language_generalization},
      {"dataset pipeline", dataset_pipeline},
  };
  return list;
}

bool run(std::size_t n) {
  const auto& [name, fn] = criteria().at(n - 1);
  std::printf("criterion %zu (%s)\n", n, name);
  std::fflush(stdout);
  bool pass = false;
  try {
    pass = fn();
  } catch (const std::exception& e) {
    detail("error: %s", e.what());
  }
  std::printf("%s criterion %zu: %s\n", pass ? "PASS" : "FAIL", n, name);
  std::fflush(stdout);
  return pass;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t count = criteria().size();
  if (argc > 2) {
    std::fprintf(stderr, "usage: acceptance [1-%zu]\n", count);
    return 2;
  }
  if (argc == 2) {
    const long n = std::strtol(argv[1], nullptr, 10);
    if (n < 1 || static_cast<std::size_t>(n) > count) {
      std::fprintf(stderr, "usage: acceptance [1-%zu]\n", count);
      return 2;
    }
    return run(static_cast<std::size_t>(n)) ? 0 : 1;
  }
  bool all = true;
  for (std::size_t n = 1; n <= count; ++n) all = run(n) && all;
  return all ? 0 : 1;
}
