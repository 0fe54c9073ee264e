#pragma once

// Command-line front end. run_cli returns 0 on success, 1 on a usage error
// and 2 when the command itself fails.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "metafold/config.hpp"
#include "metafold/dataset.hpp"
#include "metafold/executor.hpp"
#include "metafold/instruction.hpp"
#include "metafold/metrics.hpp"
#include "metafold/suite.hpp"

namespace metafold {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Thrown for argument combinations CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Category category_arg(const std::string& s) {
  auto c = parse_category(s);
  if (!c) throw UsageError("unknown category '" + s + "'");
  return *c;
}

/// GarmentSpec from key=value lines: category plus any dimension field.
inline GarmentSpec read_garment_spec(const std::filesystem::path& path) {
  const Config cfg = load_config(path);
  auto cat = cfg.get("category");
  if (!cat) throw Error(ErrorCode::BadSpec, path.string() + ": missing category");
  auto c = parse_category(*cat);
  if (!c) throw Error(ErrorCode::BadSpec, path.string() + ": unknown category " + *cat);
  GarmentSpec s = GarmentSpec::defaults(*c);
  const std::map<std::string, double*> fields = {
      {"body_width", &s.body_width},       {"body_height", &s.body_height}, {"sleeve_length", &s.sleeve_length},
      {"sleeve_width", &s.sleeve_width},   {"leg_length", &s.leg_length},   {"leg_width", &s.leg_width},
      {"resolution", &s.resolution},
  };
  for (const auto& [k, v] : cfg.values) {
    if (k == "category") continue;
    if (k == "jitter_seed") {
      s.jitter_seed = static_cast<std::uint64_t>(to_count(k, v));
      continue;
    }
    auto it = fields.find(k);
    if (it == fields.end()) throw Error(ErrorCode::BadSpec, path.string() + ": unknown field " + k);
    *it->second = to_double(k, v);
  }
  s.validate();
  return s;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os || !(os << content)) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

inline std::string report_csv(const std::vector<std::pair<std::string, FoldReport>>& rows) {
  std::ostringstream ss;
  ss.precision(6);
  ss << "source,rectangularity,area_ratio,success,chamfer_to_goal\n";
  for (const auto& [name, r] : rows) {
    ss << name << ',' << r.rectangularity << ',' << r.area_ratio << ',' << (r.success ? 1 : 0) << ','
       << r.chamfer_to_goal << '\n';
  }
  return ss.str();
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Language-guided garment folding toolkit", "metafold"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);

  // generate-dataset
  auto* gen = app.add_subcommand("generate-dataset", "simulate fold trajectories and write records + manifest");
  std::size_t gen_garments = 10;
  std::uint64_t gen_seed = 0;
  std::optional<std::string> gen_out;
  std::vector<std::string> gen_categories;
  unsigned gen_threads = 0;
  std::size_t gen_points = 0, gen_frames = 0;
  gen->add_option("--garments-per-category", gen_garments, "garments per category")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "recipe seed");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--categories", gen_categories, "subset of categories");
  gen->add_option("--threads", gen_threads, "worker threads (0 = all cores)");
  gen->add_option("--points", gen_points, "points per frame");
  gen->add_option("--frames", gen_frames, "frames per trajectory");

  // fold
  auto* fold = app.add_subcommand("fold", "run one folding episode");
  std::string fold_category, fold_spec, fold_instruction, fold_mode = "closed-loop", fold_backend = "hinge";
  std::string fold_lexicon;
  std::optional<std::string> fold_out;
  std::size_t fold_cadence = 10, fold_seeds = 160;
  double fold_epsilon = 0.03;
  std::uint64_t fold_jitter = 0;
  bool fold_jitter_set = false;
  auto* cat_opt = fold->add_option("--category", fold_category, "garment category");
  auto* spec_opt = fold->add_option("--spec", fold_spec, "garment spec file (key=value)")->check(CLI::ExistingFile);
  cat_opt->excludes(spec_opt);
  fold->add_option("--instruction", fold_instruction, "fold instruction; default stage order when omitted");
  fold->add_option("--mode", fold_mode, "closed-loop | open-loop | next-step");
  fold->add_option("--backend", fold_backend, "hinge | rollout");
  fold->add_option("--cadence", fold_cadence, "frames per action (K)")->check(CLI::PositiveNumber);
  fold->add_option("--seeds", fold_seeds, "ensemble size")->check(CLI::PositiveNumber);
  fold->add_option("--epsilon", fold_epsilon, "ensemble grouping radius, m")->check(CLI::PositiveNumber);
  fold->add_option("--jitter-seed", fold_jitter, "jitter the template with this seed")
      ->each([&](const std::string&) { fold_jitter_set = true; });
  fold->add_option("--lexicon", fold_lexicon, "lexicon TSV")->check(CLI::ExistingFile);
  fold->add_option("--out", fold_out, "directory for log.jsonl, report.txt, initial.obj, final.obj");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score episode logs or initial/final meshes as CSV");
  std::vector<std::string> eval_logs;
  std::string eval_initial, eval_final, eval_csv;
  eval->add_option("--log", eval_logs, "episode log(s)")->check(CLI::ExistingFile);
  auto* ini = eval->add_option("--initial", eval_initial, "initial mesh (OBJ)")->check(CLI::ExistingFile);
  auto* fin = eval->add_option("--final", eval_final, "final mesh (OBJ)")->check(CLI::ExistingFile);
  ini->needs(fin);
  fin->needs(ini);
  eval->add_option("--csv", eval_csv, "write the CSV here instead of stdout");

  // render
  auto* render = app.add_subcommand("render", "export the frames of a trajectory record");
  std::string render_record, render_format = "ply";
  std::optional<std::string> render_out;
  render->add_option("--record", render_record, "record file")->required()->check(CLI::ExistingFile);
  render->add_option("--format", render_format, "ply | obj")->check(CLI::IsMember({"ply", "obj"}));
  render->add_option("--out", render_out, "output directory");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run the cadence / loop ablation grid");
  std::string ablate_suite = "template-20", ablate_csv;
  std::size_t ablate_garments = 0;
  unsigned ablate_threads = 0;
  ablate->add_option("--suite", ablate_suite, "template-<N>: N jittered short-sleeve garments");
  ablate->add_option("--garments", ablate_garments, "override the suite size");
  ablate->add_option("--threads", ablate_threads, "worker threads (0 = all cores)");
  ablate->add_option("--csv", ablate_csv, "write the CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help("", CLI::AppFormatMode::All);
    return kExitUsage;
  }

  try {
    const Config cfg = config_path.empty() ? Config{} : load_config(config_path);

    if (*gen) {
      DatasetRecipe recipe;
      apply_config(cfg, recipe);
      recipe.garments_per_category = gen_garments;
      recipe.seed = gen_seed;
      if (gen_threads) recipe.threads = gen_threads;
      if (gen_points) recipe.points = gen_points;
      if (gen_frames) recipe.frames = gen_frames;
      if (!gen_categories.empty()) {
        recipe.categories.clear();
        for (const auto& c : gen_categories) recipe.categories.push_back(detail::category_arg(c));
      }
      const auto dir = resolve_output_dir(gen_out, cfg, "dataset");
      const auto t0 = std::chrono::steady_clock::now();
      const Manifest m = generate_dataset(recipe, dir, Lexicon::defaults(), &err);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out << "wrote " << m.records.size() << " records (" << m.count(Split::Train) << " train, "
          << m.count(Split::Test) << " test, " << m.skipped.size() << " garments skipped) to " << dir.string()
          << " in " << secs << " s\n";
      return kExitOk;
    }

    if (*fold) {
      if (fold_category.empty() && fold_spec.empty()) throw UsageError("fold needs --category or --spec");
      EpisodeConfig ep;
      apply_config(cfg, ep);
      auto mode = parse_mode(fold_mode);
      if (!mode) throw UsageError("unknown mode '" + fold_mode + "'");
      auto backend = parse_backend(fold_backend);
      if (!backend) throw UsageError("unknown backend '" + fold_backend + "'");
      ep.mode = *mode;
      ep.backend = *backend;
      ep.cadence = fold_cadence;
      ep.ensemble.seeds = fold_seeds;
      ep.ensemble.epsilon = fold_epsilon;
      ep.validate();

      GarmentSpec spec = fold_spec.empty() ? GarmentSpec::defaults(detail::category_arg(fold_category))
                                           : detail::read_garment_spec(fold_spec);
      if (fold_jitter_set) spec = spec.jittered(fold_jitter);
      const Lexicon lex = fold_lexicon.empty() ? Lexicon::defaults() : Lexicon::load(fold_lexicon);
      const std::vector<StageId> stages = fold_instruction.empty()
                                              ? default_stage_sequence(spec.category)
                                              : parse(fold_instruction, spec.category, lex).stages;
      const EpisodeResult res = run_episode(spec, stages, ep);

      std::ostringstream report;
      write_report(report, res.report);
      out << "stages: " << canonical_text(stages, lex) << '\n';
      for (const auto& s : res.log.stages) {
        out << "  " << to_string(s.stage) << ": " << s.actions << " actions, "
            << (s.converged ? "converged" : "not converged") << '\n';
      }
      out << report.str();
      if (fold_out || std::getenv(kOutDirEnv) || cfg.get("output_dir")) {
        const auto dir = resolve_output_dir(fold_out, cfg, "fold-out");
        std::ostringstream log, ini_obj, fin_obj;
        write_log_jsonl(log, res.log);
        const GarmentMesh mesh = build_garment(spec);
        write_obj(ini_obj, res.initial_positions, mesh.triangles);
        write_obj(fin_obj, res.final_positions, mesh.triangles);
        detail::write_file(dir / "log.jsonl", log.str());
        detail::write_file(dir / "report.txt", report.str());
        detail::write_file(dir / "initial.obj", ini_obj.str());
        detail::write_file(dir / "final.obj", fin_obj.str());
        out << "wrote " << dir.string() << '\n';
      }
      if (res.error) {
        err << "episode aborted: " << to_string(*res.error) << '\n';
        return kExitRuntime;
      }
      return kExitOk;
    }

    if (*eval) {
      if (eval_logs.empty() && eval_initial.empty()) throw UsageError("evaluate needs --log or --initial/--final");
      EpisodeConfig ep;
      apply_config(cfg, ep);
      std::vector<std::pair<std::string, FoldReport>> rows;
      for (const auto& path : eval_logs) {
        std::ifstream is(path);
        if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
        FoldReport r = read_log_report(is);
        r.success = judge(r, ep.thresholds);
        rows.emplace_back(path, r);
      }
      if (!eval_initial.empty()) {
        std::ifstream a(eval_initial), b(eval_final);
        const ObjMesh m0 = read_obj(a), m1 = read_obj(b);
        if (m0.vertices.size() != m1.vertices.size() || m0.triangles != m1.triangles) {
          throw Error(ErrorCode::SizeMismatch, "initial and final meshes differ in topology");
        }
        rows.emplace_back(eval_final, evaluate_fold(m0.vertices, m1.vertices, m1.triangles, ep.thresholds));
      }
      const std::string csv = detail::report_csv(rows);
      if (eval_csv.empty()) {
        out << csv;
      } else {
        detail::write_file(eval_csv, csv);
      }
      return kExitOk;
    }

    if (*render) {
      const TrajectoryRecord rec = load_record(render_record);
      const auto dir = resolve_output_dir(render_out, cfg, std::filesystem::path(render_record).stem());
      std::filesystem::create_directories(dir);
      for (std::size_t m = 0; m < rec.frame_count; ++m) {
        std::ostringstream name;
        name << "frame_" << std::setw(3) << std::setfill('0') << m << '.' << render_format;
        std::ostringstream body;
        const auto f = rec.frame(m);
        if (render_format == "ply") {
          write_ply(body, f.points);
        } else {
          write_obj(body, f.points, {});
        }
        detail::write_file(dir / name.str(), body.str());
      }
      out << "wrote " << rec.frame_count << " frames to " << dir.string() << '\n';
      return kExitOk;
    }

    if (*ablate) {
      const std::string prefix = "template-";
      if (ablate_suite.rfind(prefix, 0) != 0) throw UsageError("unknown suite '" + ablate_suite + "'");
      std::size_t n = 0;
      try {
        n = std::stoul(ablate_suite.substr(prefix.size()));
      } catch (const std::exception&) {
        throw UsageError("unknown suite '" + ablate_suite + "'");
      }
      if (ablate_garments) n = ablate_garments;
      if (n == 0) throw UsageError("suite needs at least one garment");
      EpisodeConfig ep;
      apply_config(cfg, ep);
      const auto rows = run_ablation(template_garments(Category::ShortSleeve, n), ablation_variants(ep),
                                     ablate_threads, &err);
      std::ostringstream csv;
      write_ablation_csv(csv, rows);
      if (ablate_csv.empty()) {
        out << csv.str();
      } else {
        detail::write_file(ablate_csv, csv.str());
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help("", CLI::AppFormatMode::All);
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace metafold
