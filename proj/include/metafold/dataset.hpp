#pragma once

// Stage-trajectory dataset: a binary record per (garment, stage) holding the
// simulated point-cloud trajectory and its language annotations, plus a JSON
// manifest describing the whole set.
//
// Record layout, little-endian:
//   "MFTR"  u16 version  u16 reserved
//   u64 garment seed  u8 category  u8 split  u8 stage index  u8 stage count
//   u8[stage count] stage ids
//   u32 N  u32 M  f64 frame period  u64 payload bytes
//   f32[M * N * 3] frames
//   u32 annotation count, then per annotation u32 byte length + UTF-8 bytes

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "metafold/cloth_sim.hpp"
#include "metafold/error.hpp"
#include "metafold/garment.hpp"
#include "metafold/instruction.hpp"
#include "metafold/planner.hpp"

namespace metafold {

enum class Split : std::uint8_t { Train = 0, Test = 1 };

inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

inline constexpr char kRecordMagic[4] = {'M', 'F', 'T', 'R'};
inline constexpr std::uint16_t kRecordVersion = 1;

struct TrajectoryRecord {
  std::uint64_t garment_seed = 0;
  Category category = Category::ShortSleeve;
  Split split = Split::Train;
  /// Position of this record's stage in `stages`.
  std::uint8_t stage_index = 0;
  std::vector<StageId> stages;
  std::uint32_t point_count = 0;
  std::uint32_t frame_count = 0;
  double frame_period = 0.1;
  /// Frame-major, then point, then xyz.
  std::vector<float> frames;
  std::vector<std::string> annotations;

  StageId stage() const { return stages.at(stage_index); }

  Vec3 point(std::size_t frame, std::size_t i) const {
    const std::size_t o = (frame * point_count + i) * 3;
    return {frames[o], frames[o + 1], frames[o + 2]};
  }

  PointCloudFrame frame(std::size_t m) const {
    PointCloudFrame f;
    f.id = m;
    f.points.reserve(point_count);
    for (std::size_t i = 0; i < point_count; ++i) f.points.push_back(point(m, i));
    return f;
  }

  void validate() const {
    if (stages.empty() || stage_index >= stages.size()) throw Error(ErrorCode::BadSpec, "stage index out of range");
    if (annotations.empty()) throw Error(ErrorCode::BadSpec, "a record needs at least one annotation");
    if (frames.size() != std::size_t{frame_count} * point_count * 3) {
      throw Error(ErrorCode::SizeMismatch, "frame payload does not match M x N x 3");
    }
  }
};

inline TrajectoryRecord make_record(const Trajectory& traj, std::uint64_t garment_seed, Category category,
                                    const std::vector<StageId>& stages, std::size_t stage_index,
                                    std::vector<std::string> annotations, Split split) {
  TrajectoryRecord r;
  r.garment_seed = garment_seed;
  r.category = category;
  r.split = split;
  r.stages = stages;
  r.stage_index = static_cast<std::uint8_t>(stage_index);
  r.point_count = static_cast<std::uint32_t>(traj.point_count());
  r.frame_count = static_cast<std::uint32_t>(traj.frame_count());
  r.frame_period = traj.frame_period;
  r.frames.reserve(std::size_t{r.frame_count} * r.point_count * 3);
  for (const auto& f : traj.frames) {
    if (f.size() != r.point_count) throw Error(ErrorCode::SizeMismatch, "frames differ in point count");
    for (const auto& p : f.points) {
      for (int k = 0; k < 3; ++k) r.frames.push_back(static_cast<float>(p[k]));
    }
  }
  r.annotations = std::move(annotations);
  r.validate();
  return r;
}

namespace detail {

class ByteWriter {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    bytes.insert(bytes.end(), b, b + sizeof(T));
  }
  void put_bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    bytes.insert(bytes.end(), c, c + n);
  }
  std::vector<unsigned char> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::istream& is) : is_(is) {}

  template <class T>
  T get(const char* what) {
    unsigned char b[sizeof(T)];
    read(b, sizeof(T), what);
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }

  void read(void* dst, std::size_t n, const char* what) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      fail(std::string("truncated ") + what, offset_ + static_cast<std::uint64_t>(is_.gcount()));
    }
    offset_ += n;
  }

  [[noreturn]] void fail(const std::string& msg, std::uint64_t at) const {
    throw Error(ErrorCode::ParseError, msg + " at byte " + std::to_string(at));
  }

  std::uint64_t offset() const { return offset_; }

 private:
  std::istream& is_;
  std::uint64_t offset_ = 0;
};

}  // namespace detail

inline void write_record(std::ostream& os, const TrajectoryRecord& r) {
  r.validate();
  detail::ByteWriter w;
  w.put_bytes(kRecordMagic, 4);
  w.put<std::uint16_t>(kRecordVersion);
  w.put<std::uint16_t>(0);
  w.put<std::uint64_t>(r.garment_seed);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(r.category));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(r.split));
  w.put<std::uint8_t>(r.stage_index);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(r.stages.size()));
  for (StageId s : r.stages) w.put<std::uint8_t>(static_cast<std::uint8_t>(s));
  w.put<std::uint32_t>(r.point_count);
  w.put<std::uint32_t>(r.frame_count);
  w.put<double>(r.frame_period);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(r.frames.size()) * 4);
  for (float f : r.frames) w.put<float>(f);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(r.annotations.size()));
  for (const auto& a : r.annotations) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.size()));
    w.put_bytes(a.data(), a.size());
  }
  os.write(reinterpret_cast<const char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
  if (!os) throw Error(ErrorCode::Io, "record write failed");
}

inline TrajectoryRecord read_record(std::istream& is) {
  detail::ByteReader rd(is);
  char magic[4];
  rd.read(magic, 4, "magic");
  if (std::memcmp(magic, kRecordMagic, 4) != 0) rd.fail("bad magic", 0);
  const auto version = rd.get<std::uint16_t>("version");
  if (version != kRecordVersion) rd.fail("unsupported version " + std::to_string(version), 4);
  rd.get<std::uint16_t>("reserved");

  TrajectoryRecord r;
  r.garment_seed = rd.get<std::uint64_t>("garment seed");
  std::uint64_t at = rd.offset();
  const auto cat = rd.get<std::uint8_t>("category");
  if (cat >= kAllCategories.size()) rd.fail("bad category " + std::to_string(cat), at);
  r.category = static_cast<Category>(cat);
  at = rd.offset();
  const auto split = rd.get<std::uint8_t>("split");
  if (split > 1) rd.fail("bad split " + std::to_string(split), at);
  r.split = static_cast<Split>(split);
  r.stage_index = rd.get<std::uint8_t>("stage index");
  at = rd.offset();
  const auto n_stages = rd.get<std::uint8_t>("stage count");
  if (n_stages == 0 || r.stage_index >= n_stages) rd.fail("stage index outside the stage sequence", at);
  for (std::uint8_t k = 0; k < n_stages; ++k) {
    at = rd.offset();
    const auto s = rd.get<std::uint8_t>("stage id");
    if (s >= kAllStages.size()) rd.fail("bad stage id " + std::to_string(s), at);
    r.stages.push_back(static_cast<StageId>(s));
  }
  r.point_count = rd.get<std::uint32_t>("point count");
  r.frame_count = rd.get<std::uint32_t>("frame count");
  at = rd.offset();
  r.frame_period = rd.get<double>("frame period");
  if (!(r.frame_period > 0.0) || !std::isfinite(r.frame_period)) rd.fail("frame period must be positive", at);
  const auto payload = rd.get<std::uint64_t>("payload size");
  const std::uint64_t expected = std::uint64_t{r.frame_count} * r.point_count * 12;
  if (payload != expected) {
    throw Error(ErrorCode::SizeMismatch, "header promises " + std::to_string(r.frame_count) + " x " +
                                             std::to_string(r.point_count) + " points (" + std::to_string(expected) +
                                             " bytes) but the payload holds " + std::to_string(payload));
  }
  r.frames.resize(payload / 4);
  for (auto& f : r.frames) f = rd.get<float>("frame payload");
  at = rd.offset();
  const auto n_ann = rd.get<std::uint32_t>("annotation count");
  if (n_ann == 0) rd.fail("record has no annotation", at);
  for (std::uint32_t k = 0; k < n_ann; ++k) {
    const auto len = rd.get<std::uint32_t>("annotation length");
    std::string s(len, '\0');
    rd.read(s.data(), len, "annotation");
    r.annotations.push_back(std::move(s));
  }
  return r;
}

inline void save_record(const std::filesystem::path& path, const TrajectoryRecord& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string());
  write_record(os, r);
}

inline TrajectoryRecord load_record(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_record(is);
}

/// Garment-level split: about 79% of garment seeds land in train.
inline Split split_for(std::uint64_t garment_seed) {
  std::uint64_t h = 1469598103934665603ull;
  for (int k = 0; k < 8; ++k) {
    h ^= (garment_seed >> (8 * k)) & 0xffu;
    h *= 1099511628211ull;
  }
  return h % 1000 < 789 ? Split::Train : Split::Test;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t garment_seed(std::uint64_t recipe_seed, Category c, std::size_t index) {
  return splitmix64(splitmix64(recipe_seed) ^ (static_cast<std::uint64_t>(c) << 32) ^ index);
}

/// Up to `count` lexicon descriptions of a stage, drawn without replacement.
inline std::vector<std::string> annotations_for(StageId stage, const Lexicon& lex, std::uint64_t seed,
                                                std::size_t count = 3) {
  std::vector<std::string> pool;
  for (const auto& [text, id] : lex.descriptions()) {
    if (id == stage) pool.push_back(text);
  }
  if (pool.empty()) throw Error(ErrorCode::BadConfig, "lexicon has no description of " + std::string(to_string(stage)));
  std::mt19937_64 rng(seed);
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng() % i]);
  pool.resize(std::min(count, pool.size()));
  return pool;
}

struct DatasetRecipe {
  std::string name = "metafold-desk";
  std::size_t garments_per_category = 10;
  std::vector<Category> categories{kAllCategories.begin(), kAllCategories.end()};
  std::uint64_t seed = 0;
  double jitter = 0.1;
  double resolution = 0.02;
  std::size_t points = 512;
  std::size_t frames = 30;
  std::size_t annotations_per_stage = 3;
  double initial_settle = 1.0;
  /// Extra settling between stages, s.
  double stage_settle = 0.5;
  SimParams sim;
  RolloutParams rollout;
  unsigned threads = 0;

  void validate() const {
    if (garments_per_category < 1) throw Error(ErrorCode::BadConfig, "recipe needs at least one garment");
    if (categories.empty()) throw Error(ErrorCode::BadConfig, "recipe needs at least one category");
    if (!(resolution > 0.0)) throw Error(ErrorCode::BadConfig, "resolution must be positive");
    if (!(jitter >= 0.0 && jitter < 1.0)) throw Error(ErrorCode::BadConfig, "jitter must lie in [0, 1)");
    if (points < 1 || frames < 2) throw Error(ErrorCode::BadConfig, "need points >= 1 and frames >= 2");
    if (annotations_per_stage < 2) throw Error(ErrorCode::BadConfig, "need at least two annotations per stage");
    sim.validate();
  }
};

struct ManifestEntry {
  std::string file;
  Category category = Category::ShortSleeve;
  StageId stage = StageId::BottomUp;
  std::uint64_t garment_seed = 0;
  Split split = Split::Train;
};

struct Manifest {
  std::string name;
  std::vector<ManifestEntry> records;
  std::vector<std::string> skipped;
  nlohmann::json config;

  std::size_t count(Split s) const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](auto& e) { return e.split == s; }));
  }
  std::size_t count(Category c) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [&](auto& e) { return e.category == c; }));
  }
};

inline nlohmann::json to_json(const SimParams& p) {
  return {{"dt", p.dt},
          {"substeps", p.substeps},
          {"iterations", p.iterations},
          {"gravity", {p.gravity.x(), p.gravity.y(), p.gravity.z()}},
          {"stretch_compliance", p.stretch_compliance},
          {"bend_compliance", p.bend_compliance},
          {"damping", p.damping},
          {"friction", p.friction},
          {"thickness", p.thickness},
          {"areal_density", p.areal_density},
          {"ground", p.ground}};
}

inline nlohmann::json to_json(const DatasetRecipe& r) {
  nlohmann::json cats = nlohmann::json::array();
  for (Category c : r.categories) cats.push_back(std::string(to_string(c)));
  return {{"garments_per_category", r.garments_per_category},
          {"categories", cats},
          {"seed", r.seed},
          {"jitter", r.jitter},
          {"resolution", r.resolution},
          {"points", r.points},
          {"frames", r.frames},
          {"annotations_per_stage", r.annotations_per_stage},
          {"initial_settle", r.initial_settle},
          {"stage_settle", r.stage_settle},
          {"sim", to_json(r.sim)},
          {"rollout",
           {{"arc_height_ratio", r.rollout.arc_height_ratio},
            {"speed", r.rollout.speed},
            {"settle_time", r.rollout.settle_time}}}};
}

inline nlohmann::json to_json(const Manifest& m) {
  nlohmann::json j;
  j["name"] = m.name;
  j["total"] = m.records.size();
  nlohmann::json per_cat = nlohmann::json::object();
  for (Category c : kAllCategories) {
    if (m.count(c) > 0) per_cat[std::string(to_string(c))] = m.count(c);
  }
  j["categories"] = per_cat;
  j["splits"] = {{"train", m.count(Split::Train)}, {"test", m.count(Split::Test)}};
  j["skipped"] = m.skipped;
  j["config"] = m.config;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& e : m.records) {
    recs.push_back({{"file", e.file},
                    {"category", std::string(to_string(e.category))},
                    {"stage", std::string(to_string(e.stage))},
                    {"garment_seed", e.garment_seed},
                    {"split", std::string(to_string(e.split))}});
  }
  j["records"] = recs;
  return j;
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  try {
    Manifest m;
    m.name = j.at("name").get<std::string>();
    m.skipped = j.at("skipped").get<std::vector<std::string>>();
    m.config = j.at("config");
    for (const auto& r : j.at("records")) {
      ManifestEntry e;
      e.file = r.at("file").get<std::string>();
      auto c = parse_category(r.at("category").get<std::string>());
      auto s = parse_stage_id(r.at("stage").get<std::string>());
      if (!c || !s) throw Error(ErrorCode::ParseError, "bad category or stage in manifest entry " + e.file);
      e.category = *c;
      e.stage = *s;
      e.garment_seed = r.at("garment_seed").get<std::uint64_t>();
      e.split = r.at("split").get<std::string>() == "train" ? Split::Train : Split::Test;
      m.records.push_back(std::move(e));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest: ") + e.what());
  }
}

inline void save_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string());
  os << to_json(m).dump(2) << '\n';
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest: ") + e.what());
  }
  return manifest_from_json(j);
}

/// Settled garment built from a recipe slot; the first observation of the
/// returned sim is the rest observation every first-stage record starts from.
inline ClothSim settled_garment(const DatasetRecipe& recipe, Category c, std::uint64_t seed) {
  GarmentSpec spec = GarmentSpec::defaults(c).jittered(seed, recipe.jitter);
  spec.resolution = recipe.resolution;
  ClothSim sim(build_garment(spec), recipe.sim);
  sim.settle(recipe.initial_settle);
  return sim;
}

/// Stage trajectories of one garment, folded in its default stage order.
inline std::vector<TrajectoryRecord> generate_garment(const DatasetRecipe& recipe, Category c, std::uint64_t seed,
                                                      const Lexicon& lex) {
  ClothSim sim = settled_garment(recipe, c, seed);
  const auto stages = default_stage_sequence(c);
  RolloutParams rp = recipe.rollout;
  rp.points = recipe.points;
  std::vector<TrajectoryRecord> out;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    if (k > 0) sim.advance(recipe.stage_settle);
    const Trajectory traj = rollout_oracle_trajectory(sim, make_stage(stages[k], sim.mesh()), recipe.frames, rp);
    out.push_back(make_record(traj, seed, c, stages, k,
                              annotations_for(stages[k], lex, splitmix64(seed + k), recipe.annotations_per_stage),
                              split_for(seed)));
  }
  return out;
}

inline std::string record_filename(Category c, std::size_t garment_index, std::size_t stage_index, StageId s) {
  std::ostringstream ss;
  ss << to_string(c) << '_' << std::setw(4) << std::setfill('0') << garment_index << '_' << stage_index << '_'
     << to_string(s) << ".mftr";
  return ss.str();
}

/// Writes one record per (garment, stage) into `out_dir` plus manifest.json.
/// Garments are generated in parallel; output bytes depend only on the recipe.
inline Manifest generate_dataset(const DatasetRecipe& recipe, const std::filesystem::path& out_dir,
                                 const Lexicon& lex = Lexicon::defaults(), std::ostream* log = nullptr) {
  recipe.validate();
  std::filesystem::create_directories(out_dir);

  struct Slot {
    Category category;
    std::size_t index;
    std::uint64_t seed;
    std::vector<TrajectoryRecord> records;
    std::string error;
  };
  std::vector<Slot> slots;
  for (Category c : recipe.categories) {
    for (std::size_t i = 0; i < recipe.garments_per_category; ++i) slots.push_back({c, i, garment_seed(recipe.seed, c, i), {}, {}});
  }

  unsigned threads = recipe.threads ? recipe.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(slots.size()));
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < slots.size(); i = next++) {
      Slot& s = slots[i];
      try {
        s.records = generate_garment(recipe, s.category, s.seed, lex);
      } catch (const Error& e) {
        s.error = e.what();
        if (log) {
          std::lock_guard lock(log_mutex);
          *log << "skipping " << to_string(s.category) << " #" << s.index << ": " << e.what() << '\n';
        }
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  Manifest m;
  m.name = recipe.name;
  m.config = to_json(recipe);
  for (const auto& s : slots) {
    if (!s.error.empty()) {
      m.skipped.push_back(std::string(to_string(s.category)) + "#" + std::to_string(s.index) + ": " + s.error);
      continue;
    }
    for (const auto& r : s.records) {
      ManifestEntry e{record_filename(s.category, s.index, r.stage_index, r.stage()), s.category, r.stage(), s.seed,
                      r.split};
      save_record(out_dir / e.file, r);
      m.records.push_back(std::move(e));
    }
  }
  save_manifest(out_dir / "manifest.json", m);
  return m;
}

/// Checks that every manifest entry exists on disk, decodes, and agrees with
/// its entry; returns the problems found.
inline std::vector<std::string> verify_dataset(const std::filesystem::path& dir) {
  std::vector<std::string> problems;
  const Manifest m = load_manifest(dir / "manifest.json");
  std::size_t on_disk = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".mftr") ++on_disk;
  }
  if (on_disk != m.records.size()) {
    problems.push_back(std::to_string(on_disk) + " record files but " + std::to_string(m.records.size()) +
                       " manifest entries");
  }
  for (const auto& e : m.records) {
    try {
      const auto r = load_record(dir / e.file);
      if (r.category != e.category || r.stage() != e.stage || r.split != e.split || r.garment_seed != e.garment_seed) {
        problems.push_back(e.file + ": header disagrees with manifest");
      }
    } catch (const Error& err) {
      problems.push_back(e.file + ": " + err.what());
    }
  }
  return problems;
}

}  // namespace metafold
