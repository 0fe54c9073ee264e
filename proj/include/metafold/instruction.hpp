#pragma once

// Rule-based folding instructions: lexicon-driven normalization, segmentation
// on ordering cues and Jaccard matching of each segment against predefined
// stage descriptions.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "metafold/error.hpp"
#include "metafold/garment.hpp"

namespace metafold {

/// Built-in lexicon, identical to data/lexicon.tsv.
inline constexpr std::string_view kDefaultLexicon = R"(# pattern<TAB>target
# target: a stage id, synonym:<word>, cue, filler or category:<name>
fold the left sleeve	LeftSleeve
fold the left sleeve to the center	LeftSleeve
fold the left sleeve over the body	LeftSleeve
fold the right sleeve	RightSleeve
fold the right sleeve to the center	RightSleeve
fold the right sleeve over the body	RightSleeve
fold the bottom up	BottomUp
fold the bottom up to the top	BottomUp
fold the hem up to the collar	BottomUp
fold in half	BottomUp
fold the left leg onto the right leg	LeftLegOntoRight
fold the left leg over	LeftLegOntoRight
fold the right leg onto the left leg	RightLegOntoLeft
fold the right leg over	RightLegOntoLeft
arm	synonym:sleeve
arms	synonym:sleeve
sleeves	synonym:sleeve
legs	synonym:leg
trouser leg	synonym:leg
pant leg	synonym:leg
hem	synonym:bottom
lower	synonym:bottom
lower part	synonym:bottom
lower half	synonym:bottom
base	synonym:bottom
first	cue
then	cue
after that	cue
afterwards	cue
finally	cue
and	cue
next	cue
lastly	cue
followed by	cue
fold	filler
tuck	filler
bring	filler
flip	filler
turn	filler
lift	filler
put	filler
place	filler
move	filler
please	filler
the	filler
a	filler
an	filler
its	filler
it	filler
in	filler
into	filler
to	filler
toward	filler
towards	filler
onto	filler
on	filler
over	filler
up	filler
across	filler
of	filler
one	filler
part	filler
side	filler
piece	filler
center	filler
centre	filler
middle	filler
body	filler
top	filler
collar	filler
neck	filler
upper	filler
shirt	filler
garment	filler
t shirt	category:short-sleeve
tshirt	category:short-sleeve
tee	category:short-sleeve
short sleeve	category:short-sleeve
short sleeve shirt	category:short-sleeve
long sleeve	category:long-sleeve
long sleeve shirt	category:long-sleeve
sweater	category:long-sleeve
vest	category:no-sleeve
tank top	category:no-sleeve
sleeveless	category:no-sleeve
no sleeve	category:no-sleeve
pants	category:pants
trousers	category:pants
jeans	category:pants
)";

struct Instruction {
  std::string raw;
  std::vector<StageId> stages;
  std::optional<Category> category_hint;
};

struct ParaphraseMatch {
  std::string description;
  std::optional<StageId> stage;
  double score = 0.0;
  bool accepted = false;
};

/// Lowercase; every run of non-alphanumeric characters becomes one space.
inline std::vector<std::string> normalize_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& toks) {
  std::string s;
  for (const auto& t : toks) {
    if (!s.empty()) s.push_back(' ');
    s += t;
  }
  return s;
}

class Lexicon {
 public:
  enum class Kind { Stage, Synonym, Cue, Filler, Category };

  struct Entry {
    std::string pattern;
    Kind kind = Kind::Filler;
    StageId stage = StageId::BottomUp;
    Category category = Category::ShortSleeve;
    std::string canonical;
  };

  /// Jaccard acceptance threshold.
  double threshold = 0.34;

  static Lexicon defaults() {
    std::istringstream is{std::string(kDefaultLexicon)};
    return read(is);
  }

  static Lexicon read(std::istream& is) {
    Lexicon lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw Error(ErrorCode::ParseError, "lexicon line " + std::to_string(lineno) + ": expected pattern<TAB>target");
      }
      lex.add(line.substr(0, tab), line.substr(tab + 1));
    }
    return lex;
  }

  static Lexicon load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::Io, "cannot open lexicon " + path);
    return read(f);
  }

  void add(const std::string& pattern, std::string_view target) {
    if (pattern.empty() || join_tokens(normalize_tokens(pattern)) != pattern) {
      throw Error(ErrorCode::BadConfig, "lexicon pattern must be lowercase and punctuation-free: '" + pattern + "'");
    }
    Entry e;
    e.pattern = pattern;
    if (target == "cue") {
      e.kind = Kind::Cue;
    } else if (target == "filler") {
      e.kind = Kind::Filler;
    } else if (target.starts_with("synonym:")) {
      e.kind = Kind::Synonym;
      e.canonical = std::string(target.substr(8));
      if (normalize_tokens(e.canonical).size() != 1) throw Error(ErrorCode::BadConfig, "synonym must be one word");
    } else if (target.starts_with("category:")) {
      e.kind = Kind::Category;
      auto c = parse_category(target.substr(9));
      if (!c) throw Error(ErrorCode::BadConfig, "unknown category " + std::string(target.substr(9)));
      e.category = *c;
    } else if (auto s = parse_stage_id(target)) {
      e.kind = Kind::Stage;
      e.stage = *s;
    } else {
      throw Error(ErrorCode::BadConfig, "unknown lexicon target '" + std::string(target) + "'");
    }
    auto it = index_.find(pattern);
    if (it != index_.end()) {
      const Entry& old = entries_[it->second];
      const bool same = old.kind == e.kind && old.stage == e.stage && old.category == e.category &&
                        old.canonical == e.canonical;
      if (!same) throw Error(ErrorCode::BadConfig, "pattern '" + pattern + "' maps to two targets");
      return;
    }
    if (e.kind != Kind::Stage) max_phrase_ = std::max(max_phrase_, normalize_tokens(pattern).size());
    index_.emplace(pattern, entries_.size());
    entries_.push_back(std::move(e));
  }

  const std::vector<Entry>& entries() const { return entries_; }

  /// Predefined stage descriptions in file order.
  std::vector<std::pair<std::string, StageId>> descriptions() const {
    std::vector<std::pair<std::string, StageId>> out;
    for (const auto& e : entries_) {
      if (e.kind == Kind::Stage) out.emplace_back(e.pattern, e.stage);
    }
    return out;
  }

  /// Canonical (first listed) description of a stage.
  std::string canonical_description(StageId id) const {
    for (const auto& e : entries_) {
      if (e.kind == Kind::Stage && e.stage == id) return e.pattern;
    }
    throw Error(ErrorCode::BadConfig, "lexicon has no description for " + std::string(to_string(id)));
  }

  /// Word-level entry lookup for phrases (synonyms, cues, fillers, categories).
  const Entry* phrase(const std::string& words) const {
    auto it = index_.find(words);
    if (it == index_.end() || entries_[it->second].kind == Kind::Stage) return nullptr;
    return &entries_[it->second];
  }

  std::size_t max_phrase_length() const { return max_phrase_; }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::size_t max_phrase_ = 1;
};

namespace detail {

struct Segment {
  std::vector<std::string> words;  // raw words, for error messages
  std::vector<std::string> content;
};

struct Analysis {
  std::vector<Segment> segments;
  std::vector<Category> categories;
};

// Longest-match rewriting of the token stream: synonyms become their canonical
// word, fillers disappear, cues close the current segment.
inline Analysis analyze(std::string_view text, const Lexicon& lex) {
  const auto toks = normalize_tokens(text);
  Analysis a;
  Segment cur;
  auto close = [&] {
    if (!cur.words.empty()) a.segments.push_back(std::move(cur));
    cur = {};
  };
  for (std::size_t i = 0; i < toks.size();) {
    const Lexicon::Entry* hit = nullptr;
    std::size_t len = 0;
    for (std::size_t n = std::min(lex.max_phrase_length(), toks.size() - i); n >= 1 && !hit; --n) {
      std::vector<std::string> w(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                 toks.begin() + static_cast<std::ptrdiff_t>(i + n));
      if ((hit = lex.phrase(join_tokens(w)))) len = n;
    }
    if (!hit) {
      cur.words.push_back(toks[i]);
      cur.content.push_back(toks[i]);
      ++i;
      continue;
    }
    switch (hit->kind) {
      case Lexicon::Kind::Cue: close(); break;
      case Lexicon::Kind::Synonym:
        cur.words.insert(cur.words.end(), toks.begin() + static_cast<std::ptrdiff_t>(i),
                         toks.begin() + static_cast<std::ptrdiff_t>(i + len));
        cur.content.push_back(hit->canonical);
        break;
      case Lexicon::Kind::Category:
        a.categories.push_back(hit->category);
        [[fallthrough]];
      case Lexicon::Kind::Filler:
      case Lexicon::Kind::Stage:
        cur.words.insert(cur.words.end(), toks.begin() + static_cast<std::ptrdiff_t>(i),
                         toks.begin() + static_cast<std::ptrdiff_t>(i + len));
        break;
    }
    i += len;
  }
  close();
  return a;
}

inline std::set<std::string> content_set(const std::vector<std::string>& c) { return {c.begin(), c.end()}; }

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& w : a) inter += b.count(w);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

inline std::optional<std::string> first_side(const std::vector<std::string>& content) {
  for (const auto& w : content) {
    if (w == "left" || w == "right") return w;
  }
  return std::nullopt;
}

struct Scored {
  std::size_t description = 0;
  double score = 0.0;
};

// Best description for a content word list. Ties go to the description whose
// first side word matches the segment's, then to one valid for the category,
// then to lexicon order.
inline std::optional<Scored> best_description(const std::vector<std::string>& content, const Lexicon& lex,
                                              std::optional<Category> category) {
  const auto descs = lex.descriptions();
  const auto seg = content_set(content);
  const auto side = first_side(content);
  std::optional<Scored> best;
  auto rank = [&](std::size_t d) {
    const auto dc = analyze(descs[d].first, lex).segments;
    const auto dside = dc.empty() ? std::nullopt : first_side(dc.front().content);
    const int side_ok = side && dside == side ? 1 : 0;
    const int valid = category && stage_valid_for(descs[d].second, *category) ? 1 : 0;
    return std::make_pair(side_ok, valid);
  };
  for (std::size_t d = 0; d < descs.size(); ++d) {
    const auto segs = analyze(descs[d].first, lex).segments;
    const double s = segs.empty() ? 0.0 : jaccard(seg, content_set(segs.front().content));
    if (!best || s > best->score + 1e-12) {
      best = Scored{d, s};
    } else if (std::abs(s - best->score) <= 1e-12 && rank(d) > rank(best->description)) {
      best = Scored{d, s};
    }
  }
  return best;
}

}  // namespace detail

/// Best predefined description for the whole text, by Jaccard similarity of
/// synonym-normalized content words. Scores below the lexicon threshold are
/// reported with `accepted == false`.
inline ParaphraseMatch paraphrase_match(std::string_view text, const Lexicon& lex = Lexicon::defaults()) {
  const auto a = detail::analyze(text, lex);
  std::vector<std::string> content;
  for (const auto& s : a.segments) content.insert(content.end(), s.content.begin(), s.content.end());
  ParaphraseMatch m;
  const auto best = detail::best_description(content, lex, std::nullopt);
  if (!best) return m;
  const auto descs = lex.descriptions();
  m.description = descs[best->description].first;
  m.stage = descs[best->description].second;
  m.score = best->score;
  m.accepted = m.score >= lex.threshold;
  return m;
}

/// Segments the text on ordering cues and maps every segment to a stage.
/// Segments with no content words (only fillers or garment names) are
/// skipped; when nothing remains the category's default sequence is used.
inline Instruction parse(std::string_view text, Category category, const Lexicon& lex = Lexicon::defaults()) {
  Instruction ins;
  ins.raw = std::string(text);
  if (normalize_tokens(text).empty()) throw Error(ErrorCode::UnknownInstruction, "empty instruction");
  const auto a = detail::analyze(text, lex);
  for (Category c : a.categories) {
    if (c != category) {
      throw Error(ErrorCode::CategoryMismatch, "instruction names " + std::string(to_string(c)) + " but the garment is " +
                                                   std::string(to_string(category)));
    }
    ins.category_hint = c;
  }
  const auto descs = lex.descriptions();
  std::vector<std::string> unmatched;
  for (const auto& seg : a.segments) {
    if (seg.content.empty()) continue;
    const auto best = detail::best_description(seg.content, lex, category);
    if (!best || best->score < lex.threshold) {
      unmatched.push_back("'" + join_tokens(seg.words) + "'");
      continue;
    }
    ins.stages.push_back(descs[best->description].second);
  }
  if (!unmatched.empty()) {
    std::string msg = "unmatched segments:";
    for (const auto& u : unmatched) msg += " " + u;
    throw Error(ErrorCode::UnknownInstruction, msg);
  }
  if (ins.stages.empty()) {
    if (a.categories.empty() && a.segments.empty()) throw Error(ErrorCode::UnknownInstruction, "no content words");
    ins.stages = default_stage_sequence(category);
  }
  for (StageId s : ins.stages) {
    if (!stage_valid_for(s, category)) {
      throw Error(ErrorCode::CategoryMismatch,
                  std::string(to_string(s)) + " does not apply to " + std::string(to_string(category)));
    }
  }
  return ins;
}

/// Canonical text of a stage sequence: canonical descriptions joined by "then".
inline std::string canonical_text(const std::vector<StageId>& stages, const Lexicon& lex = Lexicon::defaults()) {
  std::string s;
  for (StageId id : stages) {
    if (!s.empty()) s += ", then ";
    s += lex.canonical_description(id);
  }
  return s;
}

}  // namespace metafold
