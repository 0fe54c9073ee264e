#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "metafold/instruction.hpp"

using namespace metafold;

namespace {

using Seq = std::vector<StageId>;
constexpr auto L = StageId::LeftSleeve;
constexpr auto R = StageId::RightSleeve;
constexpr auto B = StageId::BottomUp;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::Io;
}

Category category_for(StageId s) {
  return s == StageId::LeftLegOntoRight || s == StageId::RightLegOntoLeft ? Category::Pants : Category::ShortSleeve;
}

}  // namespace

TEST(Parse, SequencesInTextualOrder) {
  EXPECT_EQ(parse("Fold the left sleeve first, then the right sleeve, then fold the bottom up", Category::ShortSleeve).stages,
            (Seq{L, R, B}));
  EXPECT_EQ(parse("fold bottom up, then left sleeve, then right sleeve", Category::ShortSleeve).stages, (Seq{B, L, R}));
  EXPECT_EQ(parse("fold the pants", Category::Pants).stages, (Seq{StageId::LeftLegOntoRight, B}));
  EXPECT_EQ(parse("Fold the vest.", Category::NoSleeve).stages, (Seq{B}));
}

TEST(Parse, Errors) {
  EXPECT_EQ(code_of([] { parse("fold the sleeve", Category::Pants); }), ErrorCode::CategoryMismatch);
  EXPECT_EQ(code_of([] { parse("preheat the oven", Category::ShortSleeve); }), ErrorCode::UnknownInstruction);
  EXPECT_EQ(code_of([] { parse("   ", Category::ShortSleeve); }), ErrorCode::UnknownInstruction);
  EXPECT_EQ(code_of([] { parse("fold the pants", Category::ShortSleeve); }), ErrorCode::CategoryMismatch);
  try {
    parse("fold the left sleeve, then juggle the oranges", Category::ShortSleeve);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("juggle"), std::string::npos);
  }
}

TEST(Parse, EveryDescriptionRoundTrips) {
  const auto lex = Lexicon::defaults();
  for (const auto& [text, id] : lex.descriptions()) {
    EXPECT_EQ(parse(text, category_for(id), lex).stages, Seq{id}) << text;
  }
}

TEST(Parse, IdempotentOnCanonicalText) {
  for (const char* text : {"fold the left sleeve first, then the right sleeve, then fold the bottom up",
                           "bring the hem up, after that the right arm", "fold in half"}) {
    const auto once = parse(text, Category::LongSleeve).stages;
    const auto canon = canonical_text(once);
    EXPECT_EQ(parse(canon, Category::LongSleeve).stages, once) << canon;
    EXPECT_EQ(canonical_text(parse(canon, Category::LongSleeve).stages), canon);
    EXPECT_EQ(parse(text, Category::LongSleeve).stages, once);
  }
}

TEST(Parse, ReorderingSegmentsPermutesOutput) {
  const std::vector<std::pair<std::string, StageId>> segs{
      {"fold the left arm in", L}, {"fold the right sleeve over", R}, {"bring the hem up", B}};
  std::vector<std::size_t> order{0, 1, 2};
  do {
    std::string text;
    Seq expect;
    for (auto i : order) {
      if (!text.empty()) text += ", then ";
      text += segs[i].first;
      expect.push_back(segs[i].second);
    }
    EXPECT_EQ(parse(text, Category::ShortSleeve).stages, expect) << text;
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST(Paraphrase, ScoresAndThreshold) {
  const auto exact = paraphrase_match("fold the right leg onto the left leg");
  EXPECT_EQ(exact.stage, StageId::RightLegOntoLeft);
  EXPECT_DOUBLE_EQ(exact.score, 1.0);
  EXPECT_TRUE(exact.accepted);

  // Content {left, arm -> sleeve} against {left, sleeve}: Jaccard 2/2.
  const auto arm = paraphrase_match("tuck the left arm in");
  EXPECT_EQ(arm.stage, L);
  EXPECT_GE(arm.score, 0.34);
  EXPECT_TRUE(arm.accepted);

  // {preheat, oven} shares nothing with any description.
  const auto oven = paraphrase_match("preheat the oven");
  EXPECT_LT(oven.score, 0.34);
  EXPECT_FALSE(oven.accepted);
}

TEST(Lexicon, FileMatchesBuiltIn) {
  const auto file = Lexicon::load(std::string(METAFOLD_SOURCE_DIR) + "/data/lexicon.tsv");
  const auto builtin = Lexicon::defaults();
  ASSERT_EQ(file.entries().size(), builtin.entries().size());
  EXPECT_EQ(file.descriptions(), builtin.descriptions());
}

TEST(Lexicon, RejectsConflictsAndMalformedLines) {
  std::istringstream conflict("fold the left sleeve\tLeftSleeve\nfold the left sleeve\tRightSleeve\n");
  EXPECT_THROW(Lexicon::read(conflict), Error);
  std::istringstream no_tab("fold the left sleeve LeftSleeve\n");
  EXPECT_THROW(Lexicon::read(no_tab), Error);
  std::istringstream unknown("fold the hat\tHatFold\n");
  EXPECT_THROW(Lexicon::read(unknown), Error);
}

TEST(Normalize, LowercaseAndPunctuation) {
  EXPECT_EQ(normalize_tokens("Fold, the LEFT-sleeve!"), (std::vector<std::string>{"fold", "the", "left", "sleeve"}));
}
