#include <gtest/gtest.h>

#include <random>

#include "support/generators.hpp"
#include "xlabel/decoding.hpp"
#include "xlabel/diagnostics.hpp"

namespace xlabel::diagnostics {
namespace {

TEST(Diagnose, TranslatedWordIsHallucination) {
  const auto d = diagnose(split_words("Kaliforni sullã sẽn togse"),
                          "<Location> California </Location> sullã sẽn togse");
  EXPECT_FALSE(d.markup_error.has_value());
  EXPECT_EQ(d.hallucinated_words, (std::vector<std::string>{"California"}));
  EXPECT_FALSE(d.splitting);
  EXPECT_FALSE(d.clean);
}

TEST(Diagnose, SplitWordIsSplitting) {
  const auto d = diagnose(split_words("Realean irabazi du"), "<Organization> Reale an </Organization> irabazi du");
  EXPECT_TRUE(d.splitting);
  EXPECT_TRUE(d.hallucinated_words.empty());
  EXPECT_FALSE(d.clean);

  const auto merged = diagnose(split_words("waseThekwini uShauwn Mkhize"),
                               "wase <Location> Thekwini </Location> u <Person> Shauwn Mkhize </Person>");
  EXPECT_TRUE(merged.splitting);
  EXPECT_TRUE(merged.hallucinated_words.empty());

  const auto joined = diagnose(split_words("New York City"), "<LOC> NewYork City </LOC>");
  EXPECT_TRUE(joined.splitting);
}

TEST(Diagnose, TypoIsHallucination) {
  const auto d = diagnose(split_words("okudlula kakhulu"), "okudludlule kakhulu");
  EXPECT_FALSE(d.splitting);
  EXPECT_EQ(d.hallucinated_words, (std::vector<std::string>{"okudludlule"}));
}

TEST(Diagnose, CleanAndMarkup) {
  EXPECT_TRUE(diagnose(split_words("Obama went home"), "<PER> Obama </PER> went home").clean);
  const auto bad = diagnose(split_words("Obama went home"), "<PER> Obama went home");
  ASSERT_TRUE(bad.markup_error.has_value());
  EXPECT_EQ(bad.markup_error->kind, MarkupErrorKind::UnclosedTag);
  EXPECT_TRUE(bad.hallucinated_words.empty());
  EXPECT_FALSE(bad.clean);
  const auto dropped = diagnose(split_words("Obama went home"), "Obama home");
  EXPECT_EQ(dropped.missing_words, (std::vector<std::string>{"went"}));
  EXPECT_FALSE(dropped.clean);
  EXPECT_TRUE(diagnose({}, "").clean);
}

TEST(Rates, Arithmetic) {
  const Words in = split_words("Kaliforni sullã");
  auto r = corpus_rates({{in, "Kaliforni sullã"}, {in, "<LOC> Kaliforni </LOC> sullã"}});
  EXPECT_EQ(r.sentences, 2u);
  EXPECT_EQ(r.any, 0.0);
  r = corpus_rates({{in, "California sullã"}, {in, "Kaliforni sullã"}});
  EXPECT_DOUBLE_EQ(r.hallucination, 50.0);
  EXPECT_DOUBLE_EQ(r.any, 50.0);
  r = corpus_rates({{in, "<X> California sullã"}, {in, "Kali forni sullã"}, {in, "Kaliforni sullã"}, {in, "x"}});
  EXPECT_DOUBLE_EQ(r.markup, 25.0);
  EXPECT_DOUBLE_EQ(r.splitting, 25.0);
  EXPECT_DOUBLE_EQ(r.hallucination, 50.0);
  EXPECT_DOUBLE_EQ(r.any, 75.0);
  const auto empty = corpus_rates({});
  EXPECT_TRUE(empty.empty_corpus);
  EXPECT_EQ(empty.any, 0.0);
}

TEST(Rates, ConstrainedOutputsAreClean) {
  std::mt19937_64 rng(8);
  const decoding::ChunkTokenizer tok(3);
  std::vector<OutputPair> pairs;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const decoding::RandomModel model(seed, 4.0, 3, {"\xE2\x96\x81the", "s"});
    const Words input = testing::random_words(rng, testing::uniform(rng, 1, 10), 16);
    const decoding::Session session(input, {"PER", "LOC"}, model, tok);
    pairs.emplace_back(input, decoding::constrained_beam(session, 1 + seed % 3).text);
  }
  const auto r = corpus_rates(pairs);
  EXPECT_EQ(r.markup + r.hallucination + r.splitting + r.any, 0.0);
  EXPECT_EQ(diagnose_batch_parallel(pairs).size(), pairs.size());
}

TEST(Iob2, LenientConversion) {
  const LabeledSentence s({"Obama", "went", "to", "New", "York"}, {{0, 1, "PER"}, {3, 5, "LOC"}});
  EXPECT_EQ(to_iob2_lenient(to_tagged_text(s), 5), spans_to_tags(s, TagScheme::IOB2));
  EXPECT_EQ(to_iob2_lenient("<PER> Obama </PER> went to New", 5),
            (std::vector<std::string>{"B-PER", "O", "O", "O", "O"}));
  EXPECT_EQ(to_iob2_lenient("<Location> California </Location> sullã sẽn togse", 4),
            (std::vector<std::string>{"B-Location", "O", "O", "O"}));
  EXPECT_EQ(to_iob2_lenient("a <X> b <Y> c </X> d", 3), (std::vector<std::string>{"O", "B-X", "B-Y"}));
  EXPECT_EQ(to_iob2_lenient("</X> a b", 2), (std::vector<std::string>{"O", "O"}));
}

TEST(Batch, ParallelMatchesSerial) {
  std::mt19937_64 rng(4);
  std::vector<OutputPair> pairs;
  for (int i = 0; i < 200; ++i) {
    Words in = testing::random_words(rng, testing::uniform(rng, 1, 8), 16);
    Words out = in;
    if (i % 3 == 0) out[0] += "x";
    if (i % 5 == 0 && out.size() > 1) {
      out[0] += out[1];
      out.erase(out.begin() + 1);
    }
    pairs.emplace_back(in, (i % 7 == 0 ? "<A> " : "") + join_words(out));
  }
  const auto a = diagnose_batch_serial(pairs);
  const auto b = diagnose_batch_parallel(pairs);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].hallucinated_words, b[i].hallucinated_words);
    EXPECT_EQ(a[i].splitting, b[i].splitting);
    EXPECT_EQ(a[i].clean, b[i].clean);
  }
  const auto r = rates_from(a);
  EXPECT_GE(r.any, std::max({r.markup, r.hallucination, r.splitting}));
  EXPECT_LE(r.any, 100.0);
}

}  // namespace
}  // namespace xlabel::diagnostics
