#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/decode_oracle.hpp"
#include "support/generators.hpp"
#include "xlabel/error.hpp"

namespace xlabel::decoding {
namespace {

class UniformModel : public Model {
 public:
  std::vector<double> next_distribution(const Vocabulary& vocab, std::span<const TokenId>) const override {
    return std::vector<double>(vocab.size(), 1.0 / static_cast<double>(vocab.size()));
  }
};

TEST(Automaton, ValidActions) {
  DecodeState s;
  EXPECT_EQ(valid_actions(s, 1, 1), (std::vector<Action>{CopyNextWord{}, OpenTag{0}}));
  s.cursor = 1;
  s.open_tag = 0;
  s.words_in_tag = 1;
  EXPECT_EQ(valid_actions(s, 1, 1), (std::vector<Action>{CloseTag{}}));
  s.open_tag.reset();
  s.words_in_tag = 0;
  EXPECT_EQ(valid_actions(s, 1, 1), (std::vector<Action>{End{}}));
  s.cursor = 0;
  s.open_tag = 1;
  EXPECT_EQ(valid_actions(s, 2, 3), (std::vector<Action>{CopyNextWord{}}));
  s.words_in_tag = 2;
  EXPECT_EQ(valid_actions(s, 2, 3), (std::vector<Action>{CopyNextWord{}, CloseTag{}}));
}

TEST(Automaton, UniformCopyCostsLogV) {
  const UniformModel model;
  const WholeWordTokenizer tok;
  const Session session({"Obama", "went"}, {"PER", "LOC"}, model, tok);
  const double v = static_cast<double>(session.vocab().size());
  EXPECT_EQ(session.vocab().size(), 7u);
  const auto next = apply_action(DecodeState{}, CopyNextWord{}, session);
  EXPECT_NEAR(next.logprob, -std::log(v), 1e-12);
  EXPECT_EQ(next.cursor, 1u);
}

TEST(Automaton, MultiPieceCopyIsAtomic) {
  const UniformModel model;
  const ChunkTokenizer tok(3);
  const Session session({"Paris"}, {"LOC"}, model, tok);
  ASSERT_EQ(session.word_tokens(0).size(), 2u);
  EXPECT_EQ(session.vocab().surface(session.word_tokens(0)[1]), "is");
  const auto next = apply_action(DecodeState{}, CopyNextWord{}, session);
  EXPECT_EQ(next.emitted.size(), 2u);
  EXPECT_EQ(next.cursor, 1u);
  EXPECT_NEAR(next.logprob, -2 * std::log(static_cast<double>(session.vocab().size())), 1e-12);
  EXPECT_EQ(session.detokenize(next.emitted), "Paris");
}

TEST(Automaton, InvalidActionsRejected) {
  const UniformModel model;
  const WholeWordTokenizer tok;
  const Session session({"a"}, {"X"}, model, tok);
  const auto opened = apply_action(DecodeState{}, OpenTag{0}, session);
  EXPECT_THROW(apply_action(opened, CloseTag{}, session), ContractError);
  EXPECT_THROW(apply_action(DecodeState{}, End{}, session), ContractError);
  EXPECT_THROW(apply_action(DecodeState{}, OpenTag{1}, session), ContractError);
  EXPECT_THROW(constrained_beam(session, 0), ContractError);
  EXPECT_THROW(constrained_greedy(Session({}, {"X"}, model, tok)), ContractError);
}

TEST(Greedy, TableTrace) {
  const auto model = TableModel::parse(
      "# open X, copy Obama, close, copy went, end\n"
      "<s>\t<X>\t10\n"
      "<X>\t\xE2\x96\x81Obama\t5\n"
      "\xE2\x96\x81Obama\t</X>\t5\n"
      "</X>\t\xE2\x96\x81went\t5\n"
      "\xE2\x96\x81went\t</s>\t5\n");
  const WholeWordTokenizer tok;
  const Session session({"Obama", "went"}, {"X"}, model, tok);
  const auto r = constrained_greedy(session);
  EXPECT_EQ(r.text, "<X> Obama </X> went");
  EXPECT_EQ(r.sentence.spans(), (std::vector<Span>{{0, 1, "X"}}));
  EXPECT_EQ(constrained_beam(session, 1).tokens, r.tokens);
}

TEST(Greedy, CopyPreferringModelLabelsNothing) {
  TableModel model;
  model.add("*", "\xE2\x96\x81" "a", 1);
  model.add("*", "\xE2\x96\x81" "b", 1);
  const WholeWordTokenizer tok;
  const auto r = constrained_greedy(Session({"a", "b", "a"}, {"X", "Y"}, model, tok));
  EXPECT_TRUE(r.sentence.spans().empty());
  EXPECT_EQ(r.text, "a b a");
}

TEST(Greedy, OpenTieGoesToSmallestCategory) {
  TableModel model;
  model.add("<s>", "<B>", 1);
  model.add("<s>", "<A>", 1);
  const WholeWordTokenizer tok;
  const auto r = constrained_greedy(Session({"w"}, {"B", "A"}, model, tok));
  EXPECT_EQ(r.sentence.spans(), (std::vector<Span>{{0, 1, "A"}}));
}

TEST(Greedy, WordsUnknownToModelAreCopied) {
  // The model puts all its mass on words absent from the input.
  const RandomModel model(7, 4.0, 3, {"\xE2\x96\x81the", "\xE2\x96\x81of"});
  TableModel table;
  table.add("*", "\xE2\x96\x81the", 1);
  table.set_floor(1e-9);
  const WholeWordTokenizer tok;
  for (const Model* m : {static_cast<const Model*>(&model), static_cast<const Model*>(&table)}) {
    const Session session({"Kalifornien", "ist", "groß"}, {"LOC"}, *m, tok);
    EXPECT_EQ(constrained_beam(session, 3).sentence.words(), session.input());
  }
}

TEST(SequenceLogprob, ProductFormula) {
  TableModel model;
  model.set_floor(0);
  model.add("*", "</s>", 1);
  model.add("*", "\xE2\x96\x81" "a", 1);
  const WholeWordTokenizer tok;
  const Session session({"a"}, {"X"}, model, tok);
  const TokenId a = session.word_tokens(0)[0];
  const std::vector<TokenId> one{a}, two{a, session.end_token()};
  EXPECT_NEAR(sequence_logprob(one, session).logprob, std::log(0.5), 1e-12);
  EXPECT_NEAR(sequence_logprob(two, session).logprob, std::log(0.25), 1e-12);
  const std::vector<TokenId> zero{a, session.open_token(0)};
  const auto z = sequence_logprob(zero, session);
  EXPECT_EQ(z.zero_at, 1u);
  EXPECT_TRUE(std::isinf(z.logprob) && z.logprob < 0);
  EXPECT_THROW(sequence_logprob({}, session), ContractError);
}

TEST(Beam, PropertiesOnRandomModels) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> cats{"PER", "LOC", "ORG", "MISC"};
  const ChunkTokenizer tok(4);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const RandomModel model(seed, 4.0, 3, {"\xE2\x96\x81the", "s"});
    const Words input = testing::random_words(rng, testing::uniform(rng, 1, 12), 16);
    const std::vector<std::string> c(cats.begin(), cats.begin() + static_cast<std::ptrdiff_t>(testing::uniform(rng, 1, 4)));
    const Session session(input, c, model, tok);
    const auto greedy = constrained_greedy(session);
    const auto beam1 = constrained_beam(session, 1);
    ASSERT_EQ(greedy.tokens, beam1.tokens);
    ASSERT_EQ(greedy.logprob, beam1.logprob);
    for (std::size_t k : {1u, 3u}) {
      const auto r = constrained_beam(session, k);
      ASSERT_EQ(r.sentence.words(), input);
      ASSERT_EQ(sequence_logprob(r.tokens, session).logprob, r.logprob);
      std::size_t actions = 0;
      for (std::size_t i = 0; i < r.tokens.size(); ++i) {
        const auto& s = session.vocab().surface(r.tokens[i]);
        if (s.starts_with("<") || s.starts_with(kWordStart)) ++actions;
      }
      ASSERT_LE(actions, 3 * input.size() + 1);
    }
  }
}

TEST(Beam, SaturatedBeamMatchesBruteForce) {
  const WholeWordTokenizer tok;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const RandomModel model(seed);
    for (const auto& input : {Words{"a"}, Words{"a", "b"}, Words{"a", "a"}}) {
      for (const auto& cats : {std::vector<std::string>{"X"}, std::vector<std::string>{"X", "Y"}}) {
        const Session session(input, cats, model, tok);
        ASSERT_LE(session.vocab().size(), 8u);
        const auto best = testing::brute_force_best(session);
        const auto r = constrained_beam(session, testing::all_labelings(session).size());
        ASSERT_EQ(r.tokens, best.tokens) << seed;
        ASSERT_NEAR(r.logprob, best.logprob, 1e-12);
      }
    }
  }
}

TEST(Batch, ParallelMatchesSerial) {
  std::mt19937_64 rng(2);
  std::vector<Words> inputs;
  for (int i = 0; i < 40; ++i) inputs.push_back(testing::random_words(rng, testing::uniform(rng, 1, 10), 16));
  const RandomModel model(99);
  const ChunkTokenizer tok(3);
  for (std::size_t k : {1u, 2u}) {
    const auto a = decode_batch_serial(inputs, {"X", "Y"}, model, tok, k);
    const auto b = decode_batch_parallel(inputs, {"X", "Y"}, model, tok, k);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].tokens, b[i].tokens);
  }
}

TEST(Unconstrained, StopsAndDetokenizes) {
  const RandomModel model(5, 4.0, 3, {"\xE2\x96\x81the", "s"});
  const WholeWordTokenizer tok;
  const Session session({"Obama", "went"}, {"PER"}, model, tok);
  const auto r = unconstrained_beam(session, 2, 12);
  EXPECT_LE(r.tokens.size(), 12u);
  EXPECT_EQ(r.text, session.detokenize(r.tokens));
  EXPECT_NEAR(sequence_logprob(r.tokens, session).logprob, r.logprob, 1e-9);
}

TEST(ModelSpec, Parsing) {
  EXPECT_NE(make_model("random:3"), nullptr);
  EXPECT_THROW(make_model("random:x"), InputError);
  EXPECT_THROW(make_model("gpt:1"), InputError);
  EXPECT_THROW(TableModel::parse("a\tb\n"), InputError);
  EXPECT_THROW(TableModel::parse("a\tb\t-1\n"), InputError);
  EXPECT_EQ(decoder_only_prompt({"a", "b"}), "a b \xE2\x86\x92");
}

}  // namespace
}  // namespace xlabel::decoding
