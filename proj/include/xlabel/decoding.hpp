#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "xlabel/core.hpp"

namespace xlabel::decoding {

using TokenId = std::uint32_t;

// Marks the first piece of a word, as in SentencePiece vocabularies.
inline constexpr std::string_view kWordStart = "\xE2\x96\x81";  // U+2581
inline constexpr std::string_view kEndToken = "</s>";
inline constexpr std::string_view kBosContext = "<s>";
// Separator between the unlabeled and the labeled sentence in decoder-only prompts.
inline constexpr std::string_view kPromptSeparator = "\xE2\x86\x92";  // U+2192

std::string open_tag(std::string_view category);
std::string close_tag(std::string_view category);

// Source text for decoder-only models: "w1 ... wn →".
std::string decoder_only_prompt(const Words& input);

// Splits a word into surface pieces; the first piece carries kWordStart and the
// concatenated pieces (minus the marker) reproduce the word.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> pieces(std::string_view word) const = 0;
};

// One piece per word.
class WholeWordTokenizer : public Tokenizer {
 public:
  std::vector<std::string> pieces(std::string_view word) const override;
};

// Pieces of at most `max_chars` code points.
class ChunkTokenizer : public Tokenizer {
 public:
  explicit ChunkTokenizer(std::size_t max_chars);
  std::vector<std::string> pieces(std::string_view word) const override;

 private:
  std::size_t max_chars_;
};

// Session vocabulary: word pieces, one open and one close tag per category,
// and the end token.
class Vocabulary {
 public:
  TokenId add(std::string_view surface);
  std::optional<TokenId> find(std::string_view surface) const;
  TokenId at(std::string_view surface) const;  // throws ContractError when absent
  const std::string& surface(TokenId id) const { return surfaces_.at(id); }
  std::size_t size() const { return surfaces_.size(); }

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, TokenId> ids_;
};

// An autoregressive model: a probability for every vocabulary token given the
// prefix (the empty prefix conditions on <bos>). Values are non-negative and
// sum to 1. Implementations are stateless and safe to call concurrently.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::vector<double> next_distribution(const Vocabulary& vocab,
                                                std::span<const TokenId> prefix) const = 0;
  // Surfaces the model can emit beyond the input pieces and tag tokens.
  virtual std::vector<std::string> extra_surfaces() const { return {}; }
};

// Softmax over pseudo-random logits derived from (seed, last `order` surfaces,
// candidate surface). `distractors` are added to every vocabulary.
class RandomModel : public Model {
 public:
  explicit RandomModel(std::uint64_t seed, double logit_scale = 4.0, std::size_t order = 3,
                       std::vector<std::string> distractors = {});
  std::vector<double> next_distribution(const Vocabulary& vocab,
                                        std::span<const TokenId> prefix) const override;
  std::vector<std::string> extra_surfaces() const override { return distractors_; }

 private:
  std::uint64_t seed_;
  double logit_scale_;
  std::size_t order_;
  std::vector<std::string> distractors_;
};

// Conditional tables keyed by prefix suffix. Lines are
//   context TAB token TAB weight
// where context is "*" (any prefix) or space-separated surfaces ending the
// prefix, "<s>" standing for the sentence start. The longest matching context
// wins; unlisted tokens get the floor weight ("floor TAB w", default 1e-6);
// weights are normalized to sum to 1.
class TableModel : public Model {
 public:
  void set_floor(double floor) { floor_ = floor; }
  void add(std::string context, std::string token, double weight);

  static TableModel load(const std::filesystem::path& path);
  static TableModel parse(std::string_view text);

  std::vector<double> next_distribution(const Vocabulary& vocab,
                                        std::span<const TokenId> prefix) const override;
  std::vector<std::string> extra_surfaces() const override;

 private:
  double floor_ = 1e-6;
  std::size_t max_context_ = 0;
  std::map<std::string, std::map<std::string, double>, std::less<>> rows_;
};

// Holds the vocabulary and token sequences for one input sentence.
class Session {
 public:
  Session(Words input, std::vector<std::string> categories, const Model& model,
          const Tokenizer& tokenizer);

  const Words& input() const { return input_; }
  const std::vector<std::string>& categories() const { return categories_; }
  const Vocabulary& vocab() const { return vocab_; }
  const Model& model() const { return *model_; }

  const std::vector<TokenId>& word_tokens(std::size_t word) const { return word_tokens_.at(word); }
  TokenId open_token(std::size_t category) const { return open_ids_.at(category); }
  TokenId close_token(std::size_t category) const { return close_ids_.at(category); }
  TokenId end_token() const { return end_id_; }

  // Rebuilds output text from tokens: pieces with kWordStart begin a word,
  // other pieces extend the previous word, tags stand alone, the end token
  // emits nothing.
  std::string detokenize(std::span<const TokenId> tokens) const;

 private:
  Words input_;
  std::vector<std::string> categories_;  // sorted, unique
  const Model* model_;
  Vocabulary vocab_;
  std::vector<std::vector<TokenId>> word_tokens_;
  std::vector<TokenId> open_ids_;
  std::vector<TokenId> close_ids_;
  TokenId end_id_ = 0;
};

struct CopyNextWord {
  friend bool operator==(const CopyNextWord&, const CopyNextWord&) = default;
};
struct OpenTag {
  std::size_t category = 0;  // index into Session::categories()
  friend bool operator==(const OpenTag&, const OpenTag&) = default;
};
struct CloseTag {
  friend bool operator==(const CloseTag&, const CloseTag&) = default;
};
struct End {
  friend bool operator==(const End&, const End&) = default;
};
using Action = std::variant<CopyNextWord, OpenTag, CloseTag, End>;

std::string describe(const Action& action, const std::vector<std::string>& categories);

struct DecodeState {
  std::size_t cursor = 0;                 // input words copied so far
  std::optional<std::size_t> open_tag;    // category index
  std::size_t words_in_tag = 0;
  std::vector<TokenId> emitted;
  double logprob = 0;
  bool finished = false;
};

// Valid next actions, in canonical order: copy, open tags by category name,
// close, end. Never empty for an unfinished state.
std::vector<Action> valid_actions(const DecodeState& state, std::size_t input_len,
                                  std::size_t category_count);

// Appends the action's tokens (all subtokens of a copied word, each scored in
// sequence) and updates the automaton. Throws ContractError on an action not
// in valid_actions(state).
DecodeState apply_action(const DecodeState& state, const Action& action, const Session& session);

struct DecodeResult {
  LabeledSentence sentence;
  std::string text;
  std::vector<TokenId> tokens;
  double logprob = 0;
};

// Argmax over valid actions at every step until End.
DecodeResult constrained_greedy(const Session& session);

// Beam search with the automaton masking every expansion. Finished hypotheses
// are set aside; the best one by total log-probability is returned (no length
// normalization). k = 1 reproduces constrained_greedy.
DecodeResult constrained_beam(const Session& session, std::size_t beam_width);

struct UnconstrainedResult {
  std::string text;
  std::vector<TokenId> tokens;
  double logprob = 0;
};

// Same model without masking; stops at the end token or after `max_tokens`.
UnconstrainedResult unconstrained_beam(const Session& session, std::size_t beam_width,
                                       std::size_t max_tokens);

struct SequenceLogprob {
  double logprob = 0;
  std::optional<std::size_t> zero_at;  // first token with probability 0
};

SequenceLogprob sequence_logprob(std::span<const TokenId> tokens, const Session& session);

// Constrained decoding of many sentences; outputs in input order.
std::vector<DecodeResult> decode_batch_serial(const std::vector<Words>& inputs,
                                              const std::vector<std::string>& categories,
                                              const Model& model, const Tokenizer& tokenizer,
                                              std::size_t beam_width);
std::vector<DecodeResult> decode_batch_parallel(const std::vector<Words>& inputs,
                                                const std::vector<std::string>& categories,
                                                const Model& model, const Tokenizer& tokenizer,
                                                std::size_t beam_width);

// "mock-table:<file>" or "random:<seed>".
std::unique_ptr<Model> make_model(std::string_view spec);

}  // namespace xlabel::decoding
