#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace xlabel {

using Words = std::vector<std::string>;

// Half-open word range [start, end) labeled with a category.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string category;

  std::size_t length() const { return end - start; }
  bool overlaps(const Span& other) const {
    return start < other.end && other.start < end;
  }

  friend auto operator<=>(const Span&, const Span&) = default;
};

// Category names are restricted to [A-Za-z0-9_]+ so tag tokens are unambiguous.
bool is_valid_category(std::string_view category);

// A word is non-empty, free of ASCII whitespace, and contains no substring that
// would read as a tag token ("<Cat>" or "</Cat>").
bool is_valid_word(std::string_view word);

// Splits on runs of ASCII whitespace.
Words split_words(std::string_view text);
std::string join_words(const Words& words, std::size_t begin, std::size_t end);
std::string join_words(const Words& words);

// Whitespace-tokenized sentence plus non-overlapping typed spans. Spans are
// kept sorted by start; construction validates every invariant and throws
// InputError on violation.
class LabeledSentence {
 public:
  LabeledSentence() = default;
  explicit LabeledSentence(Words words, std::vector<Span> spans = {});

  const Words& words() const { return words_; }
  const std::vector<Span>& spans() const { return spans_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  std::string span_text(const Span& span) const;

  friend bool operator==(const LabeledSentence&, const LabeledSentence&) = default;

 private:
  Words words_;
  std::vector<Span> spans_;
};

enum class TagScheme { BILOU, IOB2 };

std::string_view to_string(TagScheme scheme);
// Accepts "bilou"/"iob2" case-insensitively; throws InputError otherwise.
TagScheme parse_tag_scheme(std::string_view name);

std::vector<std::string> spans_to_tags(const LabeledSentence& sentence, TagScheme scheme);

// Inverse of spans_to_tags. Orphan I-/L- tags (no open span of the same
// category) are repaired into new span starts rather than rejected. Throws
// CodecError on an unknown prefix or malformed tag.
std::vector<Span> tags_to_spans(const std::vector<std::string>& tags, TagScheme scheme);

// "<Person> Obama </Person> went to <Location> New York </Location>"
std::string to_tagged_text(const LabeledSentence& sentence);

enum class MarkupErrorKind { UnclosedTag, UnopenedClose, MismatchedClose, EmptyTag, NestedTag };

std::string_view to_string(MarkupErrorKind kind);

struct MarkupError {
  MarkupErrorKind kind;
  std::size_t token_index = 0;  // position in the tag/word token stream
  std::string detail;

  friend bool operator==(const MarkupError&, const MarkupError&) = default;
};

using TaggedParse = std::variant<LabeledSentence, MarkupError>;

// Tokens of tagged text. Tags glued to words ("<X>Obama</X>") are split out.
struct MarkupToken {
  enum class Kind { Word, Open, Close };
  Kind kind;
  std::string text;  // the word, or the category for tags
};

std::vector<MarkupToken> tokenize_markup(std::string_view text);

TaggedParse parse_tagged_text(std::string_view text);

// Renames span categories through a mapping; unmapped categories are kept.
LabeledSentence rename_categories(const LabeledSentence& sentence,
                                  const std::map<std::string, std::string>& mapping);

}  // namespace xlabel
