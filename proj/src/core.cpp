#include "xlabel/core.hpp"

#include <algorithm>
#include <cctype>

#include "xlabel/error.hpp"

namespace xlabel {

namespace {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_category_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// Length of the tag token starting at text[pos], or 0 when there is none.
std::size_t match_tag(std::string_view text, std::size_t pos, bool& closing) {
  if (text[pos] != '<') return 0;
  std::size_t i = pos + 1;
  closing = i < text.size() && text[i] == '/';
  if (closing) ++i;
  const std::size_t name_start = i;
  while (i < text.size() && is_category_char(text[i])) ++i;
  if (i == name_start || i >= text.size() || text[i] != '>') return 0;
  return i + 1 - pos;
}

}  // namespace

bool is_valid_category(std::string_view category) {
  return !category.empty() && std::all_of(category.begin(), category.end(), is_category_char);
}

bool is_valid_word(std::string_view word) {
  if (word.empty()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (is_ascii_space(word[i])) return false;
    bool closing = false;
    if (match_tag(word, i, closing) != 0) return false;
  }
  return true;
}

Words split_words(std::string_view text) {
  Words out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_ascii_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string join_words(const Words& words, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += words[i];
  }
  return out;
}

std::string join_words(const Words& words) { return join_words(words, 0, words.size()); }

LabeledSentence::LabeledSentence(Words words, std::vector<Span> spans)
    : words_(std::move(words)), spans_(std::move(spans)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!is_valid_word(words_[i])) {
      throw InputError("invalid word at index " + std::to_string(i) + ": '" + words_[i] + "'");
    }
  }
  std::sort(spans_.begin(), spans_.end());
  for (std::size_t i = 0; i < spans_.size(); ++i) {
    const Span& s = spans_[i];
    if (s.start >= s.end || s.end > words_.size()) {
      throw InputError("span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                       ") out of range for " + std::to_string(words_.size()) + " words");
    }
    if (!is_valid_category(s.category)) {
      throw InputError("invalid category '" + s.category + "'");
    }
    if (i > 0 && spans_[i - 1].end > s.start) {
      throw InputError("overlapping spans at word " + std::to_string(s.start));
    }
  }
}

std::string LabeledSentence::span_text(const Span& span) const {
  return join_words(words_, span.start, span.end);
}

std::string_view to_string(TagScheme scheme) {
  return scheme == TagScheme::BILOU ? "bilou" : "iob2";
}

TagScheme parse_tag_scheme(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "bilou") return TagScheme::BILOU;
  if (lower == "iob2") return TagScheme::IOB2;
  throw InputError("unknown tag scheme '" + std::string(name) + "' (expected bilou or iob2)");
}

std::vector<std::string> spans_to_tags(const LabeledSentence& sentence, TagScheme scheme) {
  std::vector<std::string> tags(sentence.size(), "O");
  for (const Span& s : sentence.spans()) {
    if (scheme == TagScheme::BILOU && s.length() == 1) {
      tags[s.start] = "U-" + s.category;
      continue;
    }
    tags[s.start] = "B-" + s.category;
    for (std::size_t i = s.start + 1; i < s.end; ++i) tags[i] = "I-" + s.category;
    if (scheme == TagScheme::BILOU) tags[s.end - 1] = "L-" + s.category;
  }
  return tags;
}

std::vector<Span> tags_to_spans(const std::vector<std::string>& tags, TagScheme scheme) {
  std::vector<Span> spans;
  std::optional<Span> open;
  auto close_at = [&](std::size_t end) {
    if (open) {
      open->end = end;
      spans.push_back(std::move(*open));
      open.reset();
    }
  };

  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    if (tag == "O") {
      close_at(i);
      continue;
    }
    if (tag.size() < 3 || tag[1] != '-') {
      throw CodecError("malformed tag '" + tag + "' at index " + std::to_string(i), i);
    }
    const char prefix = tag[0];
    std::string category = tag.substr(2);
    if (!is_valid_category(category)) {
      throw CodecError("invalid category in tag '" + tag + "' at index " + std::to_string(i), i);
    }
    const bool bilou_only = prefix == 'L' || prefix == 'U';
    if ((prefix != 'B' && prefix != 'I' && !bilou_only) ||
        (bilou_only && scheme != TagScheme::BILOU)) {
      throw CodecError("unknown prefix '" + std::string(1, prefix) + "' for " +
                           std::string(to_string(scheme)) + " at index " + std::to_string(i),
                       i);
    }
    const bool continues = open && open->category == category;
    switch (prefix) {
      case 'B':
        close_at(i);
        open = Span{i, i, std::move(category)};
        break;
      case 'I':
        if (!continues) {
          close_at(i);
          open = Span{i, i, std::move(category)};
        }
        break;
      case 'L':
        if (continues) {
          close_at(i + 1);
        } else {
          close_at(i);
          spans.push_back(Span{i, i + 1, std::move(category)});
        }
        break;
      case 'U':
        close_at(i);
        spans.push_back(Span{i, i + 1, std::move(category)});
        break;
    }
  }
  close_at(tags.size());
  return spans;
}

std::string to_tagged_text(const LabeledSentence& sentence) {
  std::string out;
  auto emit = [&out](std::string_view token) {
    if (!out.empty()) out += ' ';
    out += token;
  };
  const auto& spans = sentence.spans();
  std::size_t next = 0;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (next < spans.size() && spans[next].start == i) emit("<" + spans[next].category + ">");
    emit(sentence.words()[i]);
    if (next < spans.size() && spans[next].end == i + 1) {
      emit("</" + spans[next].category + ">");
      ++next;
    }
  }
  return out;
}

std::string_view to_string(MarkupErrorKind kind) {
  switch (kind) {
    case MarkupErrorKind::UnclosedTag: return "UnclosedTag";
    case MarkupErrorKind::UnopenedClose: return "UnopenedClose";
    case MarkupErrorKind::MismatchedClose: return "MismatchedClose";
    case MarkupErrorKind::EmptyTag: return "EmptyTag";
    case MarkupErrorKind::NestedTag: return "NestedTag";
  }
  return "Unknown";
}

std::vector<MarkupToken> tokenize_markup(std::string_view text) {
  std::vector<MarkupToken> out;
  for (const std::string& chunk : split_words(text)) {
    std::size_t word_start = 0;
    std::size_t i = 0;
    while (i < chunk.size()) {
      bool closing = false;
      const std::size_t len = match_tag(chunk, i, closing);
      if (len == 0) {
        ++i;
        continue;
      }
      if (i > word_start) {
        out.push_back({MarkupToken::Kind::Word, chunk.substr(word_start, i - word_start)});
      }
      const std::size_t name_start = i + (closing ? 2 : 1);
      out.push_back({closing ? MarkupToken::Kind::Close : MarkupToken::Kind::Open,
                     chunk.substr(name_start, i + len - 1 - name_start)});
      i += len;
      word_start = i;
    }
    if (word_start < chunk.size()) {
      out.push_back({MarkupToken::Kind::Word, chunk.substr(word_start)});
    }
  }
  return out;
}

TaggedParse parse_tagged_text(std::string_view text) {
  const auto tokens = tokenize_markup(text);
  Words words;
  std::vector<Span> spans;
  std::optional<Span> open;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const MarkupToken& tok = tokens[t];
    switch (tok.kind) {
      case MarkupToken::Kind::Word:
        words.push_back(tok.text);
        break;
      case MarkupToken::Kind::Open:
        if (open) {
          return MarkupError{MarkupErrorKind::NestedTag, t,
                             "<" + tok.text + "> opened inside <" + open->category + ">"};
        }
        open = Span{words.size(), words.size(), tok.text};
        break;
      case MarkupToken::Kind::Close:
        if (!open) {
          return MarkupError{MarkupErrorKind::UnopenedClose, t, "</" + tok.text + "> without open tag"};
        }
        if (open->category != tok.text) {
          return MarkupError{MarkupErrorKind::MismatchedClose, t,
                             "</" + tok.text + "> closes <" + open->category + ">"};
        }
        if (open->start == words.size()) {
          return MarkupError{MarkupErrorKind::EmptyTag, t, "<" + tok.text + "> encloses no words"};
        }
        open->end = words.size();
        spans.push_back(std::move(*open));
        open.reset();
        break;
    }
  }
  if (open) {
    return MarkupError{MarkupErrorKind::UnclosedTag, tokens.size(),
                       "<" + open->category + "> never closed"};
  }
  return LabeledSentence(std::move(words), std::move(spans));
}

LabeledSentence rename_categories(const LabeledSentence& sentence,
                                  const std::map<std::string, std::string>& mapping) {
  std::vector<Span> spans = sentence.spans();
  for (Span& s : spans) {
    if (auto it = mapping.find(s.category); it != mapping.end()) s.category = it->second;
  }
  return LabeledSentence(sentence.words(), std::move(spans));
}

}  // namespace xlabel
