#include "xlabel/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "xlabel/error.hpp"
#include "xlabel/utf8.hpp"

namespace xlabel::io {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

}  // namespace

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

std::vector<std::string> read_lines(std::istream& in, const std::string& name) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!utf8::is_valid(line)) {
      throw InputError(name + ":" + std::to_string(lines.size() + 1) + ": invalid UTF-8");
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> read_lines_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_lines(in, path.string());
}

std::vector<ConllSentence> read_conll(std::istream& in, const std::string& name) {
  std::vector<ConllSentence> out;
  ConllSentence current;
  const auto lines = read_lines(in, name);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string& line = lines[n];
    if (split_words(line).empty()) {
      if (!current.words.empty()) out.push_back(std::move(current));
      current = ConllSentence{};
      continue;
    }
    const auto first_tab = line.find('\t');
    const auto last_tab = line.rfind('\t');
    if (first_tab == std::string::npos) {
      throw InputError(name + ":" + std::to_string(n + 1) + ": expected 'token<TAB>tag'");
    }
    std::string token = line.substr(0, first_tab);
    std::string tag = line.substr(last_tab + 1);
    if (!is_valid_word(token)) {
      throw InputError(name + ":" + std::to_string(n + 1) + ": invalid token '" + token + "'");
    }
    if (tag.empty()) {
      throw InputError(name + ":" + std::to_string(n + 1) + ": empty tag");
    }
    if (current.words.empty()) current.first_line = n + 1;
    current.words.push_back(std::move(token));
    current.tags.push_back(std::move(tag));
  }
  if (!current.words.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<ConllSentence> read_conll_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_conll(in, path.string());
}

void write_conll(std::ostream& out, const std::vector<LabeledSentence>& sentences,
                 TagScheme scheme) {
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    if (s > 0) out << '\n';
    const auto tags = spans_to_tags(sentences[s], scheme);
    for (std::size_t i = 0; i < tags.size(); ++i) {
      out << sentences[s].words()[i] << '\t' << tags[i] << '\n';
    }
  }
}

std::vector<LabeledSentence> to_labeled(const std::vector<ConllSentence>& conll,
                                        TagScheme scheme, const std::string& name) {
  std::vector<LabeledSentence> out;
  out.reserve(conll.size());
  for (const auto& sentence : conll) {
    try {
      out.emplace_back(sentence.words, tags_to_spans(sentence.tags, scheme));
    } catch (const CodecError& e) {
      throw InputError(name + ":" + std::to_string(sentence.first_line + e.index()) + ": " +
                       e.what());
    }
  }
  return out;
}

std::vector<LabeledSentence> read_labeled_conll_file(const std::filesystem::path& path,
                                                     TagScheme scheme) {
  return to_labeled(read_conll_file(path), scheme, path.string());
}

std::vector<Words> read_tokenized_file(const std::filesystem::path& path) {
  std::vector<Words> out;
  const auto lines = read_lines_file(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    Words words = split_words(lines[n]);
    for (const auto& w : words) {
      if (!is_valid_word(w)) {
        throw InputError(path.string() + ":" + std::to_string(n + 1) + ": invalid token '" + w + "'");
      }
    }
    out.push_back(std::move(words));
  }
  return out;
}

std::vector<LabeledSentence> read_tagged_file(const std::filesystem::path& path) {
  std::vector<LabeledSentence> out;
  const auto lines = read_lines_file(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    auto parsed = parse_tagged_text(lines[n]);
    if (const auto* err = std::get_if<MarkupError>(&parsed)) {
      throw InputError(path.string() + ":" + std::to_string(n + 1) + ": " +
                       std::string(to_string(err->kind)) + ": " + err->detail);
    }
    out.push_back(std::get<LabeledSentence>(std::move(parsed)));
  }
  return out;
}

void write_tagged(std::ostream& out, const std::vector<LabeledSentence>& sentences) {
  for (const auto& s : sentences) out << to_tagged_text(s) << '\n';
}

}  // namespace xlabel::io
