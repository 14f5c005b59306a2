#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "xlabel/core.hpp"

namespace xlabel::io {

// One sentence of a CoNLL column file: tokens and the tag in the last column.
struct ConllSentence {
  Words words;
  std::vector<std::string> tags;
  std::size_t first_line = 0;  // 1-based line of the first token
};

// "token TAB tag" per line, blank line between sentences. Extra middle columns
// are tolerated; the tag is always the last column. Throws InputError with the
// offending line number.
std::vector<ConllSentence> read_conll(std::istream& in, const std::string& name = "<stream>");
std::vector<ConllSentence> read_conll_file(const std::filesystem::path& path);

void write_conll(std::ostream& out, const std::vector<LabeledSentence>& sentences, TagScheme scheme);

// Decodes CoNLL tags into labeled sentences (applying the codec repair rule).
std::vector<LabeledSentence> to_labeled(const std::vector<ConllSentence>& conll, TagScheme scheme,
                                        const std::string& name = "<stream>");
std::vector<LabeledSentence> read_labeled_conll_file(const std::filesystem::path& path,
                                                     TagScheme scheme);

// Lines of a UTF-8 text file, without trailing newline characters. Invalid
// UTF-8 is rejected with the line number.
std::vector<std::string> read_lines(std::istream& in, const std::string& name = "<stream>");
std::vector<std::string> read_lines_file(const std::filesystem::path& path);

// One whitespace-tokenized sentence per line.
std::vector<Words> read_tokenized_file(const std::filesystem::path& path);

// One tagged-text sentence per line; a MarkupError is reported as InputError.
std::vector<LabeledSentence> read_tagged_file(const std::filesystem::path& path);
void write_tagged(std::ostream& out, const std::vector<LabeledSentence>& sentences);

// Opens for writing and throws InputError when that fails.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace xlabel::io
