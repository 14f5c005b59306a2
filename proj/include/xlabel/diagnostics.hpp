#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xlabel/core.hpp"

namespace xlabel::diagnostics {

struct OutputDiagnosis {
  std::optional<MarkupError> markup_error;
  std::vector<std::string> hallucinated_words;  // in output order, unique
  bool splitting = false;
  std::vector<std::string> missing_words;       // input words with no counterpart
  bool clean = true;
};

// Compares the words of a raw model output (tags stripped leniently) to the
// input words. Matching words are anchored by a longest common subsequence;
// each mismatching region is re-segmented greedily at character level: groups
// whose concatenations agree count as splitting, output words left over are
// hallucinations.
OutputDiagnosis diagnose(const Words& input_words, std::string_view raw_output);

struct CorpusRates {
  std::size_t sentences = 0;
  double markup = 0;         // percentages in [0, 100]
  double hallucination = 0;
  double splitting = 0;
  double any = 0;
  bool empty_corpus = false;
};

using OutputPair = std::pair<Words, std::string>;

CorpusRates corpus_rates(const std::vector<OutputPair>& pairs);
CorpusRates rates_from(const std::vector<OutputDiagnosis>& diagnoses);

std::vector<OutputDiagnosis> diagnose_batch_serial(const std::vector<OutputPair>& pairs);
std::vector<OutputDiagnosis> diagnose_batch_parallel(const std::vector<OutputPair>& pairs);

// Whitespace-split IOB2 conversion of a raw output. Tags are read leniently
// (an open tag replaces any open one, stray closes are ignored); the result is
// padded with O or truncated to expected_len.
std::vector<std::string> to_iob2_lenient(std::string_view raw_output, std::size_t expected_len);

}  // namespace xlabel::diagnostics
