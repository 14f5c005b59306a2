#include "xlabel/diagnostics.hpp"

#include <algorithm>
#include <set>

namespace xlabel::diagnostics {

namespace {

// Index pairs (input, output) of one longest common subsequence, in order.
std::vector<std::pair<std::size_t, std::size_t>> lcs_anchors(const Words& a, const Words& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::vector<std::size_t>> len(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      len[i][j] = a[i] == b[j] ? len[i + 1][j + 1] + 1 : std::max(len[i + 1][j], len[i][j + 1]);
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n && j < m) {
    if (a[i] == b[j]) {
      out.emplace_back(i++, j++);
    } else if (len[i + 1][j] >= len[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

struct RegionOutcome {
  bool splitting = false;
  std::vector<std::string> unmatched_out;
  std::vector<std::string> unmatched_in;
};

// Greedy character-level re-segmentation of in[i0, i1) against out[j0, j1).
void resegment(const Words& in, std::size_t i0, std::size_t i1, const Words& out, std::size_t j0,
               std::size_t j1, RegionOutcome& result) {
  std::size_t p = i0;
  std::size_t q = j0;
  while (p < i1 && q < j1) {
    std::string a = in[p];
    std::string b = out[q];
    std::size_t pe = p + 1;
    std::size_t qe = q + 1;
    bool matched = false;
    while (true) {
      if (a == b) {
        matched = true;
        break;
      }
      if (a.size() < b.size() && b.starts_with(a) && pe < i1) {
        a += in[pe++];
      } else if (b.size() < a.size() && a.starts_with(b) && qe < j1) {
        b += out[qe++];
      } else {
        break;
      }
    }
    if (matched) {
      if (pe - p > 1 || qe - q > 1) result.splitting = true;
      p = pe;
      q = qe;
    } else {
      result.unmatched_out.push_back(out[q++]);
      result.unmatched_in.push_back(in[p++]);
    }
  }
  for (; q < j1; ++q) result.unmatched_out.push_back(out[q]);
  for (; p < i1; ++p) result.unmatched_in.push_back(in[p]);
}

}  // namespace

OutputDiagnosis diagnose(const Words& input_words, std::string_view raw_output) {
  OutputDiagnosis d;
  auto parsed = parse_tagged_text(raw_output);
  if (auto* err = std::get_if<MarkupError>(&parsed)) d.markup_error = *err;

  Words output_words;
  for (auto& tok : tokenize_markup(raw_output)) {
    if (tok.kind == MarkupToken::Kind::Word) output_words.push_back(std::move(tok.text));
  }

  RegionOutcome region;
  std::size_t i = 0;
  std::size_t j = 0;
  auto anchors = lcs_anchors(input_words, output_words);
  anchors.emplace_back(input_words.size(), output_words.size());
  for (const auto& [ai, aj] : anchors) {
    resegment(input_words, i, ai, output_words, j, aj, region);
    i = ai + 1;
    j = aj + 1;
  }

  const std::set<std::string> known(input_words.begin(), input_words.end());
  std::set<std::string> seen;
  for (const auto& w : region.unmatched_out) {
    if (!known.count(w) && seen.insert(w).second) d.hallucinated_words.push_back(w);
  }
  d.missing_words = std::move(region.unmatched_in);
  d.splitting = region.splitting;
  d.clean = !d.markup_error && d.hallucinated_words.empty() && !d.splitting && d.missing_words.empty();
  return d;
}

CorpusRates rates_from(const std::vector<OutputDiagnosis>& diagnoses) {
  CorpusRates r;
  r.sentences = diagnoses.size();
  if (diagnoses.empty()) {
    r.empty_corpus = true;
    return r;
  }
  std::size_t markup = 0, halluc = 0, split = 0, any = 0;
  for (const auto& d : diagnoses) {
    markup += d.markup_error ? 1 : 0;
    halluc += d.hallucinated_words.empty() ? 0 : 1;
    split += d.splitting ? 1 : 0;
    any += d.clean ? 0 : 1;
  }
  const double n = static_cast<double>(diagnoses.size());
  r.markup = 100.0 * static_cast<double>(markup) / n;
  r.hallucination = 100.0 * static_cast<double>(halluc) / n;
  r.splitting = 100.0 * static_cast<double>(split) / n;
  r.any = 100.0 * static_cast<double>(any) / n;
  return r;
}

std::vector<OutputDiagnosis> diagnose_batch_serial(const std::vector<OutputPair>& pairs) {
  std::vector<OutputDiagnosis> out;
  out.reserve(pairs.size());
  for (const auto& [input, raw] : pairs) out.push_back(diagnose(input, raw));
  return out;
}

std::vector<OutputDiagnosis> diagnose_batch_parallel(const std::vector<OutputPair>& pairs) {
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
  std::vector<OutputDiagnosis> out(pairs.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& [input, raw] = pairs[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = diagnose(input, raw);
  }
  return out;
}

CorpusRates corpus_rates(const std::vector<OutputPair>& pairs) {
  return rates_from(diagnose_batch_parallel(pairs));
}

std::vector<std::string> to_iob2_lenient(std::string_view raw_output, std::size_t expected_len) {
  std::vector<std::string> tags;
  std::optional<std::string> open;
  bool first = false;
  for (const auto& tok : tokenize_markup(raw_output)) {
    switch (tok.kind) {
      case MarkupToken::Kind::Open:
        open = tok.text;
        first = true;
        break;
      case MarkupToken::Kind::Close:
        open.reset();
        break;
      case MarkupToken::Kind::Word:
        if (open) {
          tags.push_back((first ? "B-" : "I-") + *open);
          first = false;
        } else {
          tags.emplace_back("O");
        }
        break;
    }
  }
  tags.resize(expected_len, "O");
  return tags;
}

}  // namespace xlabel::diagnostics
