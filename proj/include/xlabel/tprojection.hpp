#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xlabel/core.hpp"

namespace xlabel::tproj {

// Produces p(A^i | B, A^{<i}) for every token of `target` (A) given `source`
// (B), under the scorer's own tokenization. Each value must lie in (0, 1].
// Implementations must be safe to call concurrently.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<double> token_conditional_probs(std::string_view target,
                                                      std::string_view source) const = 0;
};

// Explicit per-pair token probability table. Lookups that miss fall back to
// `fallback` per whitespace token when set, and throw ScorerError otherwise.
class TableScorer : public Scorer {
 public:
  explicit TableScorer(std::optional<double> fallback = std::nullopt) : fallback_(fallback) {}

  void set(std::string target, std::string source, std::vector<double> probs);

  // Lines of "target TAB source TAB p1 p2 ...".
  static TableScorer load(const std::filesystem::path& path,
                          std::optional<double> fallback = std::nullopt);

  std::vector<double> token_conditional_probs(std::string_view target,
                                              std::string_view source) const override;

 private:
  std::map<std::pair<std::string, std::string>, std::vector<double>, std::less<>> table_;
  std::optional<double> fallback_;
};

// Heuristic scorer: each whitespace token of the target gets
// floor + (1 - floor) * max Dice coefficient of character bigrams against the
// source tokens (case-folded ASCII). Identical texts score 1 per token.
class CharOverlapScorer : public Scorer {
 public:
  explicit CharOverlapScorer(double floor = 0.01) : floor_(floor) {}
  std::vector<double> token_conditional_probs(std::string_view target,
                                              std::string_view source) const override;

 private:
  double floor_;
};

// p(A|B) = (prod_i p(A^i | B, A^{<i}))^(1/|A|), computed in log space over
// the scorer's tokens. Throws ScorerError on an empty list or a probability
// outside (0, 1].
double conditional_probability(std::string_view a, std::string_view b, const Scorer& scorer);

// Replayable store of p(A|B) values: "a TAB b TAB p" lines.
class ScoreCache {
 public:
  std::optional<double> find(std::string_view a, std::string_view b) const;
  void insert(std::string a, std::string b, double p);
  std::size_t size() const { return entries_.size(); }

  double get_or_compute(std::string_view a, std::string_view b, const Scorer& scorer);

  static ScoreCache load(const std::filesystem::path& path);
  void save(std::ostream& out) const;

 private:
  std::map<std::pair<std::string, std::string>, double, std::less<>> entries_;
};

struct TranslationScore {
  double p_a_given_b = 0;
  double p_b_given_a = 0;
  double p_a_given_a = 0;
  double p_b_given_b = 0;
  double sim_a_given_b = 0;  // p(A|B) / p(A|A)
  double sim_b_given_a = 0;
  double sim = 0;            // mean of the two directions
  friend bool operator==(const TranslationScore&, const TranslationScore&) = default;
};

TranslationScore translation_similarity(std::string_view a, std::string_view b,
                                        const Scorer& scorer, ScoreCache* cache = nullptr);

struct WordRange {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - start; }
  bool overlaps(const WordRange& o) const { return start < o.end && o.start < end; }
  friend auto operator<=>(const WordRange&, const WordRange&) = default;
};

// A projection candidate. External candidates arrive as text and are resolved
// into ranges by filter_candidates; n-gram candidates carry a range directly.
struct Candidate {
  std::optional<WordRange> range;
  std::string text;
  std::size_t rank = 0;  // generator rank, 0 = most probable
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct SpanCandidates {
  Span source;  // the labeled source span; its category labels every candidate
  std::vector<Candidate> candidates;
  friend bool operator==(const SpanCandidates&, const SpanCandidates&) = default;
};

enum class Provenance { NGram, External };

struct CandidateSet {
  Provenance provenance = Provenance::External;
  std::vector<SpanCandidates> spans;  // one entry per source span, in source order
  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

// Every contiguous range of the target (m(m+1)/2 of them) for every source span,
// ranked in (start, end) order.
CandidateSet generate_ngram_candidates(const Words& target_words,
                                       const std::vector<Span>& source_spans);

// Resolves text candidates into every contiguous occurrence in the target and
// drops the ones that never occur. Ranged candidates outside the target are
// dropped too.
CandidateSet filter_candidates(const CandidateSet& candidates, const Words& target_words);

struct SelectionResult {
  LabeledSentence labeled;                        // over the target words
  std::vector<std::optional<WordRange>> chosen;   // per source span
};

// Per-(source span, candidate range) similarity, laid out to match the pool
// built by select_candidates.
struct ScoredPool {
  std::vector<WordRange> ranges;                  // distinct ranges per category, flattened
  std::vector<std::string> categories;            // parallel to ranges
  std::vector<std::vector<double>> score;         // [span][pool index], NaN = other category
};

// Scoring phase: sim(source span text, candidate text) for every source span
// and every candidate of its category. Independent pairs, OpenMP fan-out in the
// parallel variant; the serial variant is the reference.
ScoredPool score_pool_serial(const CandidateSet& candidates, const LabeledSentence& source,
                             const Words& target_words, const Scorer& scorer);
ScoredPool score_pool_parallel(const CandidateSet& candidates, const LabeledSentence& source,
                               const Words& target_words, const Scorer& scorer);
// Cache-backed scoring; new values are written into the cache.
ScoredPool score_pool_cached(const CandidateSet& candidates, const LabeledSentence& source,
                             const Words& target_words, const Scorer& scorer, ScoreCache& cache);

// Selection phase: source spans left to right; each takes the highest scoring
// remaining candidate of its category (ties: lower start, then shorter); the
// winner and every candidate overlapping it leave the pool.
SelectionResult select_from_scores(const ScoredPool& pool, const CandidateSet& candidates,
                                   const Words& target_words);

SelectionResult select_candidates(const CandidateSet& candidates, const LabeledSentence& source,
                                  const Words& target_words, const Scorer& scorer,
                                  ScoreCache* cache = nullptr);

// Ablation: per source span (left to right) take its best-ranked surviving
// candidate, with the same overlap removal.
SelectionResult select_most_probable(const CandidateSet& candidates, const Words& target_words);

// Upper bound: a candidate that exactly matches a gold span (range and
// category) wins; otherwise the best-ranked one.
SelectionResult oracle_upper_bound(const CandidateSet& candidates, const LabeledSentence& gold);

struct SweepRow {
  std::size_t k = 0;
  double hit_rate = 0;  // fraction of source spans with a gold match among ranks < k
  std::size_t hits = 0;
  std::size_t total = 0;
};

std::vector<SweepRow> candidate_sweep(const CandidateSet& candidates, const std::vector<std::size_t>& ks,
                                      const LabeledSentence& gold);
std::vector<SweepRow> candidate_sweep(const std::vector<CandidateSet>& candidates,
                                      const std::vector<std::size_t>& ks,
                                      const std::vector<LabeledSentence>& gold);

// Candidate generation prompt: the target sentence followed by one
// "<Category> None </Category>" per source span.
std::string candidate_prompt(const Words& target_words, const std::vector<Span>& source_spans);

// Reads a generator answer in the prompt format back into (category, text)
// pairs, in order. Tags whose content is "None" are skipped.
std::vector<std::pair<std::string, std::string>> parse_candidate_answer(std::string_view answer);

// Candidate file: "sentence.span TAB rank TAB text" lines (0-based ids).
// Returns, per sentence id, per span id, the ranked candidate texts.
using CandidateTable = std::map<std::size_t, std::map<std::size_t, std::vector<Candidate>>>;
CandidateTable read_candidate_file(const std::filesystem::path& path);
void write_candidate_file(std::ostream& out, const std::vector<CandidateSet>& sets);

// Builds the External CandidateSet for one sentence out of a candidate table.
CandidateSet external_candidates(const CandidateTable& table, std::size_t sentence,
                                 const std::vector<Span>& source_spans);

}  // namespace xlabel::tproj
