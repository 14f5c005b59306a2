#pragma once

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "xlabel/core.hpp"

namespace xlabel::projection {

struct AlignmentPair {
  std::size_t src = 0;
  std::size_t tgt = 0;
  friend auto operator<=>(const AlignmentPair&, const AlignmentPair&) = default;
};

// Word alignment for one sentence pair; pairs are kept sorted and unique.
class AlignmentSet {
 public:
  AlignmentSet() = default;
  explicit AlignmentSet(std::vector<AlignmentPair> pairs);

  const std::vector<AlignmentPair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }

  // Swaps the src and tgt sides.
  AlignmentSet inverted() const;
  AlignmentSet without(const AlignmentPair& pair) const;

  // Throws InputError when an index falls outside either sentence.
  void check_bounds(std::size_t src_len, std::size_t tgt_len) const;

  friend bool operator==(const AlignmentSet&, const AlignmentSet&) = default;

 private:
  std::vector<AlignmentPair> pairs_;
};

// Parses one Pharaoh line: space-separated "i-j" tokens. Aligners that emit
// "i-j-p" or "i?j" style suffixes are not supported.
AlignmentSet parse_pharaoh(std::string_view line);
std::string to_pharaoh(const AlignmentSet& alignment);

struct ProjectionReport {
  std::vector<Span> projected;  // sorted by start, pairwise non-overlapping
  std::size_t dropped_splits = 0;
  std::size_t merged_gaps = 0;
  std::size_t collisions_merged = 0;
  std::size_t collisions_resolved = 0;
  std::size_t punct_alignments_ignored = 0;
  std::size_t unaligned_spans = 0;  // source spans with no surviving alignment

  ProjectionReport& operator+=(const ProjectionReport& other);
  friend bool operator==(const ProjectionReport&, const ProjectionReport&) = default;
};

// Transfers the spans of `source` onto `target_words` through `alignment`.
//
// Steps, in order:
//  1. alignment pairs linking a labeled source word to a punctuation-only
//     target word are ignored;
//  2. each source span collects the target words aligned to any of its words,
//     grouped into maximal contiguous runs;
//  3. runs separated by exactly one word are merged, left to right; if more
//     than one run remains the longest is kept (leftmost on ties);
//  4. overlapping projections of the same category merge into their union;
//     overlapping projections of different categories keep the longer one
//     (the one whose source span starts first on ties).
//
// Every source span ends up counted exactly once among: projected spans,
// unaligned_spans, collisions_merged, collisions_resolved.
ProjectionReport project(const LabeledSentence& source, const Words& target_words,
                         const AlignmentSet& alignment);

// Element-wise projection of a gold source dataset onto its translations.
std::vector<LabeledSentence> translate_train_assemble(const std::vector<LabeledSentence>& source,
                                                      const std::vector<Words>& translations,
                                                      const std::vector<AlignmentSet>& alignments);

// Projects predictions made on translated sentences back onto the originals.
// Alignment pairs read src = prediction side, tgt = original side.
std::vector<LabeledSentence> translate_test_backproject(
    const std::vector<LabeledSentence>& predictions, const std::vector<Words>& originals,
    const std::vector<AlignmentSet>& alignments);

// Batch kernel behind both directions; reports are in input order. The serial
// version is the reference for the OpenMP one.
std::vector<ProjectionReport> project_batch_serial(const std::vector<LabeledSentence>& source,
                                                   const std::vector<Words>& targets,
                                                   const std::vector<AlignmentSet>& alignments);
std::vector<ProjectionReport> project_batch_parallel(const std::vector<LabeledSentence>& source,
                                                     const std::vector<Words>& targets,
                                                     const std::vector<AlignmentSet>& alignments);

}  // namespace xlabel::projection
