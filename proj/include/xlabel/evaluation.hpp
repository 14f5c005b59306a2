#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "xlabel/core.hpp"

namespace xlabel::eval {

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  // Zero denominators give 0.
  double precision() const;
  double recall() const;
  double f1() const;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct EntityF1Report {
  std::map<std::string, Counts> per_category;
  Counts micro;

  EntityF1Report& operator+=(const EntityF1Report& o);
  friend bool operator==(const EntityF1Report&, const EntityF1Report&) = default;
};

// Exact (start, end, category) matching, micro-averaged over the corpus.
// Throws InputError on corpus or sentence length mismatch.
EntityF1Report entity_f1(const std::vector<LabeledSentence>& gold,
                         const std::vector<LabeledSentence>& pred);

// Counting partitioned across OpenMP threads, then merged; same result as
// entity_f1.
EntityF1Report entity_f1_parallel(const std::vector<LabeledSentence>& gold,
                                  const std::vector<LabeledSentence>& pred);

EntityF1Report sentence_counts(const LabeledSentence& gold, const LabeledSentence& pred);

// Reads both CoNLL files, decodes tags (repairing malformed transitions) and
// scores them. Token mismatches are reported with line numbers. `rename` maps
// category names on both sides before scoring.
EntityF1Report f1_from_tag_files(const std::filesystem::path& gold_path,
                                 const std::filesystem::path& pred_path, TagScheme scheme,
                                 const std::map<std::string, std::string>& rename = {});

// Per-category table with a trailing micro row.
void print_table(std::ostream& out, const EntityF1Report& report);
void write_csv(std::ostream& out, const EntityF1Report& report);

}  // namespace xlabel::eval
