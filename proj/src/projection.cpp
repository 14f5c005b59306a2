#include "xlabel/projection.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

#include "xlabel/error.hpp"
#include "xlabel/utf8.hpp"

namespace xlabel::projection {

AlignmentSet::AlignmentSet(std::vector<AlignmentPair> pairs) : pairs_(std::move(pairs)) {
  std::sort(pairs_.begin(), pairs_.end());
  pairs_.erase(std::unique(pairs_.begin(), pairs_.end()), pairs_.end());
}

AlignmentSet AlignmentSet::inverted() const {
  std::vector<AlignmentPair> out;
  out.reserve(pairs_.size());
  for (const auto& p : pairs_) out.push_back({p.tgt, p.src});
  return AlignmentSet(std::move(out));
}

AlignmentSet AlignmentSet::without(const AlignmentPair& pair) const {
  std::vector<AlignmentPair> out;
  std::copy_if(pairs_.begin(), pairs_.end(), std::back_inserter(out),
               [&](const AlignmentPair& p) { return p != pair; });
  return AlignmentSet(std::move(out));
}

void AlignmentSet::check_bounds(std::size_t src_len, std::size_t tgt_len) const {
  for (const auto& p : pairs_) {
    if (p.src >= src_len || p.tgt >= tgt_len) {
      throw InputError("alignment " + std::to_string(p.src) + "-" + std::to_string(p.tgt) +
                       " out of range for sentence lengths " + std::to_string(src_len) + "/" +
                       std::to_string(tgt_len));
    }
  }
}

AlignmentSet parse_pharaoh(std::string_view line) {
  std::vector<AlignmentPair> pairs;
  for (const std::string& tok : split_words(line)) {
    const auto dash = tok.find('-');
    AlignmentPair p;
    const char* begin = tok.data();
    const char* end = tok.data() + tok.size();
    bool ok = dash != std::string::npos && dash > 0 && dash + 1 < tok.size();
    if (ok) {
      auto r1 = std::from_chars(begin, begin + dash, p.src);
      auto r2 = std::from_chars(begin + dash + 1, end, p.tgt);
      ok = r1.ec == std::errc() && r1.ptr == begin + dash && r2.ec == std::errc() && r2.ptr == end;
    }
    if (!ok) throw InputError("malformed alignment token '" + tok + "'");
    pairs.push_back(p);
  }
  return AlignmentSet(std::move(pairs));
}

std::string to_pharaoh(const AlignmentSet& alignment) {
  std::string out;
  for (const auto& p : alignment.pairs()) {
    if (!out.empty()) out += ' ';
    out += std::to_string(p.src) + "-" + std::to_string(p.tgt);
  }
  return out;
}

ProjectionReport& ProjectionReport::operator+=(const ProjectionReport& o) {
  projected.insert(projected.end(), o.projected.begin(), o.projected.end());
  dropped_splits += o.dropped_splits;
  merged_gaps += o.merged_gaps;
  collisions_merged += o.collisions_merged;
  collisions_resolved += o.collisions_resolved;
  punct_alignments_ignored += o.punct_alignments_ignored;
  unaligned_spans += o.unaligned_spans;
  return *this;
}

namespace {

struct WordRun {
  std::size_t start;
  std::size_t end;
};

struct Projected {
  Span span;
  std::size_t source_start;
};

}  // namespace

ProjectionReport project(const LabeledSentence& source, const Words& target_words,
                         const AlignmentSet& alignment) {
  ProjectionReport report;
  if (target_words.empty()) return report;
  alignment.check_bounds(source.size(), target_words.size());

  // Owning source span for every source word, if any.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(source.size(), kNone);
  const auto& spans = source.spans();
  for (std::size_t s = 0; s < spans.size(); ++s) {
    for (std::size_t i = spans[s].start; i < spans[s].end; ++i) owner[i] = s;
  }

  std::vector<std::vector<bool>> aligned(spans.size(), std::vector<bool>(target_words.size(), false));
  for (const auto& p : alignment.pairs()) {
    if (owner[p.src] == kNone) continue;
    if (utf8::is_punctuation_word(target_words[p.tgt])) {
      ++report.punct_alignments_ignored;
      continue;
    }
    aligned[owner[p.src]][p.tgt] = true;
  }

  std::vector<Projected> projected;
  for (std::size_t s = 0; s < spans.size(); ++s) {
    std::vector<WordRun> runs;
    for (std::size_t j = 0; j < target_words.size(); ++j) {
      if (!aligned[s][j]) continue;
      if (!runs.empty() && runs.back().end == j) {
        runs.back().end = j + 1;
      } else {
        runs.push_back({j, j + 1});
      }
    }
    if (runs.empty()) {
      ++report.unaligned_spans;
      continue;
    }
    std::vector<WordRun> merged{runs.front()};
    for (std::size_t r = 1; r < runs.size(); ++r) {
      if (runs[r].start == merged.back().end + 1) {
        merged.back().end = runs[r].end;
        ++report.merged_gaps;
      } else {
        merged.push_back(runs[r]);
      }
    }
    // max_element keeps the first (leftmost) of equally long runs.
    const auto longest = std::max_element(merged.begin(), merged.end(), [](const WordRun& a, const WordRun& b) {
      return a.end - a.start < b.end - b.start;
    });
    report.dropped_splits += merged.size() - 1;
    projected.push_back({Span{longest->start, longest->end, spans[s].category}, spans[s].start});
  }

  // Same-category overlaps merge into their union.
  std::sort(projected.begin(), projected.end(), [](const Projected& a, const Projected& b) {
    return std::tie(a.span.category, a.span.start, a.span.end) <
           std::tie(b.span.category, b.span.start, b.span.end);
  });
  std::vector<Projected> unioned;
  for (auto& p : projected) {
    if (!unioned.empty() && unioned.back().span.category == p.span.category &&
        unioned.back().span.end > p.span.start) {
      auto& last = unioned.back();
      last.span.end = std::max(last.span.end, p.span.end);
      last.source_start = std::min(last.source_start, p.source_start);
      ++report.collisions_merged;
    } else {
      unioned.push_back(std::move(p));
    }
  }

  // Different-category overlaps keep the longer projection.
  std::sort(unioned.begin(), unioned.end(), [](const Projected& a, const Projected& b) {
    if (a.span.length() != b.span.length()) return a.span.length() > b.span.length();
    return a.source_start < b.source_start;
  });
  for (auto& p : unioned) {
    const bool collides = std::any_of(report.projected.begin(), report.projected.end(),
                                      [&](const Span& kept) { return kept.overlaps(p.span); });
    if (collides) {
      ++report.collisions_resolved;
    } else {
      report.projected.push_back(std::move(p.span));
    }
  }
  std::sort(report.projected.begin(), report.projected.end());
  return report;
}

namespace {

void check_batch(std::size_t a, std::size_t b, std::size_t c) {
  if (a != b || a != c) {
    throw InputError("batch length mismatch: " + std::to_string(a) + " labeled, " +
                     std::to_string(b) + " target, " + std::to_string(c) + " alignments; first divergent index " +
                     std::to_string(std::min({a, b, c})));
  }
}

ProjectionReport project_item(const std::vector<LabeledSentence>& source,
                              const std::vector<Words>& targets,
                              const std::vector<AlignmentSet>& alignments, std::size_t i) {
  try {
    return project(source[i], targets[i], alignments[i]);
  } catch (const InputError& e) {
    throw InputError("sentence " + std::to_string(i) + ": " + e.what());
  }
}

std::vector<LabeledSentence> assemble(const std::vector<Words>& targets,
                                      std::vector<ProjectionReport> reports) {
  std::vector<LabeledSentence> out;
  out.reserve(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out.emplace_back(targets[i], std::move(reports[i].projected));
  }
  return out;
}

}  // namespace

std::vector<ProjectionReport> project_batch_serial(const std::vector<LabeledSentence>& source,
                                                   const std::vector<Words>& targets,
                                                   const std::vector<AlignmentSet>& alignments) {
  check_batch(source.size(), targets.size(), alignments.size());
  std::vector<ProjectionReport> out(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) out[i] = project_item(source, targets, alignments, i);
  return out;
}

std::vector<ProjectionReport> project_batch_parallel(const std::vector<LabeledSentence>& source,
                                                     const std::vector<Words>& targets,
                                                     const std::vector<AlignmentSet>& alignments) {
  check_batch(source.size(), targets.size(), alignments.size());
  const auto n = static_cast<std::ptrdiff_t>(source.size());
  std::vector<ProjectionReport> out(source.size());
  // Exceptions cannot cross the parallel region; keep the lowest failing index.
  std::ptrdiff_t failed = n;
  std::string failure;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = project_item(source, targets, alignments, static_cast<std::size_t>(i));
    } catch (const InputError& e) {
#pragma omp critical(xlabel_projection_error)
      if (i < failed) {
        failed = i;
        failure = e.what();
      }
    }
  }
  if (failed < n) throw InputError(failure);
  return out;
}

std::vector<LabeledSentence> translate_train_assemble(const std::vector<LabeledSentence>& source,
                                                      const std::vector<Words>& translations,
                                                      const std::vector<AlignmentSet>& alignments) {
  return assemble(translations, project_batch_parallel(source, translations, alignments));
}

std::vector<LabeledSentence> translate_test_backproject(
    const std::vector<LabeledSentence>& predictions, const std::vector<Words>& originals,
    const std::vector<AlignmentSet>& alignments) {
  return assemble(originals, project_batch_parallel(predictions, originals, alignments));
}

}  // namespace xlabel::projection
