#include "xlabel/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "xlabel/error.hpp"
#include "xlabel/io.hpp"

namespace xlabel::eval {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_pair(const LabeledSentence& gold, const LabeledSentence& pred, std::size_t index) {
  if (gold.size() != pred.size()) {
    throw InputError("sentence " + std::to_string(index) + ": gold has " + std::to_string(gold.size()) +
                     " words, prediction has " + std::to_string(pred.size()));
  }
}

void check_corpus(const std::vector<LabeledSentence>& gold, const std::vector<LabeledSentence>& pred) {
  if (gold.size() != pred.size()) {
    throw InputError("gold has " + std::to_string(gold.size()) + " sentences, prediction has " +
                     std::to_string(pred.size()));
  }
  for (std::size_t i = 0; i < gold.size(); ++i) check_pair(gold[i], pred[i], i);
}

}  // namespace

double Counts::precision() const { return ratio(tp, tp + fp); }
double Counts::recall() const { return ratio(tp, tp + fn); }
// Harmonic mean of precision and recall, as one division of counts.
double Counts::f1() const {
  return ratio(2 * tp, 2 * tp + fp + fn);
}

EntityF1Report& EntityF1Report::operator+=(const EntityF1Report& o) {
  for (const auto& [cat, c] : o.per_category) per_category[cat] += c;
  micro += o.micro;
  return *this;
}

EntityF1Report sentence_counts(const LabeledSentence& gold, const LabeledSentence& pred) {
  EntityF1Report r;
  // Both span lists are sorted, so a merge walk finds the exact matches.
  const auto& g = gold.spans();
  const auto& p = pred.spans();
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < g.size() || j < p.size()) {
    if (j == p.size() || (i < g.size() && g[i] < p[j])) {
      ++r.per_category[g[i++].category].fn;
    } else if (i == g.size() || p[j] < g[i]) {
      ++r.per_category[p[j++].category].fp;
    } else {
      ++r.per_category[g[i].category].tp;
      ++i;
      ++j;
    }
  }
  for (const auto& [cat, c] : r.per_category) r.micro += c;
  return r;
}

EntityF1Report entity_f1(const std::vector<LabeledSentence>& gold,
                         const std::vector<LabeledSentence>& pred) {
  check_corpus(gold, pred);
  EntityF1Report total;
  for (std::size_t i = 0; i < gold.size(); ++i) total += sentence_counts(gold[i], pred[i]);
  return total;
}

EntityF1Report entity_f1_parallel(const std::vector<LabeledSentence>& gold,
                                  const std::vector<LabeledSentence>& pred) {
  check_corpus(gold, pred);
  const auto n = static_cast<std::ptrdiff_t>(gold.size());
  EntityF1Report total;
#pragma omp parallel
  {
    EntityF1Report local;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      local += sentence_counts(gold[static_cast<std::size_t>(i)], pred[static_cast<std::size_t>(i)]);
    }
#pragma omp critical(xlabel_eval_merge)
    total += local;
  }
  return total;
}

EntityF1Report f1_from_tag_files(const std::filesystem::path& gold_path,
                                 const std::filesystem::path& pred_path, TagScheme scheme,
                                 const std::map<std::string, std::string>& rename) {
  const auto gold_conll = io::read_conll_file(gold_path);
  const auto pred_conll = io::read_conll_file(pred_path);
  if (gold_conll.size() != pred_conll.size()) {
    throw InputError(gold_path.string() + " has " + std::to_string(gold_conll.size()) + " sentences, " +
                     pred_path.string() + " has " + std::to_string(pred_conll.size()));
  }
  for (std::size_t s = 0; s < gold_conll.size(); ++s) {
    const auto& g = gold_conll[s];
    const auto& p = pred_conll[s];
    const std::size_t common = std::min(g.words.size(), p.words.size());
    for (std::size_t i = 0; i < common; ++i) {
      if (g.words[i] != p.words[i]) {
        throw InputError(pred_path.string() + ":" + std::to_string(p.first_line + i) + ": token '" + p.words[i] +
                         "' does not match gold '" + g.words[i] + "' at " + gold_path.string() + ":" +
                         std::to_string(g.first_line + i));
      }
    }
    if (g.words.size() != p.words.size()) {
      throw InputError(pred_path.string() + ":" + std::to_string(p.first_line) + ": sentence has " +
                       std::to_string(p.words.size()) + " tokens, gold has " + std::to_string(g.words.size()));
    }
  }
  auto gold = io::to_labeled(gold_conll, scheme, gold_path.string());
  auto pred = io::to_labeled(pred_conll, scheme, pred_path.string());
  if (!rename.empty()) {
    for (auto& s : gold) s = rename_categories(s, rename);
    for (auto& s : pred) s = rename_categories(s, rename);
  }
  return entity_f1(gold, pred);
}

namespace {

void row(std::ostream& out, const std::string& name, const Counts& c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %6zu %6zu %6zu %9.4f %9.4f %9.4f\n", name.c_str(), c.tp, c.fp, c.fn,
                c.precision(), c.recall(), c.f1());
  out << buf;
}

void csv_row(std::ostream& out, const std::string& name, const Counts& c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%.6f,%.6f,%.6f\n", name.c_str(), c.tp, c.fp, c.fn, c.precision(),
                c.recall(), c.f1());
  out << buf;
}

}  // namespace

void print_table(std::ostream& out, const EntityF1Report& report) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %6s %6s %6s %9s %9s %9s\n", "category", "tp", "fp", "fn", "precision",
                "recall", "f1");
  out << buf;
  for (const auto& [cat, c] : report.per_category) row(out, cat, c);
  row(out, "micro", report.micro);
}

void write_csv(std::ostream& out, const EntityF1Report& report) {
  out << "category,tp,fp,fn,precision,recall,f1\n";
  for (const auto& [cat, c] : report.per_category) csv_row(out, cat, c);
  csv_row(out, "micro", report.micro);
}

}  // namespace xlabel::eval
