#include "xlabel/tprojection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "xlabel/error.hpp"
#include "xlabel/io.hpp"
#include "xlabel/utf8.hpp"

namespace xlabel::tproj {

namespace {

double parse_double(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InputError(where + ": not a number '" + text + "'");
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

double combine(double p_ab, double p_aa, double p_ba, double p_bb) {
  return 0.5 * (p_ab / p_aa) + 0.5 * (p_ba / p_bb);
}

std::vector<char32_t> fold(std::string_view word) {
  auto cps = utf8::decode(word);
  for (auto& c : cps) {
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
  }
  return cps;
}

std::set<std::pair<char32_t, char32_t>> bigrams(const std::vector<char32_t>& cps) {
  std::set<std::pair<char32_t, char32_t>> out;
  if (cps.size() == 1) out.insert({cps[0], 0});
  for (std::size_t i = 0; i + 1 < cps.size(); ++i) out.insert({cps[i], cps[i + 1]});
  return out;
}

double dice(const std::set<std::pair<char32_t, char32_t>>& a,
            const std::set<std::pair<char32_t, char32_t>>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& g : a) common += b.count(g);
  return 2.0 * static_cast<double>(common) / static_cast<double>(a.size() + b.size());
}

}  // namespace

void TableScorer::set(std::string target, std::string source, std::vector<double> probs) {
  table_[{std::move(target), std::move(source)}] = std::move(probs);
}

TableScorer TableScorer::load(const std::filesystem::path& path, std::optional<double> fallback) {
  TableScorer scorer(fallback);
  const auto lines = io::read_lines_file(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].empty() || lines[n][0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    const auto cols = split_tabs(lines[n]);
    if (cols.size() != 3) throw InputError(where + ": expected 'target<TAB>source<TAB>probs'");
    std::vector<double> probs;
    for (const auto& tok : split_words(cols[2])) probs.push_back(parse_double(tok, where));
    scorer.set(join_words(split_words(cols[0])), join_words(split_words(cols[1])), std::move(probs));
  }
  return scorer;
}

std::vector<double> TableScorer::token_conditional_probs(std::string_view target,
                                                         std::string_view source) const {
  const auto it = table_.find(std::pair<std::string, std::string>(target, source));
  if (it != table_.end()) return it->second;
  if (fallback_) return std::vector<double>(split_words(target).size(), *fallback_);
  throw ScorerError("no table entry for '" + std::string(target) + "' given '" + std::string(source) + "'");
}

std::vector<double> CharOverlapScorer::token_conditional_probs(std::string_view target,
                                                               std::string_view source) const {
  std::vector<std::set<std::pair<char32_t, char32_t>>> source_grams;
  for (const auto& w : split_words(source)) source_grams.push_back(bigrams(fold(w)));
  std::vector<double> out;
  for (const auto& w : split_words(target)) {
    const auto grams = bigrams(fold(w));
    double best = 0;
    for (const auto& sg : source_grams) best = std::max(best, dice(grams, sg));
    out.push_back(floor_ + (1.0 - floor_) * best);
  }
  return out;
}

double conditional_probability(std::string_view a, std::string_view b, const Scorer& scorer) {
  const auto probs = scorer.token_conditional_probs(a, b);
  if (probs.empty()) {
    throw ScorerError("scorer returned no tokens for '" + std::string(a) + "'");
  }
  double log_sum = 0;
  for (const double p : probs) {
    if (!(p > 0.0 && p <= 1.0)) {
      throw ScorerError("scorer probability " + std::to_string(p) + " outside (0, 1] for '" +
                        std::string(a) + "' given '" + std::string(b) + "'");
    }
    log_sum += std::log(p);
  }
  return std::exp(log_sum / static_cast<double>(probs.size()));
}

std::optional<double> ScoreCache::find(std::string_view a, std::string_view b) const {
  const auto it = entries_.find(std::pair<std::string, std::string>(a, b));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::insert(std::string a, std::string b, double p) {
  entries_[{std::move(a), std::move(b)}] = p;
}

double ScoreCache::get_or_compute(std::string_view a, std::string_view b, const Scorer& scorer) {
  if (auto hit = find(a, b)) return *hit;
  const double p = conditional_probability(a, b, scorer);
  insert(std::string(a), std::string(b), p);
  return p;
}

ScoreCache ScoreCache::load(const std::filesystem::path& path) {
  ScoreCache cache;
  const auto lines = io::read_lines_file(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    const auto cols = split_tabs(lines[n]);
    if (cols.size() != 3) throw InputError(where + ": expected 'a<TAB>b<TAB>p'");
    const double p = parse_double(cols[2], where);
    if (!(p > 0.0 && p <= 1.0)) throw InputError(where + ": probability outside (0, 1]");
    cache.insert(cols[0], cols[1], p);
  }
  return cache;
}

void ScoreCache::save(std::ostream& out) const {
  const auto old_precision = out.precision(17);
  for (const auto& [key, p] : entries_) out << key.first << '\t' << key.second << '\t' << p << '\n';
  out.precision(old_precision);
}

TranslationScore translation_similarity(std::string_view a, std::string_view b,
                                        const Scorer& scorer, ScoreCache* cache) {
  if (split_words(a).empty() || split_words(b).empty()) {
    throw ContractError("translation_similarity needs non-empty texts");
  }
  auto p = [&](std::string_view x, std::string_view y) {
    return cache ? cache->get_or_compute(x, y, scorer) : conditional_probability(x, y, scorer);
  };
  TranslationScore s;
  s.p_a_given_b = p(a, b);
  s.p_b_given_a = p(b, a);
  s.p_a_given_a = p(a, a);
  s.p_b_given_b = p(b, b);
  s.sim_a_given_b = s.p_a_given_b / s.p_a_given_a;
  s.sim_b_given_a = s.p_b_given_a / s.p_b_given_b;
  s.sim = combine(s.p_a_given_b, s.p_a_given_a, s.p_b_given_a, s.p_b_given_b);
  return s;
}

CandidateSet generate_ngram_candidates(const Words& target_words,
                                       const std::vector<Span>& source_spans) {
  CandidateSet set;
  set.provenance = Provenance::NGram;
  const std::size_t m = target_words.size();
  for (const Span& span : source_spans) {
    SpanCandidates sc{span, {}};
    if (m > 0) sc.candidates.reserve(m * (m + 1) / 2);
    std::size_t rank = 0;
    for (std::size_t start = 0; start < m; ++start) {
      for (std::size_t end = start + 1; end <= m; ++end) {
        sc.candidates.push_back({WordRange{start, end}, join_words(target_words, start, end), rank++});
      }
    }
    set.spans.push_back(std::move(sc));
  }
  return set;
}

CandidateSet filter_candidates(const CandidateSet& candidates, const Words& target_words) {
  CandidateSet out;
  out.provenance = candidates.provenance;
  const std::size_t m = target_words.size();
  for (const auto& sc : candidates.spans) {
    SpanCandidates kept{sc.source, {}};
    for (const auto& c : sc.candidates) {
      if (c.range) {
        if (c.range->start < c.range->end && c.range->end <= m) kept.candidates.push_back(c);
        continue;
      }
      const Words needle = split_words(c.text);
      if (needle.empty() || needle.size() > m) continue;
      for (std::size_t i = 0; i + needle.size() <= m; ++i) {
        if (std::equal(needle.begin(), needle.end(), target_words.begin() + static_cast<std::ptrdiff_t>(i))) {
          kept.candidates.push_back({WordRange{i, i + needle.size()}, join_words(needle), c.rank});
        }
      }
    }
    out.spans.push_back(std::move(kept));
  }
  return out;
}

namespace {

// Distinct (category, range) entries over all span candidate lists, sorted.
void build_pool(const CandidateSet& candidates, ScoredPool& pool) {
  std::set<std::pair<std::string, WordRange>> entries;
  for (const auto& sc : candidates.spans) {
    for (const auto& c : sc.candidates) {
      if (c.range) entries.insert({sc.source.category, *c.range});
    }
  }
  for (const auto& [category, range] : entries) {
    pool.categories.push_back(category);
    pool.ranges.push_back(range);
  }
  pool.score.assign(candidates.spans.size(),
                    std::vector<double>(pool.ranges.size(), std::numeric_limits<double>::quiet_NaN()));
}

struct PairJob {
  std::size_t span;
  std::size_t entry;
};

std::vector<PairJob> pair_jobs(const CandidateSet& candidates, const ScoredPool& pool) {
  std::vector<PairJob> jobs;
  for (std::size_t s = 0; s < candidates.spans.size(); ++s) {
    for (std::size_t e = 0; e < pool.ranges.size(); ++e) {
      if (pool.categories[e] == candidates.spans[s].source.category) jobs.push_back({s, e});
    }
  }
  return jobs;
}

void check_source(const CandidateSet& candidates, const LabeledSentence& source) {
  for (const auto& sc : candidates.spans) {
    if (sc.source.end > source.size()) {
      throw InputError("candidate source span exceeds the source sentence");
    }
  }
}

// Texts whose self-probability p(T|T) is needed, and the directional pairs.
struct ScoringPlan {
  std::vector<std::string> texts;
  std::vector<std::pair<std::size_t, std::size_t>> directions;  // indices into texts
  std::vector<std::size_t> job_a;                               // per job: text index of span
  std::vector<std::size_t> job_b;                               // per job: text index of candidate
};

ScoringPlan plan(const std::vector<PairJob>& jobs, const CandidateSet& candidates,
                 const LabeledSentence& source, const Words& target_words, const ScoredPool& pool) {
  ScoringPlan p;
  std::unordered_map<std::string, std::size_t> index;
  auto intern = [&](std::string text) {
    auto [it, inserted] = index.emplace(text, p.texts.size());
    if (inserted) p.texts.push_back(std::move(text));
    return it->second;
  };
  std::set<std::pair<std::size_t, std::size_t>> dirs;
  for (const auto& job : jobs) {
    const std::size_t a = intern(source.span_text(candidates.spans[job.span].source));
    const auto& r = pool.ranges[job.entry];
    const std::size_t b = intern(join_words(target_words, r.start, r.end));
    p.job_a.push_back(a);
    p.job_b.push_back(b);
    dirs.insert({a, b});
    dirs.insert({b, a});
    dirs.insert({a, a});
    dirs.insert({b, b});
  }
  p.directions.assign(dirs.begin(), dirs.end());
  return p;
}

void fill_scores(ScoredPool& pool, const std::vector<PairJob>& jobs, const ScoringPlan& p,
                 const std::vector<double>& probs) {
  auto prob = [&](std::size_t a, std::size_t b) {
    const auto it = std::lower_bound(p.directions.begin(), p.directions.end(), std::make_pair(a, b));
    return probs[static_cast<std::size_t>(it - p.directions.begin())];
  };
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const std::size_t a = p.job_a[j];
    const std::size_t b = p.job_b[j];
    pool.score[jobs[j].span][jobs[j].entry] = combine(prob(a, b), prob(a, a), prob(b, a), prob(b, b));
  }
}

}  // namespace

ScoredPool score_pool_serial(const CandidateSet& candidates, const LabeledSentence& source,
                             const Words& target_words, const Scorer& scorer) {
  check_source(candidates, source);
  ScoredPool pool;
  build_pool(candidates, pool);
  const auto jobs = pair_jobs(candidates, pool);
  const auto p = plan(jobs, candidates, source, target_words, pool);
  std::vector<double> probs(p.directions.size());
  for (std::size_t i = 0; i < p.directions.size(); ++i) {
    probs[i] = conditional_probability(p.texts[p.directions[i].first], p.texts[p.directions[i].second], scorer);
  }
  fill_scores(pool, jobs, p, probs);
  return pool;
}

ScoredPool score_pool_parallel(const CandidateSet& candidates, const LabeledSentence& source,
                               const Words& target_words, const Scorer& scorer) {
  check_source(candidates, source);
  ScoredPool pool;
  build_pool(candidates, pool);
  const auto jobs = pair_jobs(candidates, pool);
  const auto p = plan(jobs, candidates, source, target_words, pool);
  const auto n = static_cast<std::ptrdiff_t>(p.directions.size());
  std::vector<double> probs(p.directions.size());
  std::ptrdiff_t failed = n;
  std::string failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& [a, b] = p.directions[static_cast<std::size_t>(i)];
    try {
      probs[static_cast<std::size_t>(i)] = conditional_probability(p.texts[a], p.texts[b], scorer);
    } catch (const ScorerError& e) {
#pragma omp critical(xlabel_scoring_error)
      if (i < failed) {
        failed = i;
        failure = e.what();
      }
    }
  }
  if (failed < n) throw ScorerError(failure);
  fill_scores(pool, jobs, p, probs);
  return pool;
}

ScoredPool score_pool_cached(const CandidateSet& candidates, const LabeledSentence& source,
                             const Words& target_words, const Scorer& scorer, ScoreCache& cache) {
  check_source(candidates, source);
  ScoredPool pool;
  build_pool(candidates, pool);
  const auto jobs = pair_jobs(candidates, pool);
  const auto p = plan(jobs, candidates, source, target_words, pool);
  std::vector<double> probs(p.directions.size());
  for (std::size_t i = 0; i < p.directions.size(); ++i) {
    probs[i] = cache.get_or_compute(p.texts[p.directions[i].first], p.texts[p.directions[i].second], scorer);
  }
  fill_scores(pool, jobs, p, probs);
  return pool;
}

namespace {

std::vector<std::size_t> source_order(const CandidateSet& candidates) {
  std::vector<std::size_t> order(candidates.spans.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates.spans[a].source.start < candidates.spans[b].source.start;
  });
  return order;
}

SelectionResult finish(const Words& target_words, const CandidateSet& candidates,
                       std::vector<std::optional<WordRange>> chosen) {
  std::vector<Span> spans;
  for (std::size_t s = 0; s < chosen.size(); ++s) {
    if (chosen[s]) spans.push_back({chosen[s]->start, chosen[s]->end, candidates.spans[s].source.category});
  }
  return {LabeledSentence(target_words, std::move(spans)), std::move(chosen)};
}

bool rank_before(const Candidate& a, const Candidate& b) {
  return std::tuple(a.rank, a.range->start, a.range->length()) <
         std::tuple(b.rank, b.range->start, b.range->length());
}

bool blocked(const WordRange& r, const std::vector<WordRange>& taken) {
  return std::any_of(taken.begin(), taken.end(), [&](const WordRange& t) { return t.overlaps(r); });
}

// Per span (left to right) the first surviving candidate under `better`.
template <typename Better>
SelectionResult greedy_by_rank(const CandidateSet& candidates, const Words& target_words,
                               Better better) {
  std::vector<std::optional<WordRange>> chosen(candidates.spans.size());
  std::vector<WordRange> taken;
  for (const std::size_t s : source_order(candidates)) {
    const Candidate* best = nullptr;
    for (const auto& c : candidates.spans[s].candidates) {
      if (!c.range || blocked(*c.range, taken)) continue;
      if (!best || better(s, c, *best)) best = &c;
    }
    if (best) {
      chosen[s] = *best->range;
      taken.push_back(*best->range);
    }
  }
  return finish(target_words, candidates, std::move(chosen));
}

}  // namespace

SelectionResult select_from_scores(const ScoredPool& pool, const CandidateSet& candidates,
                                   const Words& target_words) {
  std::vector<bool> alive(pool.ranges.size(), true);
  std::vector<std::optional<WordRange>> chosen(candidates.spans.size());
  for (const std::size_t s : source_order(candidates)) {
    std::optional<std::size_t> best;
    for (std::size_t e = 0; e < pool.ranges.size(); ++e) {
      const double v = pool.score[s][e];
      if (!alive[e] || std::isnan(v)) continue;
      if (!best) {
        best = e;
        continue;
      }
      const double bv = pool.score[s][*best];
      const auto& r = pool.ranges[e];
      const auto& br = pool.ranges[*best];
      if (v > bv || (v == bv && std::pair(r.start, r.length()) < std::pair(br.start, br.length()))) {
        best = e;
      }
    }
    if (!best) continue;
    const WordRange winner = pool.ranges[*best];
    chosen[s] = winner;
    for (std::size_t e = 0; e < pool.ranges.size(); ++e) {
      if (pool.ranges[e].overlaps(winner)) alive[e] = false;
    }
  }
  return finish(target_words, candidates, std::move(chosen));
}

SelectionResult select_candidates(const CandidateSet& candidates, const LabeledSentence& source,
                                  const Words& target_words, const Scorer& scorer,
                                  ScoreCache* cache) {
  const ScoredPool pool = cache ? score_pool_cached(candidates, source, target_words, scorer, *cache)
                                : score_pool_parallel(candidates, source, target_words, scorer);
  return select_from_scores(pool, candidates, target_words);
}

SelectionResult select_most_probable(const CandidateSet& candidates, const Words& target_words) {
  return greedy_by_rank(candidates, target_words,
                        [](std::size_t, const Candidate& a, const Candidate& b) { return rank_before(a, b); });
}

SelectionResult oracle_upper_bound(const CandidateSet& candidates, const LabeledSentence& gold) {
  auto is_gold = [&](std::size_t s, const Candidate& c) {
    const Span probe{c.range->start, c.range->end, candidates.spans[s].source.category};
    return std::binary_search(gold.spans().begin(), gold.spans().end(), probe);
  };
  return greedy_by_rank(candidates, gold.words(), [&](std::size_t s, const Candidate& a, const Candidate& b) {
    const bool ga = is_gold(s, a);
    const bool gb = is_gold(s, b);
    if (ga != gb) return ga;
    return rank_before(a, b);
  });
}

std::vector<SweepRow> candidate_sweep(const CandidateSet& candidates, const std::vector<std::size_t>& ks,
                                      const LabeledSentence& gold) {
  return candidate_sweep(std::vector<CandidateSet>{candidates}, ks, std::vector<LabeledSentence>{gold});
}

std::vector<SweepRow> candidate_sweep(const std::vector<CandidateSet>& candidates,
                                      const std::vector<std::size_t>& ks,
                                      const std::vector<LabeledSentence>& gold) {
  if (candidates.size() != gold.size()) {
    throw InputError("candidate sweep: " + std::to_string(candidates.size()) + " candidate sets for " +
                     std::to_string(gold.size()) + " gold sentences");
  }
  // Best (lowest) rank of a gold-matching candidate per source span.
  std::vector<std::optional<std::size_t>> best_rank;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (const auto& sc : candidates[i].spans) {
      std::optional<std::size_t> best;
      for (const auto& c : sc.candidates) {
        if (!c.range) continue;
        const Span probe{c.range->start, c.range->end, sc.source.category};
        if (std::binary_search(gold[i].spans().begin(), gold[i].spans().end(), probe)) {
          best = best ? std::min(*best, c.rank) : c.rank;
        }
      }
      best_rank.push_back(best);
    }
  }
  std::vector<SweepRow> rows;
  for (const std::size_t k : ks) {
    SweepRow row{k, 0.0, 0, best_rank.size()};
    for (const auto& r : best_rank) {
      if (r && *r < k) ++row.hits;
    }
    row.hit_rate = row.total == 0 ? 0.0 : static_cast<double>(row.hits) / static_cast<double>(row.total);
    rows.push_back(row);
  }
  return rows;
}

std::string candidate_prompt(const Words& target_words, const std::vector<Span>& source_spans) {
  std::string out = join_words(target_words);
  for (const Span& s : source_spans) {
    out += " <" + s.category + "> None </" + s.category + ">";
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_candidate_answer(std::string_view answer) {
  std::vector<std::pair<std::string, std::string>> out;
  std::optional<std::string> open;
  Words words;
  for (const auto& tok : tokenize_markup(answer)) {
    switch (tok.kind) {
      case MarkupToken::Kind::Open:
        open = tok.text;
        words.clear();
        break;
      case MarkupToken::Kind::Close:
        if (open && *open == tok.text && !words.empty() && !(words.size() == 1 && words[0] == "None")) {
          out.emplace_back(*open, join_words(words));
        }
        open.reset();
        words.clear();
        break;
      case MarkupToken::Kind::Word:
        if (open) words.push_back(tok.text);
        break;
    }
  }
  return out;
}

CandidateTable read_candidate_file(const std::filesystem::path& path) {
  CandidateTable table;
  const auto lines = io::read_lines_file(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    const auto cols = split_tabs(lines[n]);
    if (cols.size() != 3) throw InputError(where + ": expected 'sentence.span<TAB>rank<TAB>text'");
    const auto dot = cols[0].find('.');
    std::size_t sentence = 0;
    std::size_t span = 0;
    std::size_t rank = 0;
    auto parse_index = [&](std::string_view text, std::size_t& value) {
      const auto r = std::from_chars(text.data(), text.data() + text.size(), value);
      return !text.empty() && r.ec == std::errc() && r.ptr == text.data() + text.size();
    };
    const std::string_view id = cols[0];
    if (dot == std::string::npos || !parse_index(id.substr(0, dot), sentence) ||
        !parse_index(id.substr(dot + 1), span)) {
      throw InputError(where + ": malformed span id '" + cols[0] + "'");
    }
    if (!parse_index(cols[1], rank)) throw InputError(where + ": malformed rank '" + cols[1] + "'");
    const std::string text = join_words(split_words(cols[2]));
    if (text.empty()) throw InputError(where + ": empty candidate text");
    table[sentence][span].push_back({std::nullopt, text, rank});
  }
  for (auto& [s, spans] : table) {
    for (auto& [k, list] : spans) {
      std::stable_sort(list.begin(), list.end(), [](const Candidate& a, const Candidate& b) { return a.rank < b.rank; });
    }
  }
  return table;
}

void write_candidate_file(std::ostream& out, const std::vector<CandidateSet>& sets) {
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t k = 0; k < sets[i].spans.size(); ++k) {
      for (const auto& c : sets[i].spans[k].candidates) {
        out << i << '.' << k << '\t' << c.rank << '\t' << c.text << '\n';
      }
    }
  }
}

CandidateSet external_candidates(const CandidateTable& table, std::size_t sentence,
                                 const std::vector<Span>& source_spans) {
  CandidateSet set;
  set.provenance = Provenance::External;
  const auto it = table.find(sentence);
  if (it != table.end() && !it->second.empty() && it->second.rbegin()->first >= source_spans.size()) {
    throw InputError("candidate file names span " + std::to_string(sentence) + "." +
                     std::to_string(it->second.rbegin()->first) + " but sentence " +
                     std::to_string(sentence) + " has " + std::to_string(source_spans.size()) + " spans");
  }
  for (std::size_t k = 0; k < source_spans.size(); ++k) {
    SpanCandidates sc{source_spans[k], {}};
    if (it != table.end()) {
      if (const auto jt = it->second.find(k); jt != it->second.end()) sc.candidates = jt->second;
    }
    set.spans.push_back(std::move(sc));
  }
  return set;
}

}  // namespace xlabel::tproj
