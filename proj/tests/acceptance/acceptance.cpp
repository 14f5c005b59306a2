// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "support/decode_oracle.hpp"
#include "support/generators.hpp"
#include "support/selection_oracle.hpp"
#include "xlabel/decoding.hpp"
#include "xlabel/diagnostics.hpp"
#include "xlabel/evaluation.hpp"
#include "xlabel/io.hpp"
#include "xlabel/projection.hpp"
#include "xlabel/tprojection.hpp"

namespace fs = std::filesystem;
using namespace xlabel;

namespace {

const fs::path kBin = XLABEL_BIN;
const fs::path kFixtures = XLABEL_FIXTURES;

class Criterion {
 public:
  explicit Criterion(std::string name) : name_(std::move(name)) {}
  void check(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  std::size_t failed() const { return failed_; }
  const std::string& name() const { return name_; }
  std::string summary() const {
    std::string out = notes_;
    for (const auto& f : failures_) out += (out.empty() ? "" : "; ") + f;
    if (failed_ > failures_.size()) out += "; ... " + std::to_string(failed_ - failures_.size()) + " more";
    return out;
  }

 private:
  std::string name_;
  std::string notes_;
  std::vector<std::string> failures_;
  std::size_t failed_ = 0;
};

int g_failures = 0;

void report(Criterion& c, double seconds, double limit) {
  if (limit > 0) c.check(seconds < limit, "runtime " + std::to_string(seconds) + " s over " + std::to_string(limit) + " s");
  const bool ok = c.failed() == 0;
  if (!ok) ++g_failures;
  std::printf("[%s] %-28s %7.2fs  %s\n", ok ? "PASS" : "FAIL", c.name().c_str(), seconds, c.summary().c_str());
  std::fflush(stdout);
}

template <typename Body>
void run_criterion(const std::string& name, double limit_seconds, Body body) {
  Criterion c(name);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.check(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(c, secs, limit_seconds);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

const std::vector<std::string> kCategories{"PER", "LOC", "ORG", "MISC"};
const std::vector<std::string> kDistractors{"\xE2\x96\x81the", "\xE2\x96\x81of", "s", "an"};

// ---------------------------------------------------------------- decoding

void fsa_validity(Criterion& c) {
  std::mt19937_64 rng(20240601);
  const decoding::ChunkTokenizer chunks(3);
  const decoding::WholeWordTokenizer whole;
  std::size_t decodes = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const decoding::RandomModel model(seed, 4.0, 3, kDistractors);
    const Words input = testing::random_words(rng, testing::uniform(rng, 1, 30), 16);
    const std::vector<std::string> cats(kCategories.begin(),
                                        kCategories.begin() + static_cast<std::ptrdiff_t>(testing::uniform(rng, 1, 4)));
    const decoding::Tokenizer& tok = seed % 2 ? static_cast<const decoding::Tokenizer&>(chunks) : whole;
    const decoding::Session session(input, cats, model, tok);
    const std::size_t k = 1 + seed % 3;
    const auto r = k == 1 ? decoding::constrained_greedy(session) : decoding::constrained_beam(session, k);
    ++decodes;
    const auto parsed = parse_tagged_text(r.text);
    const bool parses = std::holds_alternative<LabeledSentence>(parsed);
    c.check(parses, "seed " + std::to_string(seed) + ": output does not parse");
    if (parses) c.check(std::get<LabeledSentence>(parsed).words() == input, "seed " + std::to_string(seed) + ": words changed");
    c.check(diagnostics::diagnose(input, r.text).clean, "seed " + std::to_string(seed) + ": diagnosis not clean");
  }
  c.note(std::to_string(decodes) + " constrained decodes");

  // Unmasked generation with the same models on inputs the model has no
  // preference for copying.
  const std::vector<Words> adversarial{split_words("Kaliforni sullã sẽn togse"), split_words("Realean irabazi du"),
                                       split_words("waseThekwini uShauwn Mkhize")};
  std::vector<diagnostics::OutputPair> pairs;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const decoding::RandomModel model(seed, 4.0, 3, kDistractors);
    const auto& input = adversarial[seed % adversarial.size()];
    const decoding::Session session(input, {"PER", "LOC"}, model, chunks);
    pairs.emplace_back(input, decoding::unconstrained_beam(session, 1 + seed % 2, 4 * input.size() + 8).text);
  }
  const auto rates = diagnostics::corpus_rates(pairs);
  c.check(rates.any > 0, "unconstrained error rate is 0");
  c.note("unconstrained error rate " + fmt(rates.any) + "% (markup " + fmt(rates.markup) + "%, hallucination " +
         fmt(rates.hallucination) + "%)");
}

void beam_properties(Criterion& c) {
  std::mt19937_64 rng(777);
  const decoding::ChunkTokenizer tok(4);
  std::size_t dominance_violations = 0;
  std::size_t greedy_matches = 0;
  std::string first_violation;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const decoding::RandomModel model(seed, 4.0, 3, kDistractors);
    const Words input = testing::random_words(rng, testing::uniform(rng, 1, 12), 16);
    const std::vector<std::string> cats(kCategories.begin(),
                                        kCategories.begin() + static_cast<std::ptrdiff_t>(testing::uniform(rng, 1, 4)));
    const decoding::Session session(input, cats, model, tok);
    const auto greedy = decoding::constrained_greedy(session);
    const auto k1 = decoding::constrained_beam(session, 1);
    c.check(greedy.tokens == k1.tokens, "seed " + std::to_string(seed) + ": k=1 differs from greedy");
    greedy_matches += greedy.tokens == k1.tokens;
    double previous = k1.logprob;
    bool violated = false;
    for (std::size_t k = 2; k <= 4; ++k) {
      const double lp = decoding::constrained_beam(session, k).logprob;
      if (lp < previous - 1e-9) {
        violated = true;
        if (first_violation.empty()) {
          first_violation = "seed " + std::to_string(seed) + " k=" + std::to_string(k - 1) + "->" + std::to_string(k) +
                            ": " + fmt(previous) + " -> " + fmt(lp);
        }
      }
      previous = lp;
    }
    dominance_violations += violated;
  }
  c.check(dominance_violations == 0, "log-probability decreased with k on " + std::to_string(dominance_violations) +
                                         "/200 models (first: " + first_violation + ")");

  // Enumerable toys: at most 2 words and 2 categories, vocabulary at most 8.
  const decoding::WholeWordTokenizer whole;
  std::size_t toys = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const decoding::RandomModel model(seed, 4.0, 3, seed % 2 ? std::vector<std::string>{"s"} : std::vector<std::string>{});
    for (const auto& input : {Words{"a"}, Words{"a", "b"}, Words{"b", "b"}}) {
      for (const auto& cats : {std::vector<std::string>{"X"}, std::vector<std::string>{"X", "Y"}}) {
        const decoding::Session session(input, cats, model, whole);
        if (session.vocab().size() > 8) continue;
        const auto best = testing::brute_force_best(session);
        const auto r = decoding::constrained_beam(session, testing::all_labelings(session).size());
        c.check(r.tokens == best.tokens && r.logprob == best.logprob,
                "toy seed " + std::to_string(seed) + ": beam " + fmt(r.logprob) + " vs brute force " + fmt(best.logprob));
        ++toys;
      }
    }
  }
  c.note("k=1 matches greedy on " + std::to_string(greedy_matches) + "/200 models");
  c.note(std::to_string(toys) + " enumerable toys checked");
}

// -------------------------------------------------------------- projection

void projection_fixtures(Criterion& c) {
  using projection::parse_pharaoh;
  using projection::project;
  {
    const LabeledSentence source({"Royal", "Swedish", "Academy", "of", "Science"}, {{0, 5, "ORG"}});
    const auto r = project(source, split_words("Real Academia Sueca de Ciencias"), parse_pharaoh("0-0 1-2 2-1 4-4"));
    c.check(r.projected == std::vector<Span>{{0, 5, "ORG"}} && r.merged_gaps == 1, "one-word gap not merged");
  }
  {
    const LabeledSentence source({"Marie", "and", "Pierre", "Curie"}, {{0, 1, "PER"}, {2, 4, "PER"}});
    const auto r = project(source, split_words("Marie y Pierre Curie"), parse_pharaoh("0-0 1-1 2-2 3-3 3-0"));
    c.check(r.projected == std::vector<Span>{{0, 4, "PER"}} && r.collisions_merged == 1,
            "same-category collision not merged");
  }

  std::mt19937_64 rng(99);
  const std::vector<std::string> cats{"PER", "LOC", "ORG"};
  for (int iter = 0; iter < 10000; ++iter) {
    const std::size_t n = testing::uniform(rng, 1, 20);
    const std::size_t m = testing::uniform(rng, 1, 20);
    const auto source = testing::random_sentence(rng, n, cats);
    Words target = testing::random_words(rng, m);
    if (iter % 4 == 0) target[testing::uniform(rng, 0, m - 1)] = ".";
    const auto alignment = testing::random_alignment(rng, n, m, iter % 2 ? 0.1 : 0.3);
    const auto r = project(source, target, alignment);
    bool ok = true;
    for (std::size_t i = 0; i < r.projected.size(); ++i) {
      const Span& s = r.projected[i];
      ok = ok && s.start < s.end && s.end <= m;
      if (i > 0) ok = ok && r.projected[i - 1].end <= s.start;
    }
    ok = ok && source.spans().size() == r.projected.size() + r.unaligned_spans + r.collisions_merged +
                                            r.collisions_resolved;
    c.check(ok, "case " + std::to_string(iter) + ": overlapping or out-of-bounds output");
  }
  c.note("2 fixtures, 10000 random cases");
}

// ------------------------------------------------------------ t-projection

void tprojection_math(Criterion& c) {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> prob(1e-4, 1.0);
  for (int iter = 0; iter < 2000; ++iter) {
    const std::size_t la = testing::uniform(rng, 1, 6);
    const std::size_t lb = testing::uniform(rng, 1, 6);
    Words wa, wb;
    for (std::size_t i = 0; i < la; ++i) wa.push_back("a" + std::to_string(i));
    for (std::size_t i = 0; i < lb; ++i) wb.push_back("b" + std::to_string(i));
    const std::string a = join_words(wa), b = join_words(wb);
    auto draw = [&](std::size_t len) {
      std::vector<double> v(len);
      for (auto& x : v) x = prob(rng);
      return v;
    };
    const auto ab = draw(la), aa = draw(la), ba = draw(lb), bb = draw(lb);
    tproj::TableScorer scorer;
    scorer.set(a, b, ab);
    scorer.set(a, a, aa);
    scorer.set(b, a, ba);
    scorer.set(b, b, bb);
    const auto s = tproj::translation_similarity(a, b, scorer);
    const auto t = tproj::translation_similarity(b, a, scorer);
    c.check(std::fabs(tproj::translation_similarity(a, a, scorer).sim - 1.0) <= 1e-12, "sim(A|A) != 1");
    c.check(std::fabs(s.sim - t.sim) <= 1e-12, "sim not symmetric");
    auto geo = [](const std::vector<double>& v) {
      double prod = 1;
      for (double x : v) prod *= x;
      return std::pow(prod, 1.0 / static_cast<double>(v.size()));
    };
    c.check(std::fabs(s.p_a_given_b - geo(ab)) <= 1e-12, "geometric mean mismatch");
    c.check(std::fabs(s.sim - (0.5 * geo(ab) / geo(aa) + 0.5 * geo(ba) / geo(bb))) <= 1e-12, "sim formula mismatch");
  }

  std::size_t instances = 0;
  auto compare = [&](const testing::SelectionInstance& inst) {
    c.check(testing::run_select(inst) == testing::oracle_select(inst), "selection differs from enumeration");
  };
  // Three-word targets with both categories, four-word targets (ten ranges)
  // with one.
  instances += testing::for_each_selection_instance(3, 3, 10, true, compare);
  instances += testing::for_each_selection_instance(4, 3, 10, false, compare);

  for (std::size_t m = 0; m <= 40; ++m) {
    const auto set = tproj::generate_ngram_candidates(Words(m, "w"), {{0, 1, "X"}});
    c.check(set.spans[0].candidates.size() == m * (m + 1) / 2, "n-gram count wrong for m=" + std::to_string(m));
  }

  std::vector<tproj::CandidateSet> sets;
  std::vector<LabeledSentence> gold;
  for (int i = 0; i < 300; ++i) {
    const std::size_t m = testing::uniform(rng, 1, 8);
    const Words target = testing::random_words(rng, m);
    const LabeledSentence g(target, testing::random_spans(rng, m, {"X", "Y"}, 0.5));
    auto set = tproj::generate_ngram_candidates(target, g.spans());
    for (auto& sc : set.spans) {
      std::shuffle(sc.candidates.begin(), sc.candidates.end(), rng);
      for (std::size_t r = 0; r < sc.candidates.size(); ++r) sc.candidates[r].rank = r;
    }
    sets.push_back(std::move(set));
    gold.push_back(g);
  }
  std::vector<std::size_t> ks;
  for (std::size_t k = 0; k <= 40; ++k) ks.push_back(k);
  const auto rows = tproj::candidate_sweep(sets, ks, gold);
  for (std::size_t i = 1; i < rows.size(); ++i) c.check(rows[i].hit_rate >= rows[i - 1].hit_rate, "sweep not monotone");
  c.check(rows.front().hit_rate == 0.0 && rows.back().hit_rate == 1.0, "sweep end points wrong");
  c.note(std::to_string(instances) + " exhaustive selection instances");
}

// -------------------------------------------------------------- evaluation

void evaluation(Criterion& c) {
  const auto r = eval::f1_from_tag_files(kFixtures / "eval/gold.conll", kFixtures / "eval/pred.conll", TagScheme::IOB2);
  // Hand count over the ten sentences.
  const eval::Counts per{2, 1, 3}, loc{2, 2, 2}, org{3, 1, 0}, micro{7, 4, 5};
  c.check(r.per_category.size() == 3, "unexpected categories");
  c.check(r.per_category.count("PER") && r.per_category.at("PER") == per, "PER counts");
  c.check(r.per_category.count("LOC") && r.per_category.at("LOC") == loc, "LOC counts");
  c.check(r.per_category.count("ORG") && r.per_category.at("ORG") == org, "ORG counts");
  c.check(r.micro == micro, "micro counts");
  const auto& l = r.per_category.at("LOC");
  c.check(l.precision() == 0.5 && l.recall() == 0.5 && l.f1() == 0.5, "LOC P=R=F1=0.5");
  c.check(r.per_category.at("PER").precision() == 2.0 / 3.0 && r.per_category.at("PER").recall() == 2.0 / 5.0 &&
              r.per_category.at("PER").f1() == 0.5,
          "PER ratios");
  c.check(r.per_category.at("ORG").f1() == 6.0 / 7.0, "ORG f1");
  c.check(r.micro.precision() == 7.0 / 11.0 && r.micro.recall() == 7.0 / 12.0 && r.micro.f1() == 14.0 / 23.0,
          "micro ratios");

  std::mt19937_64 rng(31337);
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<LabeledSentence> g, p;
    const std::size_t n = testing::uniform(rng, 1, 30);
    for (std::size_t i = 0; i < n; ++i) {
      const Words w = testing::random_words(rng, testing::uniform(rng, 1, 15));
      g.emplace_back(w, testing::random_spans(rng, w.size(), {"PER", "LOC", "ORG"}));
      p.emplace_back(w, testing::random_spans(rng, w.size(), {"PER", "LOC", "ORG"}));
    }
    const auto a = eval::entity_f1(g, p);
    const auto b = eval::entity_f1(p, g);
    c.check(a.micro.precision() == b.micro.recall() && a.micro.recall() == b.micro.precision() &&
                a.micro.f1() == b.micro.f1(),
            "swap symmetry broken");
  }
  c.note("10-sentence fixture, 500 random corpora");
}

// --------------------------------------------------------------------- cli

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void cli_determinism(Criterion& c) {
  const std::string f = kFixtures.string() + "/";
  // {name, arguments with @ standing for the output directory}
  const std::vector<std::pair<std::string, std::string>> commands{
      {"project", "project --source " + f + "project/source.conll --target " + f + "project/target.txt --alignments " +
                      f + "project/align.txt --output @/p.conll --report @/p.csv"},
      {"tproject", "tproject --ngram --source " + f + "tproject/source.conll --target " + f +
                       "tproject/target.txt --scorer table:" + f +
                       "tproject/scores.tsv --table-fallback 0.01 --gold " + f +
                       "tproject/gold.conll --sweep 1,5,10 --sweep-csv @/sweep.csv --score-cache @/cache.tsv "
                       "--output @/t.conll"},
      {"tproject-candidates", "tproject --candidates " + f + "tproject/candidates.tsv --scorer overlap --source " + f +
                                  "tproject/source.conll --target " + f + "tproject/target.txt --output @/tc.conll"},
      {"decode", "decode --input " + f + "decode/input.txt --categories PER,LOC --model mock-table:" + f +
                     "decode/model.tsv --beam 2 --output @/d.txt"},
      {"decode-random", "decode --input " + f + "diagnose/input.txt --categories PER,LOC --model random --seed 5 "
                            "--piece-chars 3 --beam 3 --output @/r.txt"},
      {"decode-unconstrained", "decode --input " + f + "diagnose/input.txt --categories PER,LOC --model random:5 "
                                   "--unconstrained --beam 2 --output @/u.txt"},
      {"diagnose", "diagnose --input " + f + "diagnose/input.txt --outputs " + f + "diagnose/outputs.txt --csv @/g.csv"},
      {"eval", "eval --gold " + f + "eval/gold.conll --pred " + f + "eval/pred.conll --csv @/e.csv"},
      {"convert", "convert --input " + f + "convert/iob2.conll --output @/c.txt --rename LOC=Location"},
  };
  const fs::path root = fs::temp_directory_path() / "xlabel_acceptance_cli";
  fs::remove_all(root);
  for (const auto& [name, args] : commands) {
    std::vector<std::map<std::string, std::string>> runs;
    for (int attempt = 0; attempt < 2; ++attempt) {
      const fs::path dir = root / (name + "_" + std::to_string(attempt));
      fs::create_directories(dir);
      std::string line = args;
      for (std::size_t pos; (pos = line.find('@')) != std::string::npos;) line.replace(pos, 1, dir.string());
      const std::string cmd = kBin.string() + " " + line + " >" + (dir / "stdout").string() + " 2>" +
                              (dir / "stderr").string();
      const int status = std::system(cmd.c_str());
      c.check(WIFEXITED(status) && WEXITSTATUS(status) == 0, name + " exited with failure");
      std::map<std::string, std::string> files;
      for (const auto& entry : fs::directory_iterator(dir)) files[entry.path().filename().string()] = slurp(entry.path());
      runs.push_back(std::move(files));
    }
    c.check(runs[0] == runs[1], name + " output differs between runs");
  }
  fs::remove_all(root);
  c.note(std::to_string(commands.size()) + " invocations run twice");
}

}  // namespace

int main() {
  std::printf("xlabel acceptance suite\n");
  run_criterion("fsa-validity", 10, fsa_validity);
  run_criterion("beam-properties", 30, beam_properties);
  run_criterion("projection-fixtures", 10, projection_fixtures);
  run_criterion("tprojection-math", 60, tprojection_math);
  run_criterion("evaluation", 0, evaluation);
  run_criterion("cli-determinism", 0, cli_determinism);
  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
