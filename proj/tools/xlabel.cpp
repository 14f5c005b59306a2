// xlabel: batch front-end for projection, candidate selection, constrained
// decoding, output diagnostics, evaluation and format conversion.
//
// Exit status: 0 on success, 1 on input or usage errors, 2 when an internal
// invariant breaks.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "xlabel/core.hpp"
#include "xlabel/decoding.hpp"
#include "xlabel/diagnostics.hpp"
#include "xlabel/error.hpp"
#include "xlabel/evaluation.hpp"
#include "xlabel/io.hpp"
#include "xlabel/projection.hpp"
#include "xlabel/tprojection.hpp"

namespace fs = std::filesystem;
using namespace xlabel;

namespace {

std::map<std::string, std::string> parse_rename(const std::vector<std::string>& items) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw InputError("--rename expects FROM=TO, got '" + item + "'");
    }
    const std::string to = item.substr(eq + 1);
    if (!is_valid_category(to)) throw InputError("invalid category '" + to + "' in --rename");
    out[item.substr(0, eq)] = to;
  }
  return out;
}

std::vector<LabeledSentence> renamed(std::vector<LabeledSentence> sentences,
                                     const std::map<std::string, std::string>& mapping) {
  if (mapping.empty()) return sentences;
  for (auto& s : sentences) s = rename_categories(s, mapping);
  return sentences;
}

std::vector<projection::AlignmentSet> read_alignments(const fs::path& path) {
  std::vector<projection::AlignmentSet> out;
  const auto lines = io::read_lines_file(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    try {
      out.push_back(projection::parse_pharaoh(lines[n]));
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(n + 1) + ": " + e.what());
    }
  }
  return out;
}

void require_same_count(std::size_t a, const fs::path& pa, std::size_t b, const fs::path& pb) {
  if (a != b) {
    throw InputError(pa.string() + " has " + std::to_string(a) + " sentences but " + pb.string() + " has " +
                     std::to_string(b) + "; first divergent index " + std::to_string(std::min(a, b)));
  }
}

void write_conll_file(const fs::path& path, const std::vector<LabeledSentence>& sentences, TagScheme scheme) {
  auto out = io::open_output(path);
  io::write_conll(out, sentences, scheme);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Writes to `path`, or stdout when it is empty.
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    std::cout.flush();
  } else {
    auto out = io::open_output(path);
    fn(out);
  }
}

// ---- project

struct ProjectArgs {
  std::string source, target, alignments, output, report;
  std::string direction = "train";
  std::string scheme = "iob2";
  std::string output_scheme;
};

void run_project(const ProjectArgs& a) {
  const TagScheme in_scheme = parse_tag_scheme(a.scheme);
  const TagScheme out_scheme = a.output_scheme.empty() ? in_scheme : parse_tag_scheme(a.output_scheme);
  const auto source = io::read_labeled_conll_file(a.source, in_scheme);
  const auto targets = io::read_tokenized_file(a.target);
  const auto alignments = read_alignments(a.alignments);
  require_same_count(source.size(), a.source, targets.size(), a.target);
  require_same_count(source.size(), a.source, alignments.size(), a.alignments);

  const auto projected = a.direction == "train"
                             ? projection::translate_train_assemble(source, targets, alignments)
                             : projection::translate_test_backproject(source, targets, alignments);
  write_conll_file(a.output, projected, out_scheme);

  if (a.report.empty()) return;
  const auto reports = projection::project_batch_parallel(source, targets, alignments);
  auto out = io::open_output(a.report);
  out << "sentence,projected,dropped_splits,merged_gaps,collisions_merged,collisions_resolved,"
         "punct_alignments_ignored,unaligned_spans\n";
  projection::ProjectionReport total;
  auto row = [&](const std::string& name, const projection::ProjectionReport& r) {
    out << name << ',' << r.projected.size() << ',' << r.dropped_splits << ',' << r.merged_gaps << ','
        << r.collisions_merged << ',' << r.collisions_resolved << ',' << r.punct_alignments_ignored << ','
        << r.unaligned_spans << '\n';
  };
  for (std::size_t i = 0; i < reports.size(); ++i) {
    row(std::to_string(i), reports[i]);
    total += reports[i];
  }
  row("total", total);
}

// ---- tproject

struct TprojectArgs {
  std::string source, target, output, candidates, oracle, gold, sweep_csv, score_cache;
  std::string scorer = "overlap";
  std::string scheme = "iob2";
  std::optional<double> table_fallback;
  std::vector<std::size_t> sweep;
  bool ngram = false;
  bool most_probable = false;
};

std::unique_ptr<tproj::Scorer> make_scorer(const std::string& spec, std::optional<double> fallback) {
  if (spec == "overlap") return std::make_unique<tproj::CharOverlapScorer>();
  if (spec.rfind("table:", 0) == 0) {
    return std::make_unique<tproj::TableScorer>(tproj::TableScorer::load(spec.substr(6), fallback));
  }
  throw InputError("unknown scorer '" + spec + "' (expected table:<file> or overlap)");
}

void run_tproject(const TprojectArgs& a) {
  if (a.ngram == !a.candidates.empty()) throw InputError("give exactly one of --ngram and --candidates");
  if (a.most_probable && !a.oracle.empty()) throw InputError("--most-probable and --oracle are exclusive");
  const TagScheme scheme = parse_tag_scheme(a.scheme);
  const auto source = io::read_labeled_conll_file(a.source, scheme);
  const auto targets = io::read_tokenized_file(a.target);
  require_same_count(source.size(), a.source, targets.size(), a.target);

  std::vector<LabeledSentence> oracle_gold;
  if (!a.oracle.empty()) oracle_gold = io::read_labeled_conll_file(a.oracle, scheme);
  std::vector<LabeledSentence> sweep_gold = a.gold.empty() ? oracle_gold : io::read_labeled_conll_file(a.gold, scheme);
  if (!a.sweep.empty() && sweep_gold.empty() && !source.empty()) {
    throw InputError("--sweep needs gold target annotations (--gold or --oracle)");
  }

  tproj::CandidateTable table;
  if (!a.candidates.empty()) table = tproj::read_candidate_file(a.candidates);

  std::unique_ptr<tproj::Scorer> scorer;
  std::optional<tproj::ScoreCache> cache;
  if (!a.most_probable && a.oracle.empty()) {
    scorer = make_scorer(a.scorer, a.table_fallback);
    if (!a.score_cache.empty()) {
      cache = fs::exists(a.score_cache) ? tproj::ScoreCache::load(a.score_cache) : tproj::ScoreCache{};
    }
  }

  std::vector<tproj::CandidateSet> sets;
  std::vector<LabeledSentence> out;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Words& target = targets[i];
    auto set = a.ngram ? tproj::generate_ngram_candidates(target, source[i].spans())
                       : tproj::external_candidates(table, i, source[i].spans());
    set = tproj::filter_candidates(set, target);
    try {
      if (a.most_probable) {
        out.push_back(tproj::select_most_probable(set, target).labeled);
      } else if (!a.oracle.empty()) {
        if (i >= oracle_gold.size() || oracle_gold[i].words() != target) {
          throw InputError("oracle gold does not match the target words");
        }
        out.push_back(tproj::oracle_upper_bound(set, oracle_gold[i]).labeled);
      } else {
        out.push_back(tproj::select_candidates(set, source[i], target, *scorer, cache ? &*cache : nullptr).labeled);
      }
    } catch (const std::runtime_error& e) {
      throw InputError("sentence " + std::to_string(i) + ": " + e.what());
    }
    sets.push_back(std::move(set));
  }
  write_conll_file(a.output, out, scheme);

  if (cache) {
    auto f = io::open_output(a.score_cache);
    cache->save(f);
  }
  if (!a.sweep.empty()) {
    require_same_count(sweep_gold.size(), a.gold.empty() ? a.oracle : a.gold, source.size(), a.source);
    const auto rows = tproj::candidate_sweep(sets, a.sweep, sweep_gold);
    emit(a.sweep_csv, [&](std::ostream& o) {
      o << "k,hits,total,hit_rate\n";
      for (const auto& r : rows) o << r.k << ',' << r.hits << ',' << r.total << ',' << percent(r.hit_rate) << '\n';
    });
  }
}

// ---- decode

struct DecodeArgs {
  std::string input, output, conll, model = "random";
  std::vector<std::string> categories;
  std::string scheme = "iob2";
  std::size_t beam = 1;
  std::size_t piece_chars = 0;
  std::size_t max_tokens = 0;
  std::uint64_t seed = 0;
  bool unconstrained = false;
};

void run_decode(const DecodeArgs& a) {
  const TagScheme scheme = parse_tag_scheme(a.scheme);
  if (a.beam == 0) throw InputError("--beam must be at least 1");
  const std::string spec = a.model == "random" ? "random:" + std::to_string(a.seed) : a.model;
  const auto model = decoding::make_model(spec);
  std::unique_ptr<decoding::Tokenizer> tokenizer;
  if (a.piece_chars == 0) {
    tokenizer = std::make_unique<decoding::WholeWordTokenizer>();
  } else {
    tokenizer = std::make_unique<decoding::ChunkTokenizer>(a.piece_chars);
  }
  const auto inputs = io::read_tokenized_file(a.input);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].empty()) throw InputError(a.input + ":" + std::to_string(i + 1) + ": empty sentence");
  }
  const std::string conll_path = a.conll.empty() ? a.output + ".conll" : a.conll;

  if (!a.unconstrained) {
    const auto results = decoding::decode_batch_parallel(inputs, a.categories, *model, *tokenizer, a.beam);
    std::vector<LabeledSentence> sentences;
    auto out = io::open_output(a.output);
    for (const auto& r : results) {
      out << r.text << '\n';
      sentences.push_back(r.sentence);
    }
    write_conll_file(conll_path, sentences, scheme);
    return;
  }

  // Unmasked generation: the text is written as produced; the CoNLL sidecar
  // pairs the input words with leniently converted tags.
  auto out = io::open_output(a.output);
  auto conll = io::open_output(conll_path);
  for (const auto& words : inputs) {
    const decoding::Session session(words, a.categories, *model, *tokenizer);
    const std::size_t limit = a.max_tokens ? a.max_tokens : 4 * words.size() + 8;
    const auto r = decoding::unconstrained_beam(session, a.beam, limit);
    out << r.text << '\n';
    const auto tags = diagnostics::to_iob2_lenient(r.text, words.size());
    for (std::size_t i = 0; i < words.size(); ++i) conll << words[i] << '\t' << tags[i] << '\n';
    conll << '\n';
  }
}

// ---- diagnose

struct DiagnoseArgs {
  std::string input, outputs, csv;
};

void run_diagnose(const DiagnoseArgs& a) {
  const auto inputs = io::read_tokenized_file(a.input);
  const auto outputs = io::read_lines_file(a.outputs);
  require_same_count(inputs.size(), a.input, outputs.size(), a.outputs);
  std::vector<diagnostics::OutputPair> pairs;
  for (std::size_t i = 0; i < inputs.size(); ++i) pairs.emplace_back(inputs[i], outputs[i]);
  const auto diagnoses = diagnostics::diagnose_batch_parallel(pairs);
  const auto rates = diagnostics::rates_from(diagnoses);
  if (rates.empty_corpus) std::cerr << "warning: empty corpus, all rates are 0\n";

  emit(a.csv, [&](std::ostream& o) {
    o << "sentence,markup_error,hallucinated_words,splitting,missing_words,clean\n";
    for (std::size_t i = 0; i < diagnoses.size(); ++i) {
      const auto& d = diagnoses[i];
      o << i << ',' << csv_field(d.markup_error ? d.markup_error->detail : "") << ','
        << csv_field(join_words(d.hallucinated_words)) << ',' << (d.splitting ? 1 : 0) << ','
        << csv_field(join_words(d.missing_words)) << ',' << (d.clean ? 1 : 0) << '\n';
    }
    o << "summary_percent," << percent(rates.markup) << ',' << percent(rates.hallucination) << ','
      << percent(rates.splitting) << ",," << percent(100.0 - rates.any) << '\n';
  });
}

// ---- eval

struct EvalArgs {
  std::string gold, pred, csv;
  std::string scheme = "iob2";
  std::vector<std::string> rename;
};

void run_eval(const EvalArgs& a) {
  const auto report = eval::f1_from_tag_files(a.gold, a.pred, parse_tag_scheme(a.scheme), parse_rename(a.rename));
  eval::print_table(std::cout, report);
  if (!a.csv.empty()) {
    auto out = io::open_output(a.csv);
    eval::write_csv(out, report);
  }
}

// ---- convert

struct ConvertArgs {
  std::string input, output, from = "conll", to = "tagged";
  std::string scheme = "iob2";
  std::string output_scheme;
  std::vector<std::string> rename;
};

void run_convert(const ConvertArgs& a) {
  const TagScheme in_scheme = parse_tag_scheme(a.scheme);
  const TagScheme out_scheme = a.output_scheme.empty() ? in_scheme : parse_tag_scheme(a.output_scheme);
  std::vector<LabeledSentence> sentences;
  if (a.from == "conll") {
    sentences = io::read_labeled_conll_file(a.input, in_scheme);
  } else if (a.from == "tagged") {
    sentences = io::read_tagged_file(a.input);
  } else {
    throw InputError("--from must be conll or tagged");
  }
  sentences = renamed(std::move(sentences), parse_rename(a.rename));
  if (a.to == "conll") {
    write_conll_file(a.output, sentences, out_scheme);
  } else if (a.to == "tagged") {
    auto out = io::open_output(a.output);
    io::write_tagged(out, sentences);
  } else {
    throw InputError("--to must be conll or tagged");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual sequence labeling toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "xlabel 0.1.0");

  ProjectArgs pa;
  auto* project = app.add_subcommand("project", "Project source spans through word alignments");
  project->add_option("--source", pa.source, "Labeled CoNLL file")->required()->check(CLI::ExistingFile);
  project->add_option("--target", pa.target, "Tokenized target sentences")->required()->check(CLI::ExistingFile);
  project->add_option("--alignments", pa.alignments, "Pharaoh alignment file (source-target)")
      ->required()
      ->check(CLI::ExistingFile);
  project->add_option("--output", pa.output, "Projected CoNLL output")->required();
  project->add_option("--report", pa.report, "Per-sentence projection report (CSV)");
  project->add_option("--direction", pa.direction, "train: gold source to translation; test: predictions back to the original")
      ->check(CLI::IsMember({"train", "test"}));
  project->add_option("--scheme", pa.scheme, "Input tag scheme (iob2|bilou)");
  project->add_option("--output-scheme", pa.output_scheme, "Output tag scheme (defaults to --scheme)");

  TprojectArgs ta;
  auto* tproject = app.add_subcommand("tproject", "Select projection candidates by translation probability");
  tproject->add_option("--source", ta.source, "Labeled CoNLL file")->required()->check(CLI::ExistingFile);
  tproject->add_option("--target", ta.target, "Tokenized target sentences")->required()->check(CLI::ExistingFile);
  tproject->add_option("--output", ta.output, "Selected spans (CoNLL)")->required();
  tproject->add_flag("--ngram", ta.ngram, "Use every n-gram of the target as a candidate");
  tproject->add_option("--candidates", ta.candidates, "Candidate file (sentence.span TAB rank TAB text)")
      ->check(CLI::ExistingFile);
  tproject->add_option("--scorer", ta.scorer, "table:<file> or overlap");
  tproject->add_option("--table-fallback", ta.table_fallback, "Per-token probability for pairs missing from the table");
  tproject->add_flag("--most-probable", ta.most_probable, "Take each span's best-ranked candidate");
  tproject->add_option("--oracle", ta.oracle, "Gold target CoNLL; prefer candidates matching it")
      ->check(CLI::ExistingFile);
  tproject->add_option("--gold", ta.gold, "Gold target CoNLL for --sweep")->check(CLI::ExistingFile);
  tproject->add_option("--sweep", ta.sweep, "Comma-separated candidate counts for the hit-rate sweep")
      ->delimiter(',');
  tproject->add_option("--sweep-csv", ta.sweep_csv, "Sweep table destination (default stdout)");
  tproject->add_option("--score-cache", ta.score_cache, "Replayable p(A|B) cache file, read and updated");
  tproject->add_option("--scheme", ta.scheme, "Tag scheme of all CoNLL files");

  DecodeArgs da;
  auto* decode = app.add_subcommand("decode", "Label sentences with FSA-constrained generation");
  decode->add_option("--input", da.input, "Tokenized sentences")->required()->check(CLI::ExistingFile);
  decode->add_option("--output", da.output, "Tagged-text output")->required();
  decode->add_option("--conll", da.conll, "CoNLL sidecar (default <output>.conll)");
  decode->add_option("--categories", da.categories, "Comma-separated categories")->required()->delimiter(',');
  decode->add_option("--beam", da.beam, "Beam width (1 = greedy)");
  decode->add_option("--model", da.model, "mock-table:<file>, random:<seed> or random (uses --seed)");
  decode->add_option("--seed", da.seed, "Seed for --model random");
  decode->add_option("--piece-chars", da.piece_chars, "Split words into pieces of this many characters (0 = whole words)");
  decode->add_flag("--unconstrained", da.unconstrained, "Generate without the automaton");
  decode->add_option("--max-tokens", da.max_tokens, "Token limit for --unconstrained (default 4n+8)");
  decode->add_option("--scheme", da.scheme, "Sidecar tag scheme");

  DiagnoseArgs ga;
  auto* diagnose = app.add_subcommand("diagnose", "Classify raw outputs against their inputs");
  diagnose->add_option("--input", ga.input, "Tokenized input sentences")->required()->check(CLI::ExistingFile);
  diagnose->add_option("--outputs", ga.outputs, "Raw model outputs, one per line")->required()->check(CLI::ExistingFile);
  diagnose->add_option("--csv", ga.csv, "CSV destination (default stdout)");

  EvalArgs ea;
  auto* evaluate = app.add_subcommand("eval", "Entity-level precision, recall and F1");
  evaluate->add_option("--gold", ea.gold, "Gold CoNLL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--pred", ea.pred, "Predicted CoNLL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--scheme", ea.scheme, "Tag scheme of both files");
  evaluate->add_option("--csv", ea.csv, "Also write the table as CSV");
  evaluate->add_option("--rename", ea.rename, "Category renames FROM=TO, comma-separated")->delimiter(',');

  ConvertArgs ca;
  auto* convert = app.add_subcommand("convert", "Convert between CoNLL and tagged text");
  convert->add_option("--input", ca.input, "Input file")->required()->check(CLI::ExistingFile);
  convert->add_option("--output", ca.output, "Output file")->required();
  convert->add_option("--from", ca.from, "conll or tagged")->check(CLI::IsMember({"conll", "tagged"}));
  convert->add_option("--to", ca.to, "conll or tagged")->check(CLI::IsMember({"conll", "tagged"}));
  convert->add_option("--scheme", ca.scheme, "Input CoNLL tag scheme");
  convert->add_option("--output-scheme", ca.output_scheme, "Output CoNLL tag scheme (defaults to --scheme)");
  convert->add_option("--rename", ca.rename, "Category renames FROM=TO, comma-separated")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*project) run_project(pa);
    if (*tproject) run_tproject(ta);
    if (*decode) run_decode(da);
    if (*diagnose) run_diagnose(ga);
    if (*evaluate) run_eval(ea);
    if (*convert) run_convert(ca);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ScorerError& e) {
    std::cerr << "scorer error: " << e.what() << '\n';
    return 1;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
