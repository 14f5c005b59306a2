#include "xlabel/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "xlabel/error.hpp"
#include "xlabel/io.hpp"
#include "xlabel/utf8.hpp"

namespace xlabel::decoding {

std::string open_tag(std::string_view category) { return "<" + std::string(category) + ">"; }
std::string close_tag(std::string_view category) { return "</" + std::string(category) + ">"; }

std::string decoder_only_prompt(const Words& input) {
  return join_words(input) + " " + std::string(kPromptSeparator);
}

std::vector<std::string> WholeWordTokenizer::pieces(std::string_view word) const {
  return {std::string(kWordStart) + std::string(word)};
}

ChunkTokenizer::ChunkTokenizer(std::size_t max_chars) : max_chars_(max_chars) {
  if (max_chars_ == 0) throw ContractError("ChunkTokenizer needs max_chars >= 1");
}

std::vector<std::string> ChunkTokenizer::pieces(std::string_view word) const {
  const auto cps = utf8::decode(word);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < cps.size(); i += max_chars_) {
    std::string piece = out.empty() ? std::string(kWordStart) : std::string();
    for (std::size_t j = i; j < std::min(cps.size(), i + max_chars_); ++j) piece += utf8::encode(cps[j]);
    out.push_back(std::move(piece));
  }
  return out;
}

TokenId Vocabulary::add(std::string_view surface) {
  const auto [it, inserted] = ids_.emplace(std::string(surface), static_cast<TokenId>(surfaces_.size()));
  if (inserted) surfaces_.emplace_back(surface);
  return it->second;
}

std::optional<TokenId> Vocabulary::find(std::string_view surface) const {
  const auto it = ids_.find(std::string(surface));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::at(std::string_view surface) const {
  if (auto id = find(surface)) return *id;
  throw ContractError("token '" + std::string(surface) + "' not in vocabulary");
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void softmax_in_place(std::vector<double>& logits) {
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (double& v : logits) {
    v = std::exp(v - max);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

bool is_tag_surface(std::string_view s) {
  if (s.size() < 3 || s.front() != '<' || s.back() != '>') return false;
  const std::size_t name = s[1] == '/' ? 2 : 1;
  return is_valid_category(s.substr(name, s.size() - 1 - name));
}

}  // namespace

RandomModel::RandomModel(std::uint64_t seed, double logit_scale, std::size_t order,
                         std::vector<std::string> distractors)
    : seed_(seed), logit_scale_(logit_scale), order_(order), distractors_(std::move(distractors)) {}

std::vector<double> RandomModel::next_distribution(const Vocabulary& vocab,
                                                   std::span<const TokenId> prefix) const {
  std::uint64_t ctx = splitmix64(seed_);
  const std::size_t from = prefix.size() > order_ ? prefix.size() - order_ : 0;
  if (from == 0) ctx = fnv1a(kBosContext, ctx);
  for (std::size_t i = from; i < prefix.size(); ++i) {
    ctx = fnv1a(vocab.surface(prefix[i]), ctx);
    ctx = fnv1a("\x1F", ctx);
  }
  std::vector<double> logits(vocab.size());
  for (std::size_t t = 0; t < vocab.size(); ++t) {
    const std::uint64_t h = splitmix64(fnv1a(vocab.surface(static_cast<TokenId>(t)), ctx));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    logits[t] = logit_scale_ * u;
  }
  softmax_in_place(logits);
  return logits;
}

void TableModel::add(std::string context, std::string token, double weight) {
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw InputError("table weight must be finite and non-negative");
  }
  if (context != "*") max_context_ = std::max(max_context_, split_words(context).size());
  rows_[std::move(context)][std::move(token)] = weight;
}

TableModel TableModel::parse(std::string_view text) {
  TableModel model;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string line(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    const std::string where = "model table line " + std::to_string(line_no);
    try {
      if (cols.size() == 2 && cols[0] == "floor") {
        model.set_floor(std::stod(cols[1]));
      } else if (cols.size() == 3) {
        model.add(join_words(split_words(cols[0])), cols[1], std::stod(cols[2]));
      } else {
        throw InputError("expected 'context<TAB>token<TAB>weight'");
      }
    } catch (const std::invalid_argument&) {
      throw InputError(where + ": not a number");
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  return model;
}

TableModel TableModel::load(const std::filesystem::path& path) {
  std::string text;
  for (const auto& line : io::read_lines_file(path)) text += line + "\n";
  try {
    return parse(text);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<double> TableModel::next_distribution(const Vocabulary& vocab,
                                                  std::span<const TokenId> prefix) const {
  const std::map<std::string, double>* row = nullptr;
  // Context surfaces, oldest first, with the sentence start in front.
  std::vector<std::string_view> history;
  history.push_back(kBosContext);
  for (const TokenId t : prefix) history.push_back(vocab.surface(t));
  for (std::size_t len = std::min(max_context_, history.size()); len >= 1 && !row; --len) {
    std::string key;
    for (std::size_t i = history.size() - len; i < history.size(); ++i) {
      if (!key.empty()) key += ' ';
      key += history[i];
    }
    if (const auto it = rows_.find(key); it != rows_.end()) row = &it->second;
  }
  if (!row) {
    if (const auto it = rows_.find("*"); it != rows_.end()) row = &it->second;
  }
  std::vector<double> dist(vocab.size(), floor_);
  if (row) {
    for (const auto& [surface, weight] : *row) {
      if (auto id = vocab.find(surface)) dist[*id] = weight;
    }
  }
  double sum = 0;
  for (const double v : dist) sum += v;
  if (sum <= 0) {
    std::fill(dist.begin(), dist.end(), 1.0 / static_cast<double>(dist.size()));
  } else {
    for (double& v : dist) v /= sum;
  }
  return dist;
}

std::vector<std::string> TableModel::extra_surfaces() const {
  std::set<std::string> out;
  for (const auto& [ctx, row] : rows_) {
    for (const auto& [surface, w] : row) out.insert(surface);
  }
  return {out.begin(), out.end()};
}

Session::Session(Words input, std::vector<std::string> categories, const Model& model,
                 const Tokenizer& tokenizer)
    : input_(std::move(input)), categories_(std::move(categories)), model_(&model) {
  std::sort(categories_.begin(), categories_.end());
  categories_.erase(std::unique(categories_.begin(), categories_.end()), categories_.end());
  for (const auto& c : categories_) {
    if (!is_valid_category(c)) throw InputError("invalid category '" + c + "'");
  }
  end_id_ = vocab_.add(kEndToken);
  for (const auto& c : categories_) {
    open_ids_.push_back(vocab_.add(open_tag(c)));
    close_ids_.push_back(vocab_.add(close_tag(c)));
  }
  for (const auto& word : input_) {
    if (!is_valid_word(word)) throw InputError("invalid input word '" + word + "'");
    std::vector<TokenId> ids;
    for (const auto& piece : tokenizer.pieces(word)) ids.push_back(vocab_.add(piece));
    if (ids.empty()) throw ContractError("tokenizer produced no pieces for '" + word + "'");
    word_tokens_.push_back(std::move(ids));
  }
  for (const auto& s : model.extra_surfaces()) vocab_.add(s);
}

std::string Session::detokenize(std::span<const TokenId> tokens) const {
  std::vector<std::string> out;
  bool in_word = false;
  for (const TokenId t : tokens) {
    const std::string& s = vocab_.surface(t);
    if (t == end_id_) {
      in_word = false;
    } else if (is_tag_surface(s)) {
      out.push_back(s);
      in_word = false;
    } else if (s.starts_with(kWordStart)) {
      out.push_back(s.substr(kWordStart.size()));
      in_word = true;
    } else if (in_word) {
      out.back() += s;
    } else {
      out.push_back(s);
      in_word = true;
    }
  }
  // Pieces made only of the marker would leave empty words behind.
  std::erase_if(out, [](const std::string& w) { return w.empty(); });
  return join_words(out);
}

std::string describe(const Action& action, const std::vector<std::string>& categories) {
  return std::visit(
      [&](const auto& a) -> std::string {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, CopyNextWord>) return "copy";
        if constexpr (std::is_same_v<T, OpenTag>) {
          if (a.category >= categories.size()) return "open #" + std::to_string(a.category);
          return "open " + categories[a.category];
        }
        if constexpr (std::is_same_v<T, CloseTag>) return "close";
        if constexpr (std::is_same_v<T, End>) return "end";
      },
      action);
}

std::vector<Action> valid_actions(const DecodeState& state, std::size_t input_len,
                                  std::size_t category_count) {
  std::vector<Action> out;
  if (state.finished) return out;
  if (state.cursor < input_len) {
    out.emplace_back(CopyNextWord{});
    if (!state.open_tag) {
      for (std::size_t c = 0; c < category_count; ++c) out.emplace_back(OpenTag{c});
    }
  }
  if (state.open_tag && state.words_in_tag >= 1) out.emplace_back(CloseTag{});
  if (state.cursor == input_len && !state.open_tag) out.emplace_back(End{});
  return out;
}

namespace {

void check_distribution(const std::vector<double>& dist, const Vocabulary& vocab) {
  if (dist.size() != vocab.size()) {
    throw ContractError("model returned " + std::to_string(dist.size()) + " probabilities for a vocabulary of " +
                        std::to_string(vocab.size()));
  }
}

double log_of(double p) { return p > 0 ? std::log(p) : -std::numeric_limits<double>::infinity(); }

std::vector<double> distribution(const Session& session, std::span<const TokenId> prefix) {
  auto dist = session.model().next_distribution(session.vocab(), prefix);
  check_distribution(dist, session.vocab());
  return dist;
}

// Tokens and automaton update for an action known to be valid. The first
// token's probability comes from `first`, the distribution at the parent.
DecodeState advance(const DecodeState& parent, const Action& action, const Session& session,
                    const std::vector<double>& first) {
  DecodeState next = parent;
  auto push = [&](TokenId t, const std::vector<double>& dist) {
    next.logprob += log_of(dist[t]);
    next.emitted.push_back(t);
  };
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, CopyNextWord>) {
          const auto& ids = session.word_tokens(parent.cursor);
          push(ids[0], first);
          for (std::size_t i = 1; i < ids.size(); ++i) push(ids[i], distribution(session, next.emitted));
          ++next.cursor;
          if (next.open_tag) ++next.words_in_tag;
        } else if constexpr (std::is_same_v<T, OpenTag>) {
          push(session.open_token(a.category), first);
          next.open_tag = a.category;
          next.words_in_tag = 0;
        } else if constexpr (std::is_same_v<T, CloseTag>) {
          push(session.close_token(*parent.open_tag), first);
          next.open_tag.reset();
          next.words_in_tag = 0;
        } else {
          push(session.end_token(), first);
          next.finished = true;
        }
      },
      action);
  return next;
}

std::vector<DecodeState> expand(const DecodeState& state, const Session& session) {
  const auto actions = valid_actions(state, session.input().size(), session.categories().size());
  if (actions.empty()) return {};
  const auto first = distribution(session, state.emitted);
  std::vector<DecodeState> out;
  out.reserve(actions.size());
  for (const auto& a : actions) out.push_back(advance(state, a, session, first));
  return out;
}

DecodeResult finish(const Session& session, const DecodeState& state) {
  DecodeResult r;
  r.tokens = state.emitted;
  r.logprob = state.logprob;
  r.text = session.detokenize(r.tokens);
  auto parsed = parse_tagged_text(r.text);
  if (auto* err = std::get_if<MarkupError>(&parsed)) {
    throw InvariantError("constrained output failed to parse: " + err->detail);
  }
  r.sentence = std::get<LabeledSentence>(std::move(parsed));
  if (r.sentence.words() != session.input()) {
    throw InvariantError("constrained output changed the input words");
  }
  return r;
}

}  // namespace

DecodeState apply_action(const DecodeState& state, const Action& action, const Session& session) {
  const auto actions = valid_actions(state, session.input().size(), session.categories().size());
  if (std::find(actions.begin(), actions.end(), action) == actions.end()) {
    throw ContractError("action '" + describe(action, session.categories()) + "' is not valid here");
  }
  return advance(state, action, session, distribution(session, state.emitted));
}

DecodeResult constrained_greedy(const Session& session) {
  if (session.input().empty()) throw ContractError("constrained decoding needs a non-empty input");
  DecodeState state;
  while (!state.finished) {
    auto children = expand(state, session);
    if (children.empty()) throw InvariantError("no valid action in a reachable state");
    std::size_t best = 0;
    for (std::size_t i = 1; i < children.size(); ++i) {
      if (children[i].logprob > children[best].logprob) best = i;
    }
    state = std::move(children[best]);
  }
  return finish(session, state);
}

DecodeResult constrained_beam(const Session& session, std::size_t beam_width) {
  if (beam_width == 0) throw ContractError("beam width must be at least 1");
  if (session.input().empty()) throw ContractError("constrained decoding needs a non-empty input");
  std::vector<DecodeState> beams(1);
  std::vector<DecodeState> finished;
  auto by_logprob = [](const DecodeState& a, const DecodeState& b) { return a.logprob > b.logprob; };
  while (!beams.empty()) {
    std::vector<DecodeState> live;
    for (const auto& beam : beams) {
      for (auto& child : expand(beam, session)) {
        (child.finished ? finished : live).push_back(std::move(child));
      }
    }
    std::stable_sort(live.begin(), live.end(), by_logprob);
    if (live.size() > beam_width) live.resize(beam_width);
    beams = std::move(live);
    if (!finished.empty() && !beams.empty()) {
      // Log-probabilities never increase, so no live beam can overtake.
      const double best_done =
          std::max_element(finished.begin(), finished.end(), [](const auto& a, const auto& b) {
            return a.logprob < b.logprob;
          })->logprob;
      if (best_done >= beams.front().logprob) break;
    }
  }
  if (finished.empty()) throw InvariantError("beam search finished no hypothesis");
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (finished[i].logprob > finished[best].logprob) best = i;
  }
  return finish(session, finished[best]);
}

UnconstrainedResult unconstrained_beam(const Session& session, std::size_t beam_width,
                                       std::size_t max_tokens) {
  if (beam_width == 0) throw ContractError("beam width must be at least 1");
  struct Hyp {
    std::vector<TokenId> tokens;
    double logprob = 0;
    bool done = false;
  };
  std::vector<Hyp> beams(1);
  std::vector<Hyp> finished;
  while (!beams.empty()) {
    std::vector<Hyp> live;
    for (const auto& beam : beams) {
      const auto dist = distribution(session, beam.tokens);
      for (TokenId t = 0; t < dist.size(); ++t) {
        Hyp child{beam.tokens, beam.logprob + log_of(dist[t]), false};
        child.tokens.push_back(t);
        child.done = t == session.end_token() || child.tokens.size() >= max_tokens;
        live.push_back(std::move(child));
      }
    }
    std::stable_sort(live.begin(), live.end(), [](const Hyp& a, const Hyp& b) { return a.logprob > b.logprob; });
    if (live.size() > beam_width) live.resize(beam_width);
    beams.clear();
    for (auto& h : live) (h.done ? finished : beams).push_back(std::move(h));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (finished[i].logprob > finished[best].logprob) best = i;
  }
  UnconstrainedResult r;
  r.tokens = finished[best].tokens;
  r.logprob = finished[best].logprob;
  r.text = session.detokenize(r.tokens);
  return r;
}

SequenceLogprob sequence_logprob(std::span<const TokenId> tokens, const Session& session) {
  if (tokens.empty()) throw ContractError("sequence_logprob needs a non-empty sequence");
  SequenceLogprob out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto dist = distribution(session, tokens.first(i));
    const double p = dist.at(tokens[i]);
    if (p <= 0 && !out.zero_at) out.zero_at = i;
    out.logprob += log_of(p);
  }
  return out;
}

namespace {

DecodeResult decode_one(const Words& input, const std::vector<std::string>& categories,
                        const Model& model, const Tokenizer& tokenizer, std::size_t beam_width) {
  const Session session(input, categories, model, tokenizer);
  return beam_width == 1 ? constrained_greedy(session) : constrained_beam(session, beam_width);
}

}  // namespace

std::vector<DecodeResult> decode_batch_serial(const std::vector<Words>& inputs,
                                              const std::vector<std::string>& categories,
                                              const Model& model, const Tokenizer& tokenizer,
                                              std::size_t beam_width) {
  std::vector<DecodeResult> out;
  out.reserve(inputs.size());
  for (const auto& input : inputs) out.push_back(decode_one(input, categories, model, tokenizer, beam_width));
  return out;
}

std::vector<DecodeResult> decode_batch_parallel(const std::vector<Words>& inputs,
                                                const std::vector<std::string>& categories,
                                                const Model& model, const Tokenizer& tokenizer,
                                                std::size_t beam_width) {
  const auto n = static_cast<std::ptrdiff_t>(inputs.size());
  std::vector<DecodeResult> out(inputs.size());
  std::ptrdiff_t failed = n;
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] =
          decode_one(inputs[static_cast<std::size_t>(i)], categories, model, tokenizer, beam_width);
    } catch (...) {
#pragma omp critical(xlabel_decode_error)
      if (i < failed) {
        failed = i;
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::unique_ptr<Model> make_model(std::string_view spec) {
  if (spec.starts_with("mock-table:")) {
    return std::make_unique<TableModel>(TableModel::load(std::string(spec.substr(11))));
  }
  if (spec.starts_with("random:")) {
    const std::string seed_text(spec.substr(7));
    std::uint64_t seed = 0;
    try {
      std::size_t used = 0;
      seed = std::stoull(seed_text, &used);
      if (used != seed_text.size()) throw std::invalid_argument(seed_text);
    } catch (const std::exception&) {
      throw InputError("bad seed in model spec '" + std::string(spec) + "'");
    }
    return std::make_unique<RandomModel>(seed, 4.0, 3,
                                         std::vector<std::string>{"\xE2\x96\x81the", "\xE2\x96\x81of", "s", "an"});
  }
  throw InputError("unknown model spec '" + std::string(spec) + "' (expected mock-table:<file> or random:<seed>)");
}

}  // namespace xlabel::decoding
