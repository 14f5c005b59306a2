// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>

#include "support/generators.hpp"
#include "xlabel/decoding.hpp"
#include "xlabel/diagnostics.hpp"
#include "xlabel/evaluation.hpp"
#include "xlabel/projection.hpp"
#include "xlabel/tprojection.hpp"

using namespace xlabel;

namespace {

struct ProjectionBatch {
  std::vector<LabeledSentence> source;
  std::vector<Words> targets;
  std::vector<projection::AlignmentSet> alignments;
};

const ProjectionBatch& projection_batch() {
  static const ProjectionBatch batch = [] {
    ProjectionBatch b;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20000; ++i) {
      const std::size_t n = testing::uniform(rng, 5, 40);
      const std::size_t m = testing::uniform(rng, 5, 40);
      b.source.push_back(testing::random_sentence(rng, n, {"PER", "LOC", "ORG"}));
      b.targets.push_back(testing::random_words(rng, m));
      b.alignments.push_back(testing::random_alignment(rng, n, m, 0.08));
    }
    return b;
  }();
  return batch;
}

void BM_ProjectSerial(benchmark::State& state) {
  const auto& b = projection_batch();
  for (auto _ : state) benchmark::DoNotOptimize(projection::project_batch_serial(b.source, b.targets, b.alignments));
}
void BM_ProjectParallel(benchmark::State& state) {
  const auto& b = projection_batch();
  for (auto _ : state) benchmark::DoNotOptimize(projection::project_batch_parallel(b.source, b.targets, b.alignments));
}

struct PoolInput {
  LabeledSentence source;
  Words target;
  tproj::CandidateSet candidates;
};

const PoolInput& pool_input() {
  static const PoolInput in = [] {
    std::mt19937_64 rng(2);
    PoolInput p;
    p.source = LabeledSentence(testing::random_words(rng, 25), {{0, 2, "PER"}, {5, 8, "LOC"}, {12, 13, "ORG"}});
    p.target = testing::random_words(rng, 30);
    p.candidates = tproj::generate_ngram_candidates(p.target, p.source.spans());
    return p;
  }();
  return in;
}

void BM_ScorePoolSerial(benchmark::State& state) {
  const auto& p = pool_input();
  const tproj::CharOverlapScorer scorer;
  for (auto _ : state) benchmark::DoNotOptimize(tproj::score_pool_serial(p.candidates, p.source, p.target, scorer));
}
void BM_ScorePoolParallel(benchmark::State& state) {
  const auto& p = pool_input();
  const tproj::CharOverlapScorer scorer;
  for (auto _ : state) benchmark::DoNotOptimize(tproj::score_pool_parallel(p.candidates, p.source, p.target, scorer));
}

const std::vector<Words>& decode_inputs() {
  static const std::vector<Words> inputs = [] {
    std::mt19937_64 rng(3);
    std::vector<Words> v;
    for (int i = 0; i < 200; ++i) v.push_back(testing::random_words(rng, testing::uniform(rng, 5, 25), 16));
    return v;
  }();
  return inputs;
}

void BM_DecodeSerial(benchmark::State& state) {
  const decoding::RandomModel model(5);
  const decoding::ChunkTokenizer tok(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(decoding::decode_batch_serial(decode_inputs(), {"PER", "LOC"}, model, tok,
                                                           static_cast<std::size_t>(state.range(0))));
  }
}
void BM_DecodeParallel(benchmark::State& state) {
  const decoding::RandomModel model(5);
  const decoding::ChunkTokenizer tok(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(decoding::decode_batch_parallel(decode_inputs(), {"PER", "LOC"}, model, tok,
                                                             static_cast<std::size_t>(state.range(0))));
  }
}

const std::vector<diagnostics::OutputPair>& diagnose_pairs() {
  static const std::vector<diagnostics::OutputPair> pairs = [] {
    std::mt19937_64 rng(4);
    std::vector<diagnostics::OutputPair> v;
    for (int i = 0; i < 5000; ++i) {
      Words in = testing::random_words(rng, testing::uniform(rng, 5, 30), 16);
      Words out = in;
      if (i % 3 == 0) out[0] += "x";
      if (i % 4 == 0) {
        out[1] = out[1] + out[2];
        out.erase(out.begin() + 2);
      }
      v.emplace_back(std::move(in), "<PER> " + join_words(out) + " </PER>");
    }
    return v;
  }();
  return pairs;
}

void BM_DiagnoseSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(diagnostics::diagnose_batch_serial(diagnose_pairs()));
}
void BM_DiagnoseParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(diagnostics::diagnose_batch_parallel(diagnose_pairs()));
}

void BM_EntityF1Serial(benchmark::State& state) {
  const auto& b = projection_batch();
  for (auto _ : state) benchmark::DoNotOptimize(eval::entity_f1(b.source, b.source));
}
void BM_EntityF1Parallel(benchmark::State& state) {
  const auto& b = projection_batch();
  for (auto _ : state) benchmark::DoNotOptimize(eval::entity_f1_parallel(b.source, b.source));
}

}  // namespace

BENCHMARK(BM_ProjectSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProjectParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScorePoolSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScorePoolParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DecodeSerial)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DecodeParallel)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DiagnoseSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DiagnoseParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EntityF1Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EntityF1Parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
