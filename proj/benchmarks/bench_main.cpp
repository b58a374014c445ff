#include <benchmark/benchmark.h>

#include <set>
#include <string>
#include <vector>

#include "ause/decoder.hpp"
#include "ause/fm_index.hpp"
#include "ause/random.hpp"
#include "ause/scorer.hpp"

using namespace ause;

namespace {

// Zipf-ish word draws so the corpus has a realistic mix of common and rare words.
std::vector<Document> make_corpus(std::size_t docs, std::size_t len, std::size_t vocab) {
  Rng rng(42);
  std::vector<Document> out;
  for (std::size_t d = 0; d < docs; ++d) {
    std::string body;
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t w = static_cast<std::size_t>(static_cast<double>(vocab) * rng.uniform() * rng.uniform());
      if (!body.empty()) body.push_back(' ');
      body += "w" + std::to_string(w);
    }
    out.push_back({"d" + std::to_string(d), "", std::move(body)});
  }
  return out;
}

void BM_BuildIndex(benchmark::State& state) {
  KnowledgeBase kb(make_corpus(static_cast<std::size_t>(state.range(0)), 100, 2000));
  for (auto _ : state) benchmark::DoNotOptimize(FmIndex::build(kb));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 100);
}
BENCHMARK(BM_BuildIndex)->Arg(100)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_AllowedTokens(benchmark::State& state) {
  KnowledgeBase kb(make_corpus(1000, 100, static_cast<std::size_t>(state.range(0))));
  const auto index = FmIndex::build(kb);
  const auto iv = index.extend_right(index.root(), kb.tokens(0).tokens.front());
  for (auto _ : state) benchmark::DoNotOptimize(index.allowed_tokens(iv));
  state.counters["V"] = static_cast<double>(index.content_vocab_size());
}
BENCHMARK(BM_AllowedTokens)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMicrosecond);

void BM_BeamSearch(benchmark::State& state) {
  KnowledgeBase kb(make_corpus(1000, 100, 1000));
  const auto index = FmIndex::build(kb);
  const std::size_t V = index.content_vocab_size();
  ReferenceScorer scorer(V);
  Rng rng(7);
  for (double& p : scorer.parameters()) p = rng.uniform() - 0.5;
  const auto& doc = kb.tokens(3).tokens;
  const std::set<TokenId> terms(doc.begin(), doc.begin() + 5);
  const EncodedQuery query{"q", {terms.begin(), terms.end()}};
  const BeamOptions options{static_cast<std::size_t>(state.range(0)), 10, {}};
  for (auto _ : state) benchmark::DoNotOptimize(constrained_beam_search(index, scorer, query, options));
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
