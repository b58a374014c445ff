#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ause/decoder.hpp"
#include "ause/errors.hpp"
#include "ause/random.hpp"
#include "naive_index.hpp"
#include "random_corpus.hpp"

namespace ause {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

CallbackScorer uniform_scorer(std::size_t V) {
  return CallbackScorer(V, [V](const EncodedQuery&, std::span<const TokenId>, std::vector<double>& out) {
    out.assign(V, -std::log(static_cast<double>(V)));
  });
}

/// Puts all mass on planted[prefix.size()] (or the first token past its end).
CallbackScorer planted_scorer(std::size_t V, std::vector<TokenId> planted) {
  return CallbackScorer(V, [V, planted](const EncodedQuery&, std::span<const TokenId> prefix, std::vector<double>& out) {
    out.assign(V, kNegInf);
    const TokenId t = prefix.size() < planted.size() ? planted[prefix.size()] : kFirstContentToken;
    out[t - kFirstContentToken] = 0.0;
  });
}

class ToyCorpus : public ::testing::Test {
 protected:
  ToyCorpus() : kb({{"D1", "", "the palm tree"}, {"D2", "", "the oak tree"}}), index(FmIndex::build(kb)) {}
  std::vector<TokenId> ids(const std::string& s) const { return *kb.vocabulary().find_all(split_words(s)); }
  KnowledgeBase kb;
  FmIndex index;
  EncodedQuery query{"q", {}};
};

TEST_F(ToyCorpus, PlantedScorerRecoversIdentifier) {
  auto scorer = planted_scorer(kb.vocabulary().content_size(), ids("palm tree"));
  auto results = constrained_beam_search(index, scorer, query, {3, 10, {}});
  ASSERT_EQ(results.size(), 1u);
  EXPECT_EQ(results[0].identifier, ids("palm tree"));
  EXPECT_DOUBLE_EQ(results[0].logprob, 0.0);
  EXPECT_EQ(results[0].doc_ids, std::vector<std::string>{"D1"});
}

TEST_F(ToyCorpus, UnnormalizedScorerIsAContractError) {
  CallbackScorer bad(kb.vocabulary().content_size(), [](const EncodedQuery&, std::span<const TokenId>, std::vector<double>& out) {
    out.assign(4, 0.0);
  });
  EXPECT_THROW(constrained_beam_search(index, bad, query), ContractError);
}

TEST_F(ToyCorpus, InvalidOptions) {
  auto scorer = uniform_scorer(kb.vocabulary().content_size());
  EXPECT_THROW(constrained_beam_search(index, scorer, query, {0, 10, {}}), ValidationError);
  EXPECT_THROW(constrained_beam_search(index, scorer, query, {1, 0, {}}), ValidationError);
  auto wrong = uniform_scorer(2);
  EXPECT_THROW(constrained_beam_search(index, wrong, query), ContractError);
}

TEST_F(ToyCorpus, MaskingDoesNotRenormalize) {
  // Uniform over 4 content tokens: every step costs log 4 regardless of how
  // many tokens the index allows.
  auto scorer = uniform_scorer(4);
  auto results = constrained_beam_search(index, scorer, query, {10, 2, {}});
  for (const auto& r : results) EXPECT_NEAR(r.logprob, -static_cast<double>(r.identifier.size()) * std::log(4.0), 1e-12);
}

TEST(Decoder, UniformBeamEqualsExhaustiveEnumeration) {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    KnowledgeBase kb(testing::random_documents(rng, {6, 8, 2, 6}));
    auto index = FmIndex::build(kb, {3, 8});
    testing::NaiveIndex naive(kb.tokenized());
    const std::size_t max_len = 1 + rng.below(4);
    const auto paths = naive.maximal_paths(max_len);
    const auto V = kb.vocabulary().content_size();
    auto scorer = uniform_scorer(V);
    auto results = constrained_beam_search(index, scorer, {"q", {}}, {paths.size() + 3, max_len, {}});
    ASSERT_EQ(results.size(), paths.size());
    std::vector<std::vector<TokenId>> expected(paths.begin(), paths.end());
    std::stable_sort(expected.begin(), expected.end(),
                     [](const auto& a, const auto& b) { return a.size() < b.size(); });
    for (std::size_t i = 0; i < results.size(); ++i) {
      ASSERT_EQ(results[i].identifier, expected[i]);
      ASSERT_NEAR(results[i].logprob, -static_cast<double>(expected[i].size()) * std::log(static_cast<double>(V)), 1e-9);
      ASSERT_EQ(results[i].doc_ids, naive.documents_containing(expected[i]));
    }
  }
}

TEST(Decoder, ResultsAreValidSortedAndReplayable) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    KnowledgeBase kb(testing::random_documents(rng, {30, 20, 3, 15}));
    auto index = FmIndex::build(kb);
    const auto V = kb.vocabulary().content_size();
    ReferenceScorer scorer(V);
    for (double& p : scorer.parameters()) p = (rng.uniform() * 2 - 1) * 2;
    EncodedQuery q{"q", {static_cast<TokenId>(kFirstContentToken + rng.below(V))}};

    BeamOptions opt{5, 6, {}};
    std::size_t extends = 0;
    opt.on_extend = [&](const MatchInterval& parent, TokenId token, const MatchInterval& child) {
      ++extends;
      auto allowed = index.allowed_tokens(parent);
      ASSERT_TRUE(std::any_of(allowed.begin(), allowed.end(), [&](const TokenCount& tc) { return tc.token == token; }));
      ASSERT_FALSE(child.empty());
    };
    auto results = constrained_beam_search(index, scorer, q, opt);
    ASSERT_LE(results.size(), 5u);
    EXPECT_GT(extends, 0u);
    for (std::size_t i = 0; i < results.size(); ++i) {
      EXPECT_GT(index.count(results[i].identifier), 0u);
      EXPECT_LE(results[i].identifier.size(), 6u);
      EXPECT_LE(results[i].logprob, 0.0);
      EXPECT_FALSE(results[i].doc_ids.empty());
      EXPECT_NEAR(results[i].logprob, scorer.sequence_logprob(q, results[i].identifier), 1e-9);
      if (i > 0) EXPECT_LE(results[i].logprob, results[i - 1].logprob);
    }
  }
}

TEST(Decoder, PerformsExactlyMaxLenSteps) {
  KnowledgeBase kb({{"A", "", "a b c d e f g h i j k l m"}});
  auto index = FmIndex::build(kb);
  auto scorer = uniform_scorer(kb.vocabulary().content_size());
  DecodeStats stats;
  auto results = constrained_beam_search(index, scorer, {"q", {}}, {1, 10, {}}, &stats);
  EXPECT_EQ(stats.steps, 10u);
  ASSERT_EQ(results.size(), 1u);
  EXPECT_EQ(results[0].identifier.size(), 10u);
}

TEST(Decoder, StopsEarlyWhenNoContinuationExists) {
  KnowledgeBase kb({{"A", "", "x y"}});
  auto index = FmIndex::build(kb);
  auto scorer = uniform_scorer(2);
  DecodeStats stats;
  auto results = constrained_beam_search(index, scorer, {"q", {}}, {4, 10, {}}, &stats);
  EXPECT_LT(stats.steps, 10u);
  ASSERT_EQ(results.size(), 2u);
  // "x y" and "y" both end the document.
  EXPECT_EQ(results[0].identifier.size(), 1u);
}

TEST(MapToDocuments, KeepsBestIdentifierPerDocument) {
  std::vector<RetrievalResult> results{{{5, 6}, -0.1, {"D1"}}, {{4, 5}, -0.3, {"D1"}}};
  auto ranked = map_to_documents(results, 5);
  ASSERT_EQ(ranked.size(), 1u);
  EXPECT_EQ(ranked[0].doc_id, "D1");
  EXPECT_DOUBLE_EQ(ranked[0].logprob, -0.1);
  EXPECT_EQ(ranked[0].identifier, (std::vector<TokenId>{5, 6}));
}

TEST(MapToDocuments, MultiDocumentIdentifier) {
  std::vector<RetrievalResult> results{{{7}, -0.2, {"D1", "D2"}}};
  auto ranked = map_to_documents(results, 5);
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_DOUBLE_EQ(ranked[0].logprob, -0.2);
  EXPECT_DOUBLE_EQ(ranked[1].logprob, -0.2);
}

TEST(MapToDocuments, TopKAndTieBreaks) {
  std::vector<RetrievalResult> results{{{3, 4}, -0.5, {"D2"}}, {{9}, -0.5, {"D2"}}, {{2}, -0.1, {"D1"}}};
  auto ranked = map_to_documents(results, 1);
  ASSERT_EQ(ranked.size(), 1u);
  EXPECT_EQ(ranked[0].doc_id, "D1");
  auto both = map_to_documents(results, 2);
  EXPECT_EQ(both[1].identifier, std::vector<TokenId>{9});
  EXPECT_THROW(map_to_documents(results, 0), ValidationError);
  EXPECT_THROW(map_to_documents({}, 3), ValidationError);
}

TEST_F(ToyCorpus, SamplingIsReproducible) {
  ReferenceScorer scorer(kb.vocabulary().content_size());
  Rng rng(8);
  for (double& p : scorer.parameters()) p = rng.uniform();
  SampleOptions opt{16, 1.0, 3};
  auto a = sample_identifiers(index, scorer, query, opt, 99);
  auto b = sample_identifiers(index, scorer, query, opt, 99);
  ASSERT_EQ(a.size(), 16u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].identifier, b[i].identifier);
    EXPECT_GT(index.count(a[i].identifier), 0u);
  }
  EXPECT_THROW(sample_identifiers(index, scorer, query, {1, 1.0, 3}, 1), ValidationError);
  EXPECT_THROW(sample_identifiers(index, scorer, query, {2, 0.0, 3}, 1), ValidationError);
}

TEST_F(ToyCorpus, ColdSamplingIsGreedy) {
  ReferenceScorer scorer(kb.vocabulary().content_size());
  Rng rng(12);
  for (double& p : scorer.parameters()) p = rng.uniform() * 3;
  auto greedy = constrained_beam_search(index, scorer, query, {1, 3, {}});
  ASSERT_EQ(greedy.size(), 1u);
  auto samples = sample_identifiers(index, scorer, query, {20, 1e-6, 3}, 5);
  for (const auto& s : samples) {
    EXPECT_EQ(s.identifier, greedy[0].identifier);
    EXPECT_NEAR(s.logprob, greedy[0].logprob, 1e-12);
  }
}

TEST(Sampling, FrequenciesMatchMaskedSoftmax) {
  // Three-token corpus; the scorer also knows a fourth token that the index
  // masks out.
  KnowledgeBase kb({{"A", "", "a b"}, {"B", "", "c zz"}});
  auto index = FmIndex::build(kb);
  const auto& vocab = kb.vocabulary();
  // First position: a, b, c are feasible, zz too. Put distinct mass on each.
  const std::vector<double> logits{std::log(0.5), std::log(0.2), std::log(0.1), std::log(0.2)};
  CallbackScorer scorer(4, [&](const EncodedQuery&, std::span<const TokenId>, std::vector<double>& out) {
    out = logits;
  });
  const double temperature = 0.7;
  const std::size_t N = 100000;
  auto samples = sample_identifiers(index, scorer, {"q", {}}, {N, temperature, 1}, 2024);
  std::vector<double> expect(4);
  double z = 0.0;
  for (std::size_t i = 0; i < 4; ++i) z += std::exp(logits[i] / temperature);
  for (std::size_t i = 0; i < 4; ++i) expect[i] = std::exp(logits[i] / temperature) / z;
  std::vector<std::size_t> counts(4, 0);
  for (const auto& s : samples) ++counts[s.identifier[0] - kFirstContentToken];
  for (std::size_t i = 0; i < 4; ++i) {
    const double mean = expect[i] * N;
    const double sigma = std::sqrt(N * expect[i] * (1 - expect[i]));
    EXPECT_LE(std::abs(static_cast<double>(counts[i]) - mean), 3 * sigma) << vocab.word(static_cast<TokenId>(i + 2));
  }

  // After "a" only "b" is feasible: the masked distribution is a point mass.
  auto two = sample_identifiers(index, scorer, {"q", {}}, {200, temperature, 2}, 7);
  for (const auto& s : two) {
    if (s.identifier[0] == *vocab.find("a")) {
      ASSERT_EQ(s.identifier.size(), 2u);
      EXPECT_EQ(s.identifier[1], *vocab.find("b"));
    }
  }
}

}  // namespace
}  // namespace ause
