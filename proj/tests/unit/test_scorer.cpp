#include <gtest/gtest.h>

#include <cmath>

#include "ause/errors.hpp"
#include "ause/random.hpp"
#include "ause/scorer.hpp"
#include "gradcheck.hpp"

namespace ause {
namespace {

EncodedQuery query_with_terms(std::vector<TokenId> terms) { return {"q", std::move(terms)}; }

void randomize(std::span<double> params, Rng& rng, double scale) {
  for (double& p : params) p = (rng.uniform() * 2 - 1) * scale;
}

TEST(ReferenceScorer, ZeroParametersAreUniform) {
  ReferenceScorer s(7);
  std::vector<double> lp;
  s.next_logprobs(query_with_terms({2, 4}), std::vector<TokenId>{3}, lp);
  ASSERT_EQ(lp.size(), 7u);
  for (double v : lp) EXPECT_NEAR(v, -std::log(7.0), 1e-12);
}

TEST(ReferenceScorer, DistributionIsNormalized) {
  Rng rng(1);
  ReferenceScorer s(9);
  randomize(s.parameters(), rng, 3.0);
  std::vector<double> lp;
  for (TokenId prev = 2; prev < 11; ++prev) {
    s.next_logprobs(query_with_terms({2, 5, 10}), std::vector<TokenId>{prev}, lp);
    EXPECT_NEAR(logsumexp(lp), 0.0, 1e-6);
  }
}

TEST(ReferenceScorer, ParameterCountIsQuadratic) {
  EXPECT_EQ(ReferenceScorer::parameter_count_for(5), 5u + 25u + 30u);
  EXPECT_THROW(ReferenceScorer(5, std::vector<double>(3)), ContractError);
}

TEST(ReferenceScorer, RejectsTokensOutsideVocabulary) {
  ReferenceScorer s(3);
  std::vector<double> lp;
  EXPECT_THROW(s.next_logprobs(query_with_terms({9}), {}, lp), ContractError);
  EXPECT_THROW(s.sequence_logprob(query_with_terms({}), std::vector<TokenId>{kDocSep}), ContractError);
}

TEST(ReferenceScorer, SequenceLogprobIsSumOfSteps) {
  Rng rng(5);
  ReferenceScorer s(6);
  randomize(s.parameters(), rng, 1.0);
  auto q = query_with_terms({3, 7});
  std::vector<TokenId> seq{2, 5, 5, 7};
  double manual = 0.0;
  std::vector<double> lp;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    s.next_logprobs(q, std::span(seq).first(i), lp);
    manual += lp[seq[i] - kFirstContentToken];
  }
  EXPECT_NEAR(s.sequence_logprob(q, seq), manual, 1e-12);
  EXPECT_NEAR(s.SequenceScorer::sequence_logprob(q, seq), manual, 1e-12);
}

TEST(ReferenceScorer, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t V = 3 + rng.below(6);
    ReferenceScorer s(V);
    randomize(s.parameters(), rng, 1.0);
    EncodedQuery q = query_with_terms({});
    for (TokenId t = 0; t < V; ++t) {
      if (rng.below(3) == 0) q.terms.push_back(kFirstContentToken + t);
    }
    std::vector<TokenId> seq;
    for (std::size_t i = 0, n = 1 + rng.below(6); i < n; ++i) {
      seq.push_back(static_cast<TokenId>(kFirstContentToken + rng.below(V)));
    }
    std::vector<double> grad(s.parameter_count(), 0.0);
    const double lp = s.accumulate_gradient(q, seq, 1.0, grad);
    EXPECT_NEAR(lp, s.sequence_logprob(q, seq), 1e-12);
    auto fd = testing::central_differences(s.parameters(), [&] { return s.sequence_logprob(q, seq); });
    EXPECT_LT(testing::max_relative_error(grad, fd), 1e-4) << "trial " << trial;
  }
}

TEST(ReferenceScorer, InPlaceAccumulationEqualsBufferedStep) {
  Rng rng(2);
  ReferenceScorer a(5);
  randomize(a.parameters(), rng, 1.0);
  ReferenceScorer b = a;
  auto q = query_with_terms({2, 3});
  std::vector<TokenId> seq{2, 3, 4, 2};
  std::vector<double> grad(a.parameter_count(), 0.0);
  a.accumulate_gradient(q, seq, 0.1, grad);
  for (std::size_t i = 0; i < grad.size(); ++i) a.parameters()[i] += grad[i];
  b.accumulate_gradient(q, seq, 0.1, b.parameters());
  for (std::size_t i = 0; i < grad.size(); ++i) ASSERT_DOUBLE_EQ(a.parameters()[i], b.parameters()[i]);
}

TEST(CallbackScorer, ChecksVectorLength) {
  CallbackScorer s(4, [](const EncodedQuery&, std::span<const TokenId>, std::vector<double>& out) {
    out.assign(3, -std::log(3.0));
  });
  std::vector<double> lp;
  EXPECT_THROW(s.next_logprobs(query_with_terms({}), {}, lp), ContractError);
}

}  // namespace
}  // namespace ause
