#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "ause/random.hpp"
#include "ause/suffix_array.hpp"

namespace ause {
namespace {

std::vector<std::uint32_t> naive_suffix_array(const std::vector<std::uint32_t>& s) {
  std::vector<std::uint32_t> sa(s.size());
  std::iota(sa.begin(), sa.end(), 0u);
  std::sort(sa.begin(), sa.end(), [&](std::uint32_t a, std::uint32_t b) {
    return std::lexicographical_compare(s.begin() + a, s.end(), s.begin() + b, s.end());
  });
  return sa;
}

TEST(SuffixArray, SmallCases) {
  EXPECT_TRUE(build_suffix_array(std::vector<std::uint32_t>{}, 1).empty());
  EXPECT_EQ(build_suffix_array(std::vector<std::uint32_t>{0}, 1), std::vector<std::uint32_t>{0});
  // banana$ with a=1 b=2 n=3 $=0
  std::vector<std::uint32_t> banana{2, 1, 3, 1, 3, 1, 0};
  EXPECT_EQ(build_suffix_array(banana, 4), (std::vector<std::uint32_t>{6, 5, 3, 1, 0, 4, 2}));
}

TEST(SuffixArray, MatchesNaiveSortOnRandomStrings) {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    const std::uint32_t sigma = 1 + static_cast<std::uint32_t>(rng.below(trial % 2 ? 3 : 50));
    std::vector<std::uint32_t> s(n);
    for (auto& c : s) c = static_cast<std::uint32_t>(rng.below(sigma));
    ASSERT_EQ(build_suffix_array(s, sigma), naive_suffix_array(s)) << "trial " << trial;
  }
}

TEST(SuffixArray, HighlyRepetitiveInput) {
  std::vector<std::uint32_t> s(1000, 1);
  s.push_back(0);
  EXPECT_EQ(build_suffix_array(s, 2), naive_suffix_array(s));
}

}  // namespace
}  // namespace ause
