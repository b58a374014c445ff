#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ause/corpus.hpp"

namespace ause {

/// min(1, m / 3) where m is the annotator count of the (normalized) predicted
/// answer. Counts of answers that normalize to the same string are summed.
double vqa_score(std::string_view predicted, std::span<const Answer> answers);

/// True iff `needle` occurs contiguously in `haystack`; an empty needle never matches.
bool contains_sequence(std::span<const std::string> haystack, std::span<const std::string> needle);

/// True iff any normalized answer occurs contiguously in the normalized words.
bool contains_any_answer(std::span<const std::string> words, std::span<const Answer> answers);

/// Words with articles removed, the form answers are matched against.
std::vector<std::string> strip_articles(std::span<const std::string> words);

}  // namespace ause
