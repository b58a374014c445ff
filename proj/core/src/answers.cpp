#include "ause/answers.hpp"

#include <algorithm>

namespace ause {

double vqa_score(std::string_view predicted, std::span<const Answer> answers) {
  const auto norm = normalize_answer(predicted);
  if (norm.empty()) return 0.0;
  int m = 0;
  for (const auto& a : answers) {
    if (normalize_answer(a.text) == norm) m += a.count;
  }
  return std::min(1.0, static_cast<double>(m) / 3.0);
}

bool contains_sequence(std::span<const std::string> haystack, std::span<const std::string> needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

std::vector<std::string> strip_articles(std::span<const std::string> words) {
  std::vector<std::string> out;
  out.reserve(words.size());
  for (const auto& w : words) {
    if (w != "a" && w != "an" && w != "the") out.push_back(w);
  }
  return out;
}

bool contains_any_answer(std::span<const std::string> words, std::span<const Answer> answers) {
  const auto stripped = strip_articles(words);
  for (const auto& a : answers) {
    if (contains_sequence(stripped, normalize_answer_words(a.text))) return true;
  }
  return false;
}

}  // namespace ause
