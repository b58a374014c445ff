#pragma once

#include <string>
#include <vector>

#include "ause/corpus.hpp"
#include "ause/random.hpp"

namespace ause::testing {

struct RandomCorpusSpec {
  std::size_t max_docs = 200;
  std::size_t max_doc_len = 50;
  std::size_t min_alphabet = 2;
  std::size_t max_alphabet = 40;
};

/// Random documents over a small word alphabet so that substrings repeat
/// within and across documents.
inline std::vector<Document> random_documents(Rng& rng, const RandomCorpusSpec& spec = {}) {
  const std::size_t docs = 1 + rng.below(spec.max_docs);
  const std::size_t alphabet = spec.min_alphabet + rng.below(spec.max_alphabet - spec.min_alphabet + 1);
  std::vector<Document> out;
  for (std::size_t d = 0; d < docs; ++d) {
    const std::size_t len = 1 + rng.below(spec.max_doc_len);
    std::string body;
    for (std::size_t i = 0; i < len; ++i) {
      if (!body.empty()) body.push_back(' ');
      body += "w" + std::to_string(rng.below(alphabet));
    }
    out.push_back({"d" + std::to_string(d), "", body});
  }
  return out;
}

}  // namespace ause::testing
