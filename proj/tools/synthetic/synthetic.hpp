#pragma once

// Planted knowledge bases for end-to-end checks. Every document describes
// one made-up entity; each query asks what its entity is known for and the
// answer is planted once in that entity's document.

#include <cstdint>
#include <string>
#include <vector>

#include "ause/corpus.hpp"

namespace ause::synthetic {

struct Spec {
  std::size_t documents = 200;
  std::size_t queries = 100;
  /// Filler sentences appended after the planted facts.
  std::size_t min_filler = 2;
  std::size_t max_filler = 4;
  /// Probability that a filler sentence mentions some other attribute word.
  double distractor_rate = 0.5;
  /// Draw each document's two planted sentences from several phrasings.
  bool varied_templates = false;
  std::uint64_t seed = 1;
};

struct Dataset {
  std::vector<Document> documents;
  std::vector<Query> queries;
};

/// Deterministic in every Spec field, including the seed.
Dataset generate(const Spec& spec);

std::string documents_to_jsonl(const std::vector<Document>& docs);
std::string queries_to_jsonl(const std::vector<Query>& queries);

}  // namespace ause::synthetic
