#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ause/corpus.hpp"
#include "ause/fm_index.hpp"
#include "ause/scorer.hpp"

namespace ause {

/// A generated identifier, its log P(R | X) and the documents it occurs in.
struct RetrievalResult {
  std::vector<TokenId> identifier;
  double logprob = 0.0;
  std::vector<std::string> doc_ids;
};

struct RankedDocument {
  std::string doc_id;
  double logprob = 0.0;
  std::vector<TokenId> identifier;
};

/// Distinct documents, logprob nonincreasing.
using RankedDocuments = std::vector<RankedDocument>;

/// Called for every token appended to a hypothesis.
using ExtendObserver = std::function<void(const MatchInterval& parent, TokenId token, const MatchInterval& child)>;

struct BeamOptions {
  std::size_t beam_width = 10;
  /// Identifier length; decoding stops earlier only when no continuation exists.
  std::size_t max_len = 10;
  ExtendObserver on_extend;
};

struct SampleOptions {
  std::size_t k = 8;
  double temperature = 1.0;
  std::size_t max_len = 10;
};

struct DecodeStats {
  /// Constrained expansion rounds performed.
  std::size_t steps = 0;
};

/// Beam search restricted to corpus substrings. Disallowed tokens are
/// masked to -inf and the surviving mass is not renormalized, so each
/// result's logprob is the unconstrained model's log P(R | X). Results are
/// sorted by logprob descending, ties broken by token order.
std::vector<RetrievalResult> constrained_beam_search(const FmIndex& index, const SequenceScorer& scorer,
                                                     const EncodedQuery& query, const BeamOptions& options = {},
                                                     DecodeStats* stats = nullptr);

/// Expands identifiers to documents. A document reached by several
/// identifiers keeps the best one (higher logprob, then shorter, then
/// lexicographically smaller). Returns the top k documents.
RankedDocuments map_to_documents(const std::vector<RetrievalResult>& results, std::size_t k);

/// k ancestral samples from the temperature-scaled, constraint-masked model.
/// Each result's logprob is the untempered log P(R | X).
std::vector<RetrievalResult> sample_identifiers(const FmIndex& index, const SequenceScorer& scorer,
                                                const EncodedQuery& query, const SampleOptions& options,
                                                std::uint64_t seed);

/// Lexicographic order over token sequences.
bool token_sequence_less(const std::vector<TokenId>& a, const std::vector<TokenId>& b);

}  // namespace ause
