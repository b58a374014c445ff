#include "ause/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ause/errors.hpp"
#include "ause/random.hpp"

namespace ause {
namespace {

constexpr double kNormalizationTolerance = 1e-6;

struct Hypothesis {
  std::vector<TokenId> tokens;
  double logprob = 0.0;
  MatchInterval interval;
  bool finished = false;
};

void checked_logprobs(const SequenceScorer& scorer, const EncodedQuery& query, std::span<const TokenId> prefix,
                      std::size_t vocab, std::vector<double>& out) {
  scorer.next_logprobs(query, prefix, out);
  if (out.size() != vocab) {
    throw ContractError("scorer returned " + std::to_string(out.size()) + " logprobs for a vocabulary of " +
                        std::to_string(vocab));
  }
  for (double v : out) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw ContractError("scorer returned a non-finite logprob");
    }
  }
  const double z = logsumexp(out);
  if (!(std::abs(z) <= kNormalizationTolerance)) {
    throw ContractError("scorer distribution is not normalized (logsumexp = " + std::to_string(z) + ")");
  }
}

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  return token_sequence_less(a.tokens, b.tokens);
}

void require_searchable(const FmIndex& index, const SequenceScorer& scorer) {
  if (index.size() == 0 || index.document_count() == 0) throw ValidationError("empty knowledge base");
  if (scorer.vocab_size() != index.content_vocab_size()) {
    throw ContractError("scorer vocabulary (" + std::to_string(scorer.vocab_size()) +
                        ") does not match the index vocabulary (" + std::to_string(index.content_vocab_size()) +
                        ")");
  }
}

}  // namespace

bool token_sequence_less(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::vector<RetrievalResult> constrained_beam_search(const FmIndex& index, const SequenceScorer& scorer,
                                                     const EncodedQuery& query, const BeamOptions& options,
                                                     DecodeStats* stats) {
  if (options.beam_width == 0) throw ValidationError("beam_width must be at least 1");
  if (options.max_len == 0) throw ValidationError("max_len must be at least 1");
  require_searchable(index, scorer);

  const std::size_t vocab = scorer.vocab_size();
  std::vector<Hypothesis> beam{Hypothesis{{}, 0.0, index.root(), false}};
  std::vector<double> lp;
  std::size_t steps = 0;

  for (std::size_t step = 0; step < options.max_len; ++step) {
    if (std::all_of(beam.begin(), beam.end(), [](const Hypothesis& h) { return h.finished; })) break;
    ++steps;
    std::vector<Hypothesis> pool;
    for (auto& h : beam) {
      if (h.finished) {
        pool.push_back(std::move(h));
        continue;
      }
      checked_logprobs(scorer, query, h.tokens, vocab, lp);
      bool extended = false;
      for (const auto& [token, child] : index.allowed_extensions(h.interval)) {
        const double v = lp[token - kFirstContentToken];
        if (v == -std::numeric_limits<double>::infinity()) continue;
        if (options.on_extend) options.on_extend(h.interval, token, child);
        Hypothesis next{h.tokens, h.logprob + v, child, false};
        next.tokens.push_back(token);
        pool.push_back(std::move(next));
        extended = true;
      }
      if (!extended && !h.tokens.empty()) {
        h.finished = true;
        pool.push_back(std::move(h));
      }
    }
    const std::size_t keep = std::min(options.beam_width, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(), better);
    pool.resize(keep);
    beam = std::move(pool);
    if (beam.empty()) break;
  }
  if (stats) stats->steps = steps;

  std::vector<RetrievalResult> results;
  results.reserve(beam.size());
  for (auto& h : beam) {
    if (h.tokens.empty()) continue;
    RetrievalResult r;
    r.doc_ids = index.locate_documents(h.interval);
    r.identifier = std::move(h.tokens);
    r.logprob = h.logprob;
    results.push_back(std::move(r));
  }
  return results;
}

RankedDocuments map_to_documents(const std::vector<RetrievalResult>& results, std::size_t k) {
  if (k == 0) throw ValidationError("K must be positive");
  if (results.empty()) throw ValidationError("no retrieval results to map");

  auto preferred = [](const RankedDocument& a, const RankedDocument& b) {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    if (a.identifier.size() != b.identifier.size()) return a.identifier.size() < b.identifier.size();
    if (a.identifier != b.identifier) return token_sequence_less(a.identifier, b.identifier);
    return a.doc_id < b.doc_id;
  };

  std::map<std::string, RankedDocument> best;
  for (const auto& r : results) {
    for (const auto& id : r.doc_ids) {
      RankedDocument cand{id, r.logprob, r.identifier};
      auto it = best.find(id);
      if (it == best.end()) {
        best.emplace(id, std::move(cand));
      } else if (preferred(cand, it->second)) {
        it->second = std::move(cand);
      }
    }
  }
  RankedDocuments ranked;
  ranked.reserve(best.size());
  for (auto& [id, doc] : best) ranked.push_back(std::move(doc));
  std::sort(ranked.begin(), ranked.end(), preferred);
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

std::vector<RetrievalResult> sample_identifiers(const FmIndex& index, const SequenceScorer& scorer,
                                                const EncodedQuery& query, const SampleOptions& options,
                                                std::uint64_t seed) {
  if (options.k < 2) throw ValidationError("sample_identifiers needs k >= 2");
  if (!(options.temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (options.max_len == 0) throw ValidationError("max_len must be at least 1");
  require_searchable(index, scorer);

  Rng rng = Rng::substream(seed, "sampling/" + query.query_id);
  const std::size_t vocab = scorer.vocab_size();
  std::vector<double> lp;
  std::vector<double> weights;
  std::vector<RetrievalResult> out;
  out.reserve(options.k);

  for (std::size_t s = 0; s < options.k; ++s) {
    std::vector<TokenId> tokens;
    MatchInterval interval = index.root();
    double logprob = 0.0;
    for (std::size_t step = 0; step < options.max_len; ++step) {
      checked_logprobs(scorer, query, tokens, vocab, lp);
      auto ext = index.allowed_extensions(interval);
      std::erase_if(ext, [&](const auto& e) {
        return lp[e.first - kFirstContentToken] == -std::numeric_limits<double>::infinity();
      });
      if (ext.empty()) break;
      weights.resize(ext.size());
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < ext.size(); ++i) {
        weights[i] = lp[ext[i].first - kFirstContentToken] / options.temperature;
        m = std::max(m, weights[i]);
      }
      double total = 0.0;
      for (double& w : weights) {
        w = std::exp(w - m);
        total += w;
      }
      double u = rng.uniform() * total;
      std::size_t pick = ext.size() - 1;
      for (std::size_t i = 0; i < ext.size(); ++i) {
        if (u < weights[i]) {
          pick = i;
          break;
        }
        u -= weights[i];
      }
      // Zero-weight entries (underflow at tiny temperatures) are never picked.
      while (weights[pick] == 0.0 && pick > 0) --pick;
      tokens.push_back(ext[pick].first);
      logprob += lp[ext[pick].first - kFirstContentToken];
      interval = ext[pick].second;
    }
    if (tokens.empty()) throw ContractError("scorer assigns zero probability to every feasible token");
    RetrievalResult r;
    r.identifier = std::move(tokens);
    r.logprob = logprob;
    r.doc_ids = index.locate_documents(interval);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ause
