#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ause/corpus.hpp"
#include "ause/decoder.hpp"
#include "ause/fm_index.hpp"
#include "ause/rag.hpp"
#include "ause/scorer.hpp"

namespace ause {

// ---------------------------------------------------------------------------
// Target identifiers and supervised fine-tuning

struct TargetIdentifier {
  std::string doc_id;
  std::vector<TokenId> tokens;
  /// Distinct answer keywords inside the window.
  std::size_t answer_hits = 0;
  /// Window start within the document's token stream.
  std::size_t offset = 0;
  /// False only for the last-resort fallback window.
  bool unique = true;
};

/// Picks the window of the gold document that holds the most answer
/// keywords among windows occurring in no other document (earliest wins
/// ties). Without any unique window the length grows one token at a time up
/// to twice identifier_len; failing that, the earliest max-hit window of the
/// original length is returned with unique = false.
TargetIdentifier extract_target_identifier(const TokenizedDocument& doc, const Query& query,
                                           std::size_t identifier_len, const FmIndex& index);

/// -log P(target | query) under teacher forcing. When `grad` is nonempty the
/// gradient of the loss is added into it.
double sft_loss(const DifferentiableScorer& scorer, const EncodedQuery& query, std::span<const TokenId> target,
                std::span<double> grad = {});

struct SftExample {
  EncodedQuery query;
  std::vector<TokenId> target;
};

struct TrainOptions {
  std::size_t epochs = 20;
  double lr = 0.5;
  std::uint64_t seed = 0;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  /// Winner minus loser policy logprob (DPO only).
  double margin = 0.0;
};

struct TrainReport {
  /// Loss of each example before its update.
  std::vector<StepRecord> steps;
  /// Mean training loss; entry 0 is before training, entry e after epoch e.
  std::vector<double> epoch_mean_loss;
};

/// Per-example gradient descent over a seeded shuffle.
TrainReport train_sft(DifferentiableScorer& scorer, std::span<const SftExample> data, const TrainOptions& options);

// ---------------------------------------------------------------------------
// Rewards

struct RewardConfig {
  double w_vqa = 1.0 / 3.0;
  double w_hit = 1.0 / 3.0;
  double w_sim = 1.0 / 3.0;
  double beta = 0.1;

  /// Throws ValidationError unless weights are nonnegative, sum to 1 and beta > 0.
  void validate() const;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

/// Term-frequency vector over the content vocabulary.
class TermFrequencyEmbedder final : public Embedder {
 public:
  explicit TermFrequencyEmbedder(const Vocabulary& vocab) : vocab_(vocab) {}
  std::vector<double> embed(std::string_view text) const override;

 private:
  const Vocabulary& vocab_;
};

double reward_vqa(const Query& query, std::span<const std::string> doc_words, const AnswerGenerator& gen);
int reward_hit(std::span<const std::string> identifier_words, std::span<const Answer> answers);
/// Cosine similarity clamped to [0, 1]; a zero vector gives 0 and a warning.
double reward_sim(std::string_view identifier_text, std::string_view doc_text, const Embedder& embedder);

struct ScoredSample {
  std::vector<TokenId> identifier;
  /// Document the text-level rewards were computed against.
  std::string doc_id;
  double logprob = 0.0;
  double v_vqa = 0.0;
  int v_hit = 0;
  double v_sim = 0.0;
  double total = 0.0;
};

double aggregate_reward(const ScoredSample& sample, const RewardConfig& config);

/// Scores an identifier against the first document it occurs in.
ScoredSample score_identifier(const Query& query, const RetrievalResult& result, const KnowledgeBase& kb,
                              const AnswerGenerator& gen, const Embedder& embedder, const RewardConfig& config);

struct PreferenceTriplet {
  EncodedQuery query;
  ScoredSample winner;
  ScoredSample loser;
  double margin = 0.0;
};

/// Highest- vs lowest-reward sample. nullopt when totals tie within 1e-9 or
/// both sides are the same identifier.
std::optional<PreferenceTriplet> build_preference_triplet(const EncodedQuery& query,
                                                          std::span<const ScoredSample> samples);

// ---------------------------------------------------------------------------
// Direct preference optimization

struct DpoTerms {
  double policy_winner = 0.0;
  double policy_loser = 0.0;
  double reference_winner = 0.0;
  double reference_loser = 0.0;
};

/// -log sigmoid(beta * [(pw - rw) - (pl - rl)]), evaluated stably.
double dpo_objective(const DpoTerms& terms, double beta);

/// DPO loss of one triplet. When `grad` is nonempty the gradient wrt the
/// policy parameters is added into it; the reference is never touched.
double dpo_loss(const DifferentiableScorer& policy, const SequenceScorer& reference,
                const PreferenceTriplet& triplet, double beta, std::span<double> grad = {});

struct DpoOptions {
  double beta = 0.1;
  std::size_t epochs = 20;
  double lr = 0.5;
  std::uint64_t seed = 0;
};

struct DpoReport : TrainReport {
  /// Winner-minus-loser policy logprob per triplet, before and after training.
  std::vector<double> initial_margins;
  std::vector<double> final_margins;
};

/// Trains `policy` in place against a frozen snapshot of its initial state.
DpoReport train_dpo(DifferentiableScorer& policy, std::span<const PreferenceTriplet> triplets,
                    const DpoOptions& options);

// ---------------------------------------------------------------------------
// Preference collection

struct CalibrationOptions {
  SampleOptions sampling;
  RewardConfig rewards;
  std::uint64_t seed = 0;
};

struct QuerySamples {
  std::string query_id;
  std::vector<ScoredSample> samples;
};

struct PreferenceData {
  std::vector<QuerySamples> samples;
  std::vector<PreferenceTriplet> triplets;
};

/// Samples identifiers per query from `scorer`, scores them and keeps one
/// triplet per query where the rewards disagree.
PreferenceData collect_preferences(std::span<const Query> queries, const FmIndex& index, const KnowledgeBase& kb,
                                   const SequenceScorer& scorer, const AnswerGenerator& gen,
                                   const Embedder& embedder, const CalibrationOptions& options);

std::string samples_to_jsonl(const PreferenceData& data, const Vocabulary& vocab);
std::string triplets_to_jsonl(std::span<const PreferenceTriplet> triplets, const Vocabulary& vocab);
std::string training_report_to_jsonl(const TrainReport& report);

}  // namespace ause
