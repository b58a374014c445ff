#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ause/corpus.hpp"
#include "ause/decoder.hpp"
#include "ause/fm_index.hpp"
#include "ause/scorer.hpp"

namespace ause {

struct AnswerCandidate {
  /// Normalized answer string.
  std::string answer;
  double logprob = 0.0;
};

/// Produces scored answers for a query read against one document.
/// Candidates are distinct normalized strings, logprob descending, with
/// logsumexp <= 0. An empty list means the generator abstains.
class AnswerGenerator {
 public:
  virtual ~AnswerGenerator() = default;
  virtual std::vector<AnswerCandidate> candidates(const Query& query,
                                                  std::span<const std::string> doc_words) const = 0;
};

/// Argmax answer, or "" when there are no candidates.
std::string best_answer(const std::vector<AnswerCandidate>& candidates);

/// Extractive generator: every document span of up to four words is a
/// candidate, scored by a linear model over span/question overlap features
/// and normalized by softmax over all spans. Spans with the same normalized
/// text are merged. Abstains when the document shares no content word with
/// the question and caption.
class ReferenceAnswerGenerator final : public AnswerGenerator {
 public:
  static constexpr std::size_t kFeatureCount = 5;
  static constexpr std::size_t kMaxSpan = 4;
  using Weights = std::array<double, kFeatureCount>;

  struct Span {
    std::size_t begin = 0;
    std::size_t length = 0;
    std::string answer;
    Weights features{};
  };

  /// Zero weights: uniform over spans.
  ReferenceAnswerGenerator() = default;
  explicit ReferenceAnswerGenerator(const Weights& weights) : weights_(weights) {}
  /// Hand-set weights favouring short spans next to question words that do
  /// not repeat them. Never fit to any dataset.
  static ReferenceAnswerGenerator with_prior();

  std::vector<AnswerCandidate> candidates(const Query& query,
                                          std::span<const std::string> doc_words) const override;

  /// Candidate spans in document order; empty when the generator abstains.
  std::vector<Span> spans(const Query& query, std::span<const std::string> doc_words) const;

  /// Teacher-forcing loss -log P(gold | query, doc), summing over every
  /// span whose normalized text equals `gold`. Adds the gradient into
  /// `grad` when given. nullopt when no span produces `gold`.
  std::optional<double> loss(const Query& query, std::span<const std::string> doc_words, std::string_view gold,
                             Weights* grad = nullptr) const;

  const Weights& weights() const noexcept { return weights_; }
  Weights& weights() noexcept { return weights_; }

 private:
  Weights weights_{};
};

struct GeneratorExample {
  Query query;
  std::vector<std::string> doc_words;
  std::string gold;
};

/// Highest-count answer of the query that some span of the document can
/// produce, or nullopt.
std::optional<std::string> gold_answer_in_document(const ReferenceAnswerGenerator& gen, const Query& query,
                                                   std::span<const std::string> doc_words);

/// Plain gradient descent on the summed teacher-forcing loss; returns the
/// mean loss per epoch (first entry is before any update).
std::vector<double> train_answer_generator(ReferenceAnswerGenerator& gen, std::span<const GeneratorExample> data,
                                           std::size_t epochs, double lr, std::uint64_t seed);

/// Generator output for one retrieved document.
struct DocumentAnswers {
  std::string doc_id;
  double retrieval_logprob = 0.0;
  std::vector<AnswerCandidate> candidates;
};

struct Prediction {
  std::string answer;
  std::string doc_id;
  double retrieval_logprob = 0.0;
  double generation_logprob = 0.0;
  /// retrieval_logprob + generation_logprob.
  double joint_logprob = 0.0;
  bool abstained = false;
};

struct MarginalAnswer {
  std::string answer;
  /// sum over documents of P(R_i | X) * P(answer | X, D_i).
  double score = 0.0;
};

std::vector<DocumentAnswers> answer_documents(const Query& query, const RankedDocuments& ranked,
                                              const AnswerGenerator& gen, const KnowledgeBase& kb);

/// argmax over (answer, document) of retrieval + generation logprob. Ties go
/// to the higher retrieval logprob, then the lexicographically smaller
/// answer. All-abstain input yields an abstained prediction on the first document.
Prediction joint_prediction(std::span<const DocumentAnswers> per_doc);
/// Per-answer marginal over documents, score descending (ties by answer).
std::vector<MarginalAnswer> marginal_distribution(std::span<const DocumentAnswers> per_doc);

Prediction answer_joint(const Query& query, const RankedDocuments& ranked, const AnswerGenerator& gen,
                        const KnowledgeBase& kb);
std::vector<MarginalAnswer> answer_marginal(const Query& query, const RankedDocuments& ranked,
                                            const AnswerGenerator& gen, const KnowledgeBase& kb);

/// 1 iff one of the first k documents contains a gold answer.
int pr_recall_at_k(const RankedDocuments& ranked, std::span<const Answer> answers, std::size_t k,
                   const KnowledgeBase& kb);

/// Index of the choice with the largest marginal score; ties go to the lowest index.
std::size_t multiple_choice(std::span<const std::string> choices, std::span<const MarginalAnswer> marginal);

struct EvalOptions {
  std::size_t beam_width = 10;
  std::size_t max_len = 10;
  /// Documents passed to the answer generator.
  std::size_t top_k = 5;
  std::vector<std::size_t> recall_ks{5, 10};
};

struct EvalRow {
  std::string query_id;
  std::vector<std::string> topk_doc_ids;
  std::vector<std::string> identifiers;
  Prediction prediction;
  double vqa_score = 0.0;
  std::map<std::size_t, int> prr;
  std::string marginal_prediction;
  double marginal_vqa_score = 0.0;
  std::optional<std::size_t> mc_choice;
  std::optional<bool> mc_correct;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::map<std::size_t, double> prr;
  double mean_vqa_score = 0.0;
  double mean_marginal_vqa_score = 0.0;
  /// Only set when some query carries choices with a correct index.
  std::optional<double> mc_accuracy;
};

EvalReport evaluate(std::span<const Query> queries, const FmIndex& index, const KnowledgeBase& kb,
                    const SequenceScorer& scorer, const AnswerGenerator& gen, const EvalOptions& options = {});

/// One record per query followed by a summary record, fixed field order.
std::string to_jsonl(const EvalReport& report, std::span<const std::size_t> recall_ks);

}  // namespace ause
