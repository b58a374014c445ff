#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "ause/corpus.hpp"

namespace ause {

/// log(sum(exp(x))), stable for -inf entries. Returns -inf on empty input.
double logsumexp(std::span<const double> x);
/// In-place log-softmax.
void log_softmax(std::span<double> x);

/// Autoregressive next-token model over the content vocabulary.
///
/// Slot j of a logprob vector corresponds to token id j + kFirstContentToken.
/// Implementations must return a proper distribution (logsumexp == 0) and be
/// deterministic in (query, prefix, parameters).
class SequenceScorer {
 public:
  virtual ~SequenceScorer() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual void next_logprobs(const EncodedQuery& query, std::span<const TokenId> prefix,
                             std::vector<double>& out) const = 0;

  /// log P(sequence | query) by teacher forcing.
  virtual double sequence_logprob(const EncodedQuery& query, std::span<const TokenId> sequence) const;
};

/// A scorer whose parameters are a flat vector with exact gradients.
class DifferentiableScorer : public SequenceScorer {
 public:
  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;
  std::size_t parameter_count() const { return parameters().size(); }

  /// Adds scale * d/dtheta log P(sequence | query) into `target` (same
  /// layout as parameters()) and returns log P(sequence | query). All
  /// forward passes complete before `target` is touched, so `target` may
  /// alias parameters() to take an in-place gradient step.
  virtual double accumulate_gradient(const EncodedQuery& query, std::span<const TokenId> sequence,
                                     double scale, std::span<double> target) const = 0;

  virtual std::unique_ptr<DifferentiableScorer> clone() const = 0;
};

/// Query-conditioned bigram model:
///   logit[j] = bias[j] + sum_{f in query terms} feature[f][j] + transition[prev][j]
/// where prev is the previous token or a start row for the first position.
/// Query features are the content vocabulary itself (bag of words).
class ReferenceScorer final : public DifferentiableScorer {
 public:
  /// Zero-initialised parameters: uniform next-token distribution.
  explicit ReferenceScorer(std::size_t vocab_size);
  ReferenceScorer(std::size_t vocab_size, std::vector<double> parameters);

  static std::size_t parameter_count_for(std::size_t vocab_size);

  std::size_t vocab_size() const override { return vocab_; }
  void next_logprobs(const EncodedQuery& query, std::span<const TokenId> prefix,
                     std::vector<double>& out) const override;
  double sequence_logprob(const EncodedQuery& query, std::span<const TokenId> sequence) const override;

  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  double accumulate_gradient(const EncodedQuery& query, std::span<const TokenId> sequence, double scale,
                             std::span<double> target) const override;
  std::unique_ptr<DifferentiableScorer> clone() const override;

 private:
  std::size_t slot(TokenId token) const;
  void logits(const EncodedQuery& query, std::size_t prev_row, std::span<double> out) const;

  std::size_t vocab_;
  std::vector<double> params_;
  std::size_t feature_offset_;
  std::size_t transition_offset_;
};

/// Adapts a callback (e.g. a neural model living elsewhere) to the scorer
/// contract. The callback fills a logprob vector of vocab_size entries.
class CallbackScorer final : public SequenceScorer {
 public:
  using Callback = std::function<void(const EncodedQuery&, std::span<const TokenId>, std::vector<double>&)>;
  CallbackScorer(std::size_t vocab_size, Callback callback)
      : vocab_(vocab_size), callback_(std::move(callback)) {}

  std::size_t vocab_size() const override { return vocab_; }
  void next_logprobs(const EncodedQuery& query, std::span<const TokenId> prefix,
                     std::vector<double>& out) const override;

 private:
  std::size_t vocab_;
  Callback callback_;
};

}  // namespace ause
