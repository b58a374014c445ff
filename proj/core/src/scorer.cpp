#include "ause/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ause/errors.hpp"

namespace ause {

double logsumexp(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

void log_softmax(std::span<double> x) {
  const double z = logsumexp(x);
  for (double& v : x) v -= z;
}

double SequenceScorer::sequence_logprob(const EncodedQuery& query, std::span<const TokenId> sequence) const {
  std::vector<double> lp;
  double total = 0.0;
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    next_logprobs(query, sequence.first(i), lp);
    if (Vocabulary::is_reserved(sequence[i]) || sequence[i] - kFirstContentToken >= lp.size()) {
      throw ContractError("sequence token outside the scorer vocabulary");
    }
    total += lp[sequence[i] - kFirstContentToken];
  }
  return total;
}

// ---------------------------------------------------------------------------
// ReferenceScorer
//
// Parameter layout: bias[V] | feature[V][V] | transition[V + 1][V]
// Transition row 0 is the start state; row k + 1 follows content slot k.

std::size_t ReferenceScorer::parameter_count_for(std::size_t v) { return v + v * v + (v + 1) * v; }

ReferenceScorer::ReferenceScorer(std::size_t vocab_size)
    : ReferenceScorer(vocab_size, std::vector<double>(parameter_count_for(vocab_size), 0.0)) {}

ReferenceScorer::ReferenceScorer(std::size_t vocab_size, std::vector<double> parameters)
    : vocab_(vocab_size),
      params_(std::move(parameters)),
      feature_offset_(vocab_size),
      transition_offset_(vocab_size + vocab_size * vocab_size) {
  if (vocab_ == 0) throw ContractError("scorer vocabulary must be nonempty");
  if (params_.size() != parameter_count_for(vocab_)) {
    throw ContractError("parameter vector has " + std::to_string(params_.size()) + " entries, expected " +
                        std::to_string(parameter_count_for(vocab_)));
  }
}

std::size_t ReferenceScorer::slot(TokenId token) const {
  if (Vocabulary::is_reserved(token) || token - kFirstContentToken >= vocab_) {
    throw ContractError("token id " + std::to_string(token) + " outside the scorer vocabulary");
  }
  return token - kFirstContentToken;
}

void ReferenceScorer::logits(const EncodedQuery& query, std::size_t prev_row, std::span<double> out) const {
  const double* bias = params_.data();
  std::copy(bias, bias + vocab_, out.begin());
  for (TokenId term : query.terms) {
    const double* row = params_.data() + feature_offset_ + slot(term) * vocab_;
    for (std::size_t j = 0; j < vocab_; ++j) out[j] += row[j];
  }
  const double* trans = params_.data() + transition_offset_ + prev_row * vocab_;
  for (std::size_t j = 0; j < vocab_; ++j) out[j] += trans[j];
}

void ReferenceScorer::next_logprobs(const EncodedQuery& query, std::span<const TokenId> prefix,
                                    std::vector<double>& out) const {
  out.resize(vocab_);
  const std::size_t prev_row = prefix.empty() ? 0 : slot(prefix.back()) + 1;
  logits(query, prev_row, out);
  log_softmax(out);
}

double ReferenceScorer::sequence_logprob(const EncodedQuery& query, std::span<const TokenId> sequence) const {
  std::vector<double> lp(vocab_);
  double total = 0.0;
  std::size_t prev_row = 0;
  for (TokenId t : sequence) {
    logits(query, prev_row, lp);
    log_softmax(lp);
    const std::size_t s = slot(t);
    total += lp[s];
    prev_row = s + 1;
  }
  return total;
}

double ReferenceScorer::accumulate_gradient(const EncodedQuery& query, std::span<const TokenId> sequence,
                                            double scale, std::span<double> target) const {
  if (target.size() != params_.size()) throw ContractError("gradient buffer size mismatch");
  const std::size_t steps = sequence.size();
  // Row i holds d log p(r_i) / d logits = onehot(r_i) - softmax.
  std::vector<double> delta(steps * vocab_);
  std::vector<std::size_t> prev_rows(steps);
  double total = 0.0;
  std::size_t prev_row = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    std::span<double> row(delta.data() + i * vocab_, vocab_);
    logits(query, prev_row, row);
    log_softmax(row);
    const std::size_t s = slot(sequence[i]);
    total += row[s];
    for (double& v : row) v = -std::exp(v);
    row[s] += 1.0;
    prev_rows[i] = prev_row;
    prev_row = s + 1;
  }
  if (scale == 0.0) return total;

  std::vector<double> summed(vocab_, 0.0);
  for (std::size_t i = 0; i < steps; ++i) {
    const double* row = delta.data() + i * vocab_;
    for (std::size_t j = 0; j < vocab_; ++j) summed[j] += row[j];
  }
  for (std::size_t j = 0; j < vocab_; ++j) target[j] += scale * summed[j];
  for (TokenId term : query.terms) {
    double* dst = target.data() + feature_offset_ + slot(term) * vocab_;
    for (std::size_t j = 0; j < vocab_; ++j) dst[j] += scale * summed[j];
  }
  for (std::size_t i = 0; i < steps; ++i) {
    const double* row = delta.data() + i * vocab_;
    double* dst = target.data() + transition_offset_ + prev_rows[i] * vocab_;
    for (std::size_t j = 0; j < vocab_; ++j) dst[j] += scale * row[j];
  }
  return total;
}

std::unique_ptr<DifferentiableScorer> ReferenceScorer::clone() const {
  return std::make_unique<ReferenceScorer>(*this);
}

// ---------------------------------------------------------------------------

void CallbackScorer::next_logprobs(const EncodedQuery& query, std::span<const TokenId> prefix,
                                   std::vector<double>& out) const {
  callback_(query, prefix, out);
  if (out.size() != vocab_) {
    throw ContractError("scorer callback returned " + std::to_string(out.size()) + " logprobs, expected " +
                        std::to_string(vocab_));
  }
}

}  // namespace ause
