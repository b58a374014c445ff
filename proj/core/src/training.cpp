#include "ause/training.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "ause/answers.hpp"
#include "ause/errors.hpp"
#include "ause/random.hpp"

namespace ause {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x))
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

std::size_t window_hits(std::span<const TokenId> window, const Vocabulary& vocab,
                        const std::unordered_set<std::string>& keywords) {
  std::unordered_set<std::string> seen;
  for (TokenId t : window) {
    const auto& w = vocab.word(t);
    if (keywords.contains(w)) seen.insert(w);
  }
  return seen.size();
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw TrainingError(std::string(what) + " is not finite");
}

}  // namespace

// ---------------------------------------------------------------------------
// Targets and SFT

TargetIdentifier extract_target_identifier(const TokenizedDocument& doc, const Query& query,
                                           std::size_t identifier_len, const FmIndex& index) {
  if (doc.tokens.empty()) throw ValidationError("document \"" + doc.doc_id + "\" has no tokens");
  if (identifier_len == 0) throw ValidationError("identifier_len must be at least 1");

  std::unordered_set<std::string> keywords;
  for (const auto& a : query.answers) {
    for (auto& w : normalize_answer_words(a.text)) keywords.insert(std::move(w));
  }
  const auto& vocab = index.vocabulary();
  const std::span<const TokenId> tokens(doc.tokens);
  const std::size_t n = tokens.size();

  const std::size_t base_len = std::min(identifier_len, n);
  const std::size_t max_len = std::min(2 * identifier_len, n);
  for (std::size_t len = base_len; len <= max_len; ++len) {
    std::optional<TargetIdentifier> best;
    for (std::size_t i = 0; i + len <= n; ++i) {
      auto window = tokens.subspan(i, len);
      const std::size_t hits = window_hits(window, vocab, keywords);
      if (best && hits <= best->answer_hits) continue;
      auto owner = index.unique_document(window);
      if (!owner || *owner != doc.doc_id) continue;
      best = TargetIdentifier{doc.doc_id, {window.begin(), window.end()}, hits, i, true};
    }
    if (best) return *best;
  }

  TargetIdentifier fallback{doc.doc_id, {}, 0, 0, false};
  bool have = false;
  for (std::size_t i = 0; i + base_len <= n; ++i) {
    auto window = tokens.subspan(i, base_len);
    const std::size_t hits = window_hits(window, vocab, keywords);
    if (!have || hits > fallback.answer_hits) {
      fallback.tokens.assign(window.begin(), window.end());
      fallback.answer_hits = hits;
      fallback.offset = i;
      have = true;
    }
  }
  spdlog::warn("no unique identifier for document {} (query {})", doc.doc_id, query.query_id);
  return fallback;
}

double sft_loss(const DifferentiableScorer& scorer, const EncodedQuery& query, std::span<const TokenId> target,
                std::span<double> grad) {
  if (grad.empty()) return -scorer.sequence_logprob(query, target);
  return -scorer.accumulate_gradient(query, target, -1.0, grad);
}

TrainReport train_sft(DifferentiableScorer& scorer, std::span<const SftExample> data, const TrainOptions& options) {
  if (!(options.lr >= 0.0)) throw ValidationError("learning rate must be nonnegative");
  auto mean_loss = [&] {
    double s = 0.0;
    for (const auto& ex : data) s += sft_loss(scorer, ex.query, ex.target);
    return data.empty() ? 0.0 : s / static_cast<double>(data.size());
  };

  TrainReport report;
  report.epoch_mean_loss.push_back(mean_loss());
  check_finite(report.epoch_mean_loss.back(), "initial SFT loss");

  Rng rng = Rng::substream(options.seed, "shuffle/sft");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    rng.shuffle(order);
    for (auto i : order) {
      const auto& ex = data[i];
      // Ascent on log P == descent on the loss; forward passes finish before
      // the parameters are written.
      const double lp = scorer.accumulate_gradient(ex.query, ex.target, options.lr, scorer.parameters());
      if (!std::isfinite(lp)) {
        throw TrainingError("SFT loss became non-finite at step " + std::to_string(step) + " (query " +
                            ex.query.query_id + ")");
      }
      report.steps.push_back({step++, epoch, -lp, 0.0});
    }
    report.epoch_mean_loss.push_back(mean_loss());
    check_finite(report.epoch_mean_loss.back(), "SFT epoch loss");
    spdlog::debug("sft epoch {} mean loss {:.6f}", epoch, report.epoch_mean_loss.back());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Rewards

void RewardConfig::validate() const {
  if (w_vqa < 0 || w_hit < 0 || w_sim < 0) throw ValidationError("reward weights must be nonnegative");
  if (std::abs(w_vqa + w_hit + w_sim - 1.0) > 1e-9) throw ValidationError("reward weights must sum to 1");
  if (!(beta > 0.0)) throw ValidationError("beta must be positive");
}

std::vector<double> TermFrequencyEmbedder::embed(std::string_view text) const {
  std::vector<double> v(vocab_.content_size(), 0.0);
  for (TokenId t : tokenize(text, vocab_)) v[t - kFirstContentToken] += 1.0;
  return v;
}

double reward_vqa(const Query& query, std::span<const std::string> doc_words, const AnswerGenerator& gen) {
  return vqa_score(best_answer(gen.candidates(query, doc_words)), query.answers);
}

int reward_hit(std::span<const std::string> identifier_words, std::span<const Answer> answers) {
  return contains_any_answer(identifier_words, answers) ? 1 : 0;
}

double reward_sim(std::string_view identifier_text, std::string_view doc_text, const Embedder& embedder) {
  const auto a = embedder.embed(identifier_text);
  const auto b = embedder.embed(doc_text);
  if (a.size() != b.size()) throw ContractError("embedder returned vectors of different dimension");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    spdlog::warn("zero embedding in similarity reward");
    return 0.0;
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

double aggregate_reward(const ScoredSample& s, const RewardConfig& c) {
  return c.w_vqa * s.v_vqa + c.w_hit * static_cast<double>(s.v_hit) + c.w_sim * s.v_sim;
}

ScoredSample score_identifier(const Query& query, const RetrievalResult& result, const KnowledgeBase& kb,
                              const AnswerGenerator& gen, const Embedder& embedder, const RewardConfig& config) {
  if (result.doc_ids.empty()) throw ContractError("identifier maps to no document");
  ScoredSample s;
  s.identifier = result.identifier;
  s.doc_id = result.doc_ids.front();
  s.logprob = result.logprob;

  const auto& vocab = kb.vocabulary();
  std::vector<std::string> id_words;
  for (TokenId t : result.identifier) id_words.push_back(vocab.word(t));
  const auto& doc_words = kb.words(s.doc_id);
  const auto ordinal = *kb.ordinal(s.doc_id);

  s.v_vqa = reward_vqa(query, doc_words, gen);
  s.v_hit = reward_hit(id_words, query.answers);
  s.v_sim = reward_sim(detokenize(result.identifier, vocab), detokenize(kb.tokens(ordinal).tokens, vocab), embedder);
  s.total = aggregate_reward(s, config);
  return s;
}

std::optional<PreferenceTriplet> build_preference_triplet(const EncodedQuery& query,
                                                          std::span<const ScoredSample> samples) {
  if (samples.size() < 2) return std::nullopt;
  std::size_t hi = 0, lo = 0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].total > samples[hi].total) hi = i;
    if (samples[i].total < samples[lo].total) lo = i;
  }
  const double margin = samples[hi].total - samples[lo].total;
  if (margin <= 1e-9) return std::nullopt;
  if (samples[hi].identifier == samples[lo].identifier) return std::nullopt;
  return PreferenceTriplet{query, samples[hi], samples[lo], margin};
}

// ---------------------------------------------------------------------------
// DPO

double dpo_objective(const DpoTerms& t, double beta) {
  const double z = beta * ((t.policy_winner - t.reference_winner) - (t.policy_loser - t.reference_loser));
  return softplus(-z);
}

double dpo_loss(const DifferentiableScorer& policy, const SequenceScorer& reference,
                const PreferenceTriplet& triplet, double beta, std::span<double> grad) {
  if (!(beta > 0.0)) throw ValidationError("beta must be positive");
  DpoTerms t;
  t.policy_winner = policy.sequence_logprob(triplet.query, triplet.winner.identifier);
  t.policy_loser = policy.sequence_logprob(triplet.query, triplet.loser.identifier);
  t.reference_winner = reference.sequence_logprob(triplet.query, triplet.winner.identifier);
  t.reference_loser = reference.sequence_logprob(triplet.query, triplet.loser.identifier);
  for (double v : {t.policy_winner, t.policy_loser, t.reference_winner, t.reference_loser}) {
    if (!std::isfinite(v)) throw TrainingError("non-finite sequence logprob in DPO loss");
  }
  const double z = beta * ((t.policy_winner - t.reference_winner) - (t.policy_loser - t.reference_loser));
  if (!grad.empty()) {
    // dL/dz = -sigmoid(-z); dz/dtheta = beta * (grad log pi(R+) - grad log pi(R-))
    const double c = -sigmoid(-z) * beta;
    policy.accumulate_gradient(triplet.query, triplet.winner.identifier, c, grad);
    policy.accumulate_gradient(triplet.query, triplet.loser.identifier, -c, grad);
  }
  return softplus(-z);
}

DpoReport train_dpo(DifferentiableScorer& policy, std::span<const PreferenceTriplet> triplets,
                    const DpoOptions& options) {
  if (!(options.lr >= 0.0)) throw ValidationError("learning rate must be nonnegative");
  if (!(options.beta > 0.0)) throw ValidationError("beta must be positive");
  const auto reference = policy.clone();

  auto margin_of = [&](const PreferenceTriplet& t) {
    return policy.sequence_logprob(t.query, t.winner.identifier) - policy.sequence_logprob(t.query, t.loser.identifier);
  };
  auto mean_loss = [&] {
    double s = 0.0;
    for (const auto& t : triplets) s += dpo_loss(policy, *reference, t, options.beta);
    return triplets.empty() ? 0.0 : s / static_cast<double>(triplets.size());
  };

  DpoReport report;
  for (const auto& t : triplets) report.initial_margins.push_back(margin_of(t));
  report.epoch_mean_loss.push_back(mean_loss());

  Rng rng = Rng::substream(options.seed, "shuffle/dpo");
  std::vector<std::size_t> order(triplets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> grad(policy.parameter_count());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    rng.shuffle(order);
    for (auto i : order) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = dpo_loss(policy, *reference, triplets[i], options.beta, grad);
      if (!std::isfinite(loss)) {
        throw TrainingError("DPO loss became non-finite at step " + std::to_string(step));
      }
      const double margin = margin_of(triplets[i]);
      auto params = policy.parameters();
      for (std::size_t k = 0; k < params.size(); ++k) params[k] -= options.lr * grad[k];
      report.steps.push_back({step++, epoch, loss, margin});
    }
    report.epoch_mean_loss.push_back(mean_loss());
    check_finite(report.epoch_mean_loss.back(), "DPO epoch loss");
    spdlog::debug("dpo epoch {} mean loss {:.6f}", epoch, report.epoch_mean_loss.back());
  }
  for (const auto& t : triplets) report.final_margins.push_back(margin_of(t));
  return report;
}

// ---------------------------------------------------------------------------
// Preference collection

PreferenceData collect_preferences(std::span<const Query> queries, const FmIndex& index, const KnowledgeBase& kb,
                                   const SequenceScorer& scorer, const AnswerGenerator& gen,
                                   const Embedder& embedder, const CalibrationOptions& options) {
  options.rewards.validate();
  PreferenceData data;
  for (const auto& q : queries) {
    const auto encoded = encode_query(q, index.vocabulary());
    const auto drawn = sample_identifiers(index, scorer, encoded, options.sampling, options.seed);
    QuerySamples qs{q.query_id, {}};
    for (const auto& r : drawn) qs.samples.push_back(score_identifier(q, r, kb, gen, embedder, options.rewards));
    if (auto t = build_preference_triplet(encoded, qs.samples)) data.triplets.push_back(std::move(*t));
    data.samples.push_back(std::move(qs));
  }
  return data;
}

namespace {

nlohmann::ordered_json words_of(const std::vector<TokenId>& tokens, const Vocabulary& vocab) {
  auto arr = nlohmann::ordered_json::array();
  for (TokenId t : tokens) arr.push_back(vocab.word(t));
  return arr;
}

}  // namespace

std::string samples_to_jsonl(const PreferenceData& data, const Vocabulary& vocab) {
  std::string out;
  for (const auto& qs : data.samples) {
    for (const auto& s : qs.samples) {
      nlohmann::ordered_json j;
      j["query_id"] = qs.query_id;
      j["tokens"] = words_of(s.identifier, vocab);
      j["doc_id"] = s.doc_id;
      j["logprob"] = s.logprob;
      j["v_vqa"] = s.v_vqa;
      j["v_hit"] = s.v_hit;
      j["v_sim"] = s.v_sim;
      j["total"] = s.total;
      out += j.dump();
      out.push_back('\n');
    }
  }
  return out;
}

std::string triplets_to_jsonl(std::span<const PreferenceTriplet> triplets, const Vocabulary& vocab) {
  std::string out;
  for (const auto& t : triplets) {
    nlohmann::ordered_json j;
    j["query_id"] = t.query.query_id;
    j["winner_tokens"] = words_of(t.winner.identifier, vocab);
    j["loser_tokens"] = words_of(t.loser.identifier, vocab);
    j["v_vqa+"] = t.winner.v_vqa;
    j["v_hit+"] = t.winner.v_hit;
    j["v_sim+"] = t.winner.v_sim;
    j["total+"] = t.winner.total;
    j["v_vqa-"] = t.loser.v_vqa;
    j["v_hit-"] = t.loser.v_hit;
    j["v_sim-"] = t.loser.v_sim;
    j["total-"] = t.loser.total;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::string training_report_to_jsonl(const TrainReport& report) {
  std::string out;
  for (const auto& s : report.steps) {
    nlohmann::ordered_json j;
    j["step"] = s.step;
    j["epoch"] = s.epoch;
    j["loss"] = s.loss;
    j["margin"] = s.margin;
    out += j.dump();
    out.push_back('\n');
  }
  for (std::size_t e = 0; e < report.epoch_mean_loss.size(); ++e) {
    nlohmann::ordered_json j;
    j["epoch_summary"] = e;
    j["mean_loss"] = report.epoch_mean_loss[e];
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace ause
