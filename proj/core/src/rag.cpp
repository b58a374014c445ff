#include "ause/rag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "ause/answers.hpp"
#include "ause/errors.hpp"
#include "ause/random.hpp"

namespace ause {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kContextWindow = 3;

const std::unordered_set<std::string>& function_words() {
  static const std::unordered_set<std::string> kWords{
      "a",    "an",   "the",  "what",  "which", "who",  "whom", "whose", "where", "when", "why",
      "how",  "is",   "are",  "was",   "were",  "be",   "been", "do",    "does",  "did",  "of",
      "in",   "on",   "at",   "to",    "for",   "by",   "with", "from",  "this",  "that", "these",
      "those", "it",  "its",  "and",   "or",    "can",  "could", "kind", "type",  "as",   "has",
      "have", "had",  "there", "their", "they", "he",   "she",  "his",   "her",   "not",  "into"};
  return kWords;
}

std::unordered_set<std::string> question_terms(const Query& q) {
  std::unordered_set<std::string> terms;
  for (auto& w : split_words(q.question)) {
    if (!function_words().contains(w)) terms.insert(std::move(w));
  }
  for (auto& w : split_words(q.caption)) {
    if (!function_words().contains(w)) terms.insert(std::move(w));
  }
  return terms;
}

double dot(const ReferenceAnswerGenerator::Weights& w, const ReferenceAnswerGenerator::Weights& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f[i];
  return s;
}

}  // namespace

std::string best_answer(const std::vector<AnswerCandidate>& candidates) {
  if (candidates.empty()) return {};
  const auto* best = &candidates.front();
  for (const auto& c : candidates) {
    if (c.logprob > best->logprob || (c.logprob == best->logprob && c.answer < best->answer)) best = &c;
  }
  return best->answer;
}

// ---------------------------------------------------------------------------
// ReferenceAnswerGenerator

ReferenceAnswerGenerator ReferenceAnswerGenerator::with_prior() {
  // near-context, adjacency, overlap with question, length, function words
  return ReferenceAnswerGenerator(Weights{1.5, 2.0, -4.0, -1.0, -3.0});
}

std::vector<ReferenceAnswerGenerator::Span> ReferenceAnswerGenerator::spans(
    const Query& query, std::span<const std::string> words) const {
  std::vector<Span> out;
  if (words.empty()) return out;
  const auto terms = question_terms(query);
  std::vector<char> is_term(words.size());
  bool any = false;
  for (std::size_t i = 0; i < words.size(); ++i) {
    is_term[i] = terms.contains(words[i]) ? 1 : 0;
    any = any || is_term[i];
  }
  if (!any) return out;

  const std::size_t n = words.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t len = 1; len <= kMaxSpan && i + len <= n; ++len) {
      std::string text;
      for (std::size_t k = i; k < i + len; ++k) {
        if (!text.empty()) text.push_back(' ');
        text += words[k];
      }
      auto answer = normalize_answer(text);
      if (answer.empty()) continue;

      std::unordered_set<std::string> near;
      const std::size_t left = i >= kContextWindow ? i - kContextWindow : 0;
      for (std::size_t k = left; k < i; ++k) {
        if (is_term[k]) near.insert(words[k]);
      }
      for (std::size_t k = i + len; k < std::min(n, i + len + kContextWindow); ++k) {
        if (is_term[k]) near.insert(words[k]);
      }
      const bool adjacent = (i > 0 && is_term[i - 1]) || (i + len < n && is_term[i + len]);
      std::size_t overlap = 0;
      std::size_t function = 0;
      for (std::size_t k = i; k < i + len; ++k) {
        overlap += is_term[k] ? 1 : 0;
        function += function_words().contains(words[k]) ? 1 : 0;
      }
      Span s;
      s.begin = i;
      s.length = len;
      s.answer = std::move(answer);
      s.features = {static_cast<double>(std::min<std::size_t>(near.size(), kContextWindow)) / kContextWindow,
                    adjacent ? 1.0 : 0.0,
                    static_cast<double>(overlap) / static_cast<double>(len),
                    static_cast<double>(len - 1) / static_cast<double>(kMaxSpan - 1),
                    static_cast<double>(function) / static_cast<double>(len)};
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<AnswerCandidate> ReferenceAnswerGenerator::candidates(const Query& query,
                                                                  std::span<const std::string> words) const {
  const auto sp = spans(query, words);
  if (sp.empty()) return {};
  std::vector<double> logits(sp.size());
  for (std::size_t i = 0; i < sp.size(); ++i) logits[i] = dot(weights_, sp[i].features);
  log_softmax(logits);

  std::unordered_map<std::string, std::vector<double>> grouped;
  for (std::size_t i = 0; i < sp.size(); ++i) grouped[sp[i].answer].push_back(logits[i]);
  std::vector<AnswerCandidate> out;
  out.reserve(grouped.size());
  for (auto& [answer, lps] : grouped) out.push_back({answer, logsumexp(lps)});
  std::sort(out.begin(), out.end(), [](const AnswerCandidate& a, const AnswerCandidate& b) {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    return a.answer < b.answer;
  });
  return out;
}

std::optional<double> ReferenceAnswerGenerator::loss(const Query& query, std::span<const std::string> words,
                                                     std::string_view gold, Weights* grad) const {
  const auto sp = spans(query, words);
  const auto target = normalize_answer(gold);
  std::vector<double> logits(sp.size());
  for (std::size_t i = 0; i < sp.size(); ++i) logits[i] = dot(weights_, sp[i].features);
  log_softmax(logits);

  std::vector<double> gold_lps;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    if (sp[i].answer == target) gold_lps.push_back(logits[i]);
  }
  if (gold_lps.empty()) return std::nullopt;
  const double gold_lp = logsumexp(gold_lps);

  if (grad) {
    // d(-log P(G))/dw = E_p[f] - E_{p | G}[f]
    for (std::size_t i = 0; i < sp.size(); ++i) {
      const double p = std::exp(logits[i]);
      const double q = sp[i].answer == target ? std::exp(logits[i] - gold_lp) : 0.0;
      for (std::size_t k = 0; k < kFeatureCount; ++k) (*grad)[k] += (p - q) * sp[i].features[k];
    }
  }
  return -gold_lp;
}

std::optional<std::string> gold_answer_in_document(const ReferenceAnswerGenerator& gen, const Query& query,
                                                   std::span<const std::string> doc_words) {
  std::unordered_set<std::string> producible;
  for (auto& s : gen.spans(query, doc_words)) producible.insert(std::move(s.answer));
  std::vector<const Answer*> order;
  for (const auto& a : query.answers) order.push_back(&a);
  std::stable_sort(order.begin(), order.end(), [](const Answer* a, const Answer* b) { return a->count > b->count; });
  for (const auto* a : order) {
    auto norm = normalize_answer(a->text);
    if (producible.contains(norm)) return norm;
  }
  return std::nullopt;
}

std::vector<double> train_answer_generator(ReferenceAnswerGenerator& gen, std::span<const GeneratorExample> data,
                                           std::size_t epochs, double lr, std::uint64_t seed) {
  auto mean_loss = [&] {
    double total = 0.0;
    std::size_t used = 0;
    for (const auto& ex : data) {
      if (auto l = gen.loss(ex.query, ex.doc_words, ex.gold)) {
        total += *l;
        ++used;
      }
    }
    return used ? total / static_cast<double>(used) : 0.0;
  };

  std::vector<double> curve{mean_loss()};
  Rng rng = Rng::substream(seed, "generator-shuffle");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (auto i : order) {
      ReferenceAnswerGenerator::Weights grad{};
      auto l = gen.loss(data[i].query, data[i].doc_words, data[i].gold, &grad);
      if (!l) continue;
      if (!std::isfinite(*l)) throw TrainingError("answer generator loss is not finite");
      for (std::size_t k = 0; k < grad.size(); ++k) gen.weights()[k] -= lr * grad[k];
    }
    curve.push_back(mean_loss());
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Joint and marginal ranking

std::vector<DocumentAnswers> answer_documents(const Query& query, const RankedDocuments& ranked,
                                              const AnswerGenerator& gen, const KnowledgeBase& kb) {
  if (ranked.empty()) throw ValidationError("no retrieved documents to answer from");
  std::vector<DocumentAnswers> out;
  out.reserve(ranked.size());
  for (const auto& d : ranked) {
    out.push_back({d.doc_id, d.logprob, gen.candidates(query, kb.words(d.doc_id))});
  }
  return out;
}

Prediction joint_prediction(std::span<const DocumentAnswers> per_doc) {
  if (per_doc.empty()) throw ValidationError("no retrieved documents to answer from");
  std::optional<Prediction> best;
  for (const auto& d : per_doc) {
    for (const auto& c : d.candidates) {
      Prediction p{c.answer, d.doc_id, d.retrieval_logprob, c.logprob, d.retrieval_logprob + c.logprob, false};
      if (!best) {
        best = std::move(p);
        continue;
      }
      bool take = false;
      if (p.joint_logprob != best->joint_logprob) {
        take = p.joint_logprob > best->joint_logprob;
      } else if (p.retrieval_logprob != best->retrieval_logprob) {
        take = p.retrieval_logprob > best->retrieval_logprob;
      } else {
        take = p.answer < best->answer;
      }
      if (take) best = std::move(p);
    }
  }
  if (!best) {
    const auto& d = per_doc.front();
    return Prediction{"", d.doc_id, d.retrieval_logprob, kNegInf, kNegInf, true};
  }
  return *best;
}

std::vector<MarginalAnswer> marginal_distribution(std::span<const DocumentAnswers> per_doc) {
  if (per_doc.empty()) throw ValidationError("no retrieved documents to answer from");
  std::map<std::string, double> scores;
  for (const auto& d : per_doc) {
    for (const auto& c : d.candidates) scores[c.answer] += std::exp(d.retrieval_logprob + c.logprob);
  }
  std::vector<MarginalAnswer> out;
  out.reserve(scores.size());
  for (const auto& [a, s] : scores) out.push_back({a, s});
  std::stable_sort(out.begin(), out.end(),
                   [](const MarginalAnswer& a, const MarginalAnswer& b) { return a.score > b.score; });
  return out;
}

Prediction answer_joint(const Query& query, const RankedDocuments& ranked, const AnswerGenerator& gen,
                        const KnowledgeBase& kb) {
  return joint_prediction(answer_documents(query, ranked, gen, kb));
}

std::vector<MarginalAnswer> answer_marginal(const Query& query, const RankedDocuments& ranked,
                                            const AnswerGenerator& gen, const KnowledgeBase& kb) {
  return marginal_distribution(answer_documents(query, ranked, gen, kb));
}

// ---------------------------------------------------------------------------
// Metrics

int pr_recall_at_k(const RankedDocuments& ranked, std::span<const Answer> answers, std::size_t k,
                   const KnowledgeBase& kb) {
  if (k == 0) throw ValidationError("K must be at least 1");
  const std::size_t n = std::min(k, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (contains_any_answer(kb.words(ranked[i].doc_id), answers)) return 1;
  }
  return 0;
}

std::size_t multiple_choice(std::span<const std::string> choices, std::span<const MarginalAnswer> marginal) {
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    const auto norm = normalize_answer(choices[i]);
    double score = 0.0;
    for (const auto& m : marginal) {
      if (m.answer == norm) {
        score = m.score;
        break;
      }
    }
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

EvalReport evaluate(std::span<const Query> queries, const FmIndex& index, const KnowledgeBase& kb,
                    const SequenceScorer& scorer, const AnswerGenerator& gen, const EvalOptions& options) {
  if (queries.empty()) throw ValidationError("evaluation needs at least one query");
  if (options.recall_ks.empty()) throw ValidationError("evaluation needs at least one K");
  const std::size_t max_k = std::max(options.top_k, *std::max_element(options.recall_ks.begin(), options.recall_ks.end()));

  EvalReport report;
  std::size_t mc_total = 0;
  std::size_t mc_right = 0;
  for (const auto& q : queries) {
    try {
      EvalRow row;
      row.query_id = q.query_id;
      const auto encoded = encode_query(q, index.vocabulary());
      BeamOptions beam;
      beam.beam_width = options.beam_width;
      beam.max_len = options.max_len;
      const auto results = constrained_beam_search(index, scorer, encoded, beam);
      for (const auto& r : results) row.identifiers.push_back(detokenize(r.identifier, index.vocabulary()));

      RankedDocuments ranked;
      if (!results.empty()) ranked = map_to_documents(results, max_k);
      for (const auto& d : ranked) row.topk_doc_ids.push_back(d.doc_id);
      for (auto k : options.recall_ks) row.prr[k] = pr_recall_at_k(ranked, q.answers, k, kb);

      if (!ranked.empty()) {
        RankedDocuments answer_docs(ranked.begin(),
                                    ranked.begin() + static_cast<std::ptrdiff_t>(std::min(options.top_k, ranked.size())));
        const auto per_doc = answer_documents(q, answer_docs, gen, kb);
        row.prediction = joint_prediction(per_doc);
        const auto marginal = marginal_distribution(per_doc);
        if (!marginal.empty()) row.marginal_prediction = marginal.front().answer;
        if (!q.choices.empty()) row.mc_choice = multiple_choice(q.choices, marginal);
      } else {
        row.prediction.abstained = true;
        row.prediction.generation_logprob = row.prediction.joint_logprob = kNegInf;
        if (!q.choices.empty()) row.mc_choice = 0;
      }
      row.vqa_score = vqa_score(row.prediction.answer, q.answers);
      row.marginal_vqa_score = vqa_score(row.marginal_prediction, q.answers);
      if (row.mc_choice && q.correct_choice) {
        row.mc_correct = static_cast<int>(*row.mc_choice) == *q.correct_choice;
        ++mc_total;
        mc_right += *row.mc_correct ? 1 : 0;
      }
      report.rows.push_back(std::move(row));
    } catch (const Error& e) {
      throw Error("query " + q.query_id + ": " + e.what());
    }
  }

  const double n = static_cast<double>(report.rows.size());
  for (auto k : options.recall_ks) {
    double s = 0.0;
    for (const auto& r : report.rows) s += r.prr.at(k);
    report.prr[k] = s / n;
  }
  for (const auto& r : report.rows) {
    report.mean_vqa_score += r.vqa_score / n;
    report.mean_marginal_vqa_score += r.marginal_vqa_score / n;
  }
  if (mc_total > 0) report.mc_accuracy = static_cast<double>(mc_right) / static_cast<double>(mc_total);
  return report;
}

std::string to_jsonl(const EvalReport& report, std::span<const std::size_t> recall_ks) {
  using nlohmann::ordered_json;
  auto finite_or_null = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };
  std::string out;
  for (const auto& r : report.rows) {
    ordered_json j;
    j["query_id"] = r.query_id;
    j["topk_doc_ids"] = r.topk_doc_ids;
    j["identifiers"] = r.identifiers;
    j["prediction"] = r.prediction.answer;
    j["vqa_score"] = r.vqa_score;
    for (auto k : recall_ks) j["prr@" + std::to_string(k)] = r.prr.at(k);
    j["prediction_doc"] = r.prediction.abstained && r.topk_doc_ids.empty() ? ordered_json(nullptr)
                                                                           : ordered_json(r.prediction.doc_id);
    j["joint_logprob"] = finite_or_null(r.prediction.joint_logprob);
    j["prediction_marginal"] = r.marginal_prediction;
    j["vqa_score_marginal"] = r.marginal_vqa_score;
    if (r.mc_choice) j["mc_choice"] = *r.mc_choice;
    if (r.mc_correct) j["mc_correct"] = *r.mc_correct;
    out += j.dump();
    out.push_back('\n');
  }
  ordered_json s;
  s["summary"] = true;
  s["queries"] = report.rows.size();
  for (auto k : recall_ks) s["prr@" + std::to_string(k)] = report.prr.at(k);
  s["vqa_score"] = report.mean_vqa_score;
  s["vqa_score_marginal"] = report.mean_marginal_vqa_score;
  if (report.mc_accuracy) s["mc_accuracy"] = *report.mc_accuracy;
  out += s.dump();
  out.push_back('\n');
  return out;
}

}  // namespace ause
