#include "ause/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "ause/errors.hpp"

namespace ause {
namespace {

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c) != 0; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Calls fn(line, line_number) for every non-blank line.
template <typename Fn>
void for_each_record(std::string_view content, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    ++line_no;
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    if (std::all_of(line.begin(), line.end(),
                    [](char c) { return is_ascii_space(static_cast<unsigned char>(c)); })) {
      continue;
    }
    fn(line, line_no);
  }
}

nlohmann::json parse_line(std::string_view line, std::size_t line_no) {
  try {
    auto j = nlohmann::json::parse(line);
    if (!j.is_object()) throw ParseError("record is not an object", line_no);
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
  }
}

std::string string_field(const nlohmann::json& j, const char* key, std::size_t line_no,
                         bool required = true) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) throw ParseError(std::string("missing field \"") + key + "\"", line_no);
    return {};
  }
  if (!it->is_string()) throw ParseError(std::string("field \"") + key + "\" is not a string", line_no);
  return it->get<std::string>();
}

const std::unordered_set<std::string>& articles() {
  static const std::unordered_set<std::string> kArticles{"a", "an", "the"};
  return kArticles;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t end = i;
    while (start < end && is_ascii_punct(static_cast<unsigned char>(text[start]))) ++start;
    while (end > start && is_ascii_punct(static_cast<unsigned char>(text[end - 1]))) --end;
    if (start == end) continue;
    std::string word(text.substr(start, end - start));
    for (auto& c : word) {
      auto u = static_cast<unsigned char>(c);
      if (u < 128) c = static_cast<char>(std::tolower(u));
    }
    words.push_back(std::move(word));
  }
  return words;
}

std::vector<std::string> normalize_answer_words(std::string_view text) {
  auto words = split_words(text);
  std::erase_if(words, [](const std::string& w) { return articles().contains(w); });
  return words;
}

std::string normalize_answer(std::string_view text) {
  std::string out;
  for (const auto& w : normalize_answer_words(text)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  Vocabulary v;
  v.tokens_ = std::move(words);
  v.ids_.reserve(v.tokens_.size());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    v.ids_.emplace(v.tokens_[i], static_cast<TokenId>(i + kFirstContentToken));
  }
  return v;
}

std::optional<TokenId> Vocabulary::find(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::vector<TokenId>> Vocabulary::find_all(std::span<const std::string> words) const {
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) {
    auto id = find(w);
    if (!id) return std::nullopt;
    ids.push_back(*id);
  }
  return ids;
}

const std::string& Vocabulary::word(TokenId id) const {
  static const std::string kEnd = "<end>";
  static const std::string kSep = "<sep>";
  if (id == kTextEnd) return kEnd;
  if (id == kDocSep) return kSep;
  std::size_t idx = id - kFirstContentToken;
  if (idx >= tokens_.size()) throw ContractError("token id " + std::to_string(id) + " out of range");
  return tokens_[idx];
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const auto& t : tokens_) {
    for (char c : t) mix(static_cast<unsigned char>(c));
    mix(0);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Loading

std::vector<Document> parse_corpus(std::string_view content) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  for_each_record(content, [&](std::string_view line, std::size_t line_no) {
    auto j = parse_line(line, line_no);
    Document d;
    d.doc_id = string_field(j, "doc_id", line_no);
    d.title = string_field(j, "title", line_no, false);
    d.body = string_field(j, "text", line_no);
    if (d.doc_id.empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty doc_id");
    if (split_words(d.body).empty()) {
      throw ValidationError("line " + std::to_string(line_no) + ": document \"" + d.doc_id +
                            "\" has an empty body");
    }
    if (!seen.insert(d.doc_id).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate doc_id \"" + d.doc_id + "\"");
    }
    docs.push_back(std::move(d));
  });
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_file(path));
}

std::vector<Query> parse_queries(std::string_view content) {
  std::vector<Query> queries;
  std::unordered_set<std::string> seen;
  for_each_record(content, [&](std::string_view line, std::size_t line_no) {
    auto j = parse_line(line, line_no);
    Query q;
    q.query_id = string_field(j, "query_id", line_no);
    q.question = string_field(j, "question", line_no);
    q.caption = string_field(j, "caption", line_no, false);
    if (q.query_id.empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty query_id");
    if (!seen.insert(q.query_id).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate query_id \"" + q.query_id + "\"");
    }
    auto answers = j.find("answers");
    if (answers == j.end() || !answers->is_array() || answers->empty()) {
      throw ValidationError("line " + std::to_string(line_no) + ": query \"" + q.query_id +
                            "\" has no answers");
    }
    for (const auto& a : *answers) {
      if (!a.is_object()) throw ParseError("answer is not an object", line_no);
      Answer ans;
      ans.text = string_field(a, "text", line_no);
      auto c = a.find("count");
      if (c == a.end()) {
        ans.count = 1;
      } else if (!c->is_number_integer()) {
        throw ParseError("answer count is not an integer", line_no);
      } else {
        ans.count = c->get<int>();
      }
      if (ans.count < 1) {
        throw ValidationError("line " + std::to_string(line_no) + ": annotator count must be positive");
      }
      q.answers.push_back(std::move(ans));
    }
    if (auto g = j.find("gold_doc_ids"); g != j.end() && !g->is_null()) {
      if (!g->is_array()) throw ParseError("gold_doc_ids is not an array", line_no);
      for (const auto& id : *g) {
        if (!id.is_string()) throw ParseError("gold_doc_ids entry is not a string", line_no);
        q.gold_doc_ids.push_back(id.get<std::string>());
      }
    }
    if (auto c = j.find("choices"); c != j.end() && !c->is_null()) {
      if (!c->is_array()) throw ParseError("choices is not an array", line_no);
      for (const auto& s : *c) {
        if (!s.is_string()) throw ParseError("choice is not a string", line_no);
        q.choices.push_back(s.get<std::string>());
      }
    }
    if (auto c = j.find("correct_choice"); c != j.end() && !c->is_null()) {
      if (!c->is_number_integer()) throw ParseError("correct_choice is not an integer", line_no);
      int idx = c->get<int>();
      if (idx < 0 || static_cast<std::size_t>(idx) >= q.choices.size()) {
        throw ValidationError("line " + std::to_string(line_no) + ": correct_choice out of range");
      }
      q.correct_choice = idx;
    }
    queries.push_back(std::move(q));
  });
  return queries;
}

std::vector<Query> load_queries(const std::filesystem::path& path) {
  return parse_queries(read_file(path));
}

std::vector<std::pair<std::string, std::string>> check_gold_references(
    std::span<const Query> queries, std::span<const Document> docs) {
  std::unordered_set<std::string> known;
  for (const auto& d : docs) known.insert(d.doc_id);
  std::vector<std::pair<std::string, std::string>> missing;
  for (const auto& q : queries) {
    for (const auto& g : q.gold_doc_ids) {
      if (!known.contains(g)) {
        spdlog::warn("query {} references unknown gold document {}", q.query_id, g);
        missing.emplace_back(q.query_id, g);
      }
    }
  }
  return missing;
}

// ---------------------------------------------------------------------------
// Tokenization

Vocabulary build_vocabulary(std::span<const Document> docs) {
  if (docs.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
  std::vector<std::string> words;
  for (const auto& d : docs) {
    for (auto& w : split_words(d.title)) words.push_back(std::move(w));
    for (auto& w : split_words(d.body)) words.push_back(std::move(w));
  }
  return Vocabulary::from_words(std::move(words));
}

std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) {
    if (auto id = vocab.find(w)) ids.push_back(*id);
  }
  return ids;
}

std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab) {
  std::string out;
  for (TokenId t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += vocab.word(t);
  }
  return out;
}

TokenizedDocument tokenize_document(const Document& doc, const Vocabulary& vocab) {
  TokenizedDocument td;
  td.doc_id = doc.doc_id;
  td.tokens = tokenize(doc.title, vocab);
  auto body = tokenize(doc.body, vocab);
  td.tokens.insert(td.tokens.end(), body.begin(), body.end());
  return td;
}

EncodedQuery encode_query(const Query& query, const Vocabulary& vocab) {
  EncodedQuery eq;
  eq.query_id = query.query_id;
  eq.terms = tokenize(query.question, vocab);
  auto cap = tokenize(query.caption, vocab);
  eq.terms.insert(eq.terms.end(), cap.begin(), cap.end());
  std::sort(eq.terms.begin(), eq.terms.end());
  eq.terms.erase(std::unique(eq.terms.begin(), eq.terms.end()), eq.terms.end());
  return eq;
}

// ---------------------------------------------------------------------------
// KnowledgeBase

KnowledgeBase::KnowledgeBase(std::vector<Document> docs) : docs_(std::move(docs)) {
  vocab_ = build_vocabulary(docs_);
  tokenized_.reserve(docs_.size());
  words_.reserve(docs_.size());
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const auto& d = docs_[i];
    if (!by_id_.emplace(d.doc_id, i).second) throw ValidationError("duplicate doc_id \"" + d.doc_id + "\"");
    tokenized_.push_back(tokenize_document(d, vocab_));
    auto w = split_words(d.title);
    auto b = split_words(d.body);
    w.insert(w.end(), b.begin(), b.end());
    words_.push_back(std::move(w));
  }
}

std::optional<std::size_t> KnowledgeBase::ordinal(std::string_view doc_id) const {
  auto it = by_id_.find(std::string(doc_id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::string>& KnowledgeBase::words(std::string_view doc_id) const {
  auto o = ordinal(doc_id);
  if (!o) throw ValidationError("unknown document \"" + std::string(doc_id) + "\"");
  return words_[*o];
}

}  // namespace ause
