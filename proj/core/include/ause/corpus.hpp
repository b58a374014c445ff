#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ause {

using TokenId = std::uint32_t;

/// Global terminator; sorts before everything else.
inline constexpr TokenId kTextEnd = 0;
/// Document separator; sorts right after kTextEnd.
inline constexpr TokenId kDocSep = 1;
/// First id handed to a content token.
inline constexpr TokenId kFirstContentToken = 2;

struct Document {
  std::string doc_id;
  std::string title;
  std::string body;
};

struct Answer {
  std::string text;
  int count = 1;
};

struct Query {
  std::string query_id;
  std::string question;
  /// Text surrogate for the visual input.
  std::string caption;
  std::vector<Answer> answers;
  std::vector<std::string> gold_doc_ids;
  /// Multiple-choice options, empty when the query is open-ended.
  std::vector<std::string> choices;
  std::optional<int> correct_choice;
};

/// Lowercase, split on whitespace, strip punctuation at token edges.
/// Tokens that are pure punctuation disappear.
std::vector<std::string> split_words(std::string_view text);

/// Answer normalization used for every answer comparison: split_words
/// followed by removal of English articles.
std::vector<std::string> normalize_answer_words(std::string_view text);
std::string normalize_answer(std::string_view text);

/// Token <-> id bijection. Ids 0 and 1 are reserved for kTextEnd and kDocSep;
/// content ids follow in lexicographic order of the token strings.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Builds from an arbitrary bag of words; duplicates are collapsed.
  static Vocabulary from_words(std::vector<std::string> words);

  std::size_t size() const noexcept { return tokens_.size() + kFirstContentToken; }
  std::size_t content_size() const noexcept { return tokens_.size(); }
  static bool is_reserved(TokenId id) noexcept { return id < kFirstContentToken; }

  std::optional<TokenId> find(std::string_view word) const;
  /// Ids for every word, or nullopt when any word is unknown.
  std::optional<std::vector<TokenId>> find_all(std::span<const std::string> words) const;
  const std::string& word(TokenId id) const;
  /// Content tokens in id order.
  const std::vector<std::string>& content_words() const noexcept { return tokens_; }

  /// FNV-1a over the content words; used to check that files were built
  /// against the same vocabulary.
  std::uint64_t fingerprint() const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct TokenizedDocument {
  std::string doc_id;
  std::vector<TokenId> tokens;
};

/// Query terms (question + caption) projected onto the corpus vocabulary.
struct EncodedQuery {
  std::string query_id;
  /// Distinct content token ids, ascending.
  std::vector<TokenId> terms;
};

std::vector<Document> load_corpus(const std::filesystem::path& path);
std::vector<Document> parse_corpus(std::string_view content);
std::vector<Query> load_queries(const std::filesystem::path& path);
std::vector<Query> parse_queries(std::string_view content);

/// Logs a warning for every gold_doc_id that names no known document and
/// returns the offending (query_id, doc_id) pairs. Queries are left untouched.
std::vector<std::pair<std::string, std::string>> check_gold_references(
    std::span<const Query> queries, std::span<const Document> docs);

Vocabulary build_vocabulary(std::span<const Document> docs);

/// Unknown words are dropped.
std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab);
std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab);
TokenizedDocument tokenize_document(const Document& doc, const Vocabulary& vocab);
EncodedQuery encode_query(const Query& query, const Vocabulary& vocab);

/// Documents, their token streams and a vocabulary built from them.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  explicit KnowledgeBase(std::vector<Document> docs);

  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  std::size_t size() const noexcept { return docs_.size(); }
  const std::vector<Document>& documents() const noexcept { return docs_; }
  const std::vector<TokenizedDocument>& tokenized() const noexcept { return tokenized_; }

  std::optional<std::size_t> ordinal(std::string_view doc_id) const;
  const TokenizedDocument& tokens(std::size_t ordinal) const { return tokenized_.at(ordinal); }
  const std::vector<std::string>& words(std::size_t ordinal) const { return words_.at(ordinal); }
  /// Words of a document by id; throws ValidationError when unknown.
  const std::vector<std::string>& words(std::string_view doc_id) const;

 private:
  std::vector<Document> docs_;
  Vocabulary vocab_;
  std::vector<TokenizedDocument> tokenized_;
  std::vector<std::vector<std::string>> words_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace ause
